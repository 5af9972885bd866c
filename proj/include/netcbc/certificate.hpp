#pragma once

// Quadratic control barrier certificates B(z) = z' P z over the augmented
// closed loop, and the finite-horizon safety bound they induce.
//
// A certificate consists of P together with three scalars:
//   eta  - the maximum of B over the initial quantification domain,
//   beta - the minimum of B over the unsafe quantification domains,
//   c    - the expected one-step growth contributed by the noise.
// When the drift inequality L(P) - P <= 0 holds and beta > eta, the
// probability of reaching the unsafe set within T steps is at most
// (eta + c T) / beta.
//
// For box domains both level sets are computed exactly: the maximum of a
// convex quadratic over a box is attained at a vertex, and the minimum is
// found by enumerating active sets (every subset of coordinates pinned to a
// bound, the rest solved by stationarity).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netcbc/model.hpp"
#include "netcbc/sets.hpp"

namespace netcbc {

/// Numeric tolerances used across certificate checks.
struct ToleranceConfig {
  double inequality = 1e-8;  // max eigenvalue allowed for L(P) - P
  double psd = -1e-10;       // min eigenvalue allowed for P
  double symmetry = 1e-12;   // relative asymmetry allowed for P
};

/// Evaluates z' P z with a plain scalar loop. Fixed accumulation order keeps
/// diagonal cases bit-for-bit reproducible against separable closed forms.
inline double quad_form(const Matrix& P, const Vector& z) {
  const Eigen::Index d = z.size();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) row += P(i, j) * z[j];
    acc += z[i] * row;
  }
  return acc;
}

namespace detail {

inline void require_symmetric(const Matrix& P, double tol, const char* where) {
  if (P.rows() != P.cols())
    throw std::invalid_argument(std::string(where) + ": matrix must be square");
  const double scale = 1.0 + P.cwiseAbs().maxCoeff();
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument(std::string(where) +
                                ": matrix is not symmetric within tolerance");
}

inline double min_eigenvalue(const Matrix& P) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      ((P + P.transpose()) / 2.0).eval(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

/// Verdict of the drift matrix inequality L(P) - P <= tol.
struct ResidualReport {
  Matrix residual;
  double max_eig = 0.0;
  double tol = 0.0;
  bool satisfied = false;
};

/// A validated quadratic certificate with its level sets and noise constant.
struct QuadraticCbc {
  Matrix P;
  double eta = 0.0;
  double beta = 0.0;
  double c = 0.0;
  CoeffVariant variant = CoeffVariant::DerivationExact;
  bool beta_certified = true;

  struct BoundInputs {
    double mu_theta = 1.0;
    double mu_phi = 1.0;
    Matrix sigma_w;
  } bound_inputs;

  QuadraticCbc() = default;
  QuadraticCbc(Matrix p, double eta_in, double beta_in, double c_in,
               CoeffVariant v, BoundInputs inputs, bool beta_cert = true)
      : P(std::move(p)),
        eta(eta_in),
        beta(beta_in),
        c(c_in),
        variant(v),
        beta_certified(beta_cert),
        bound_inputs(std::move(inputs)) {
    detail::require_symmetric(P, 1e-12, "QuadraticCbc");
    const double scale = 1.0 + P.cwiseAbs().maxCoeff();
    if (detail::min_eigenvalue(P) < -1e-10 * scale)
      throw std::invalid_argument("QuadraticCbc: P is not PSD");
    if (!(beta > eta))
      throw std::invalid_argument("QuadraticCbc: requires beta > eta");
    if (eta < 0.0 || c < 0.0)
      throw std::invalid_argument("QuadraticCbc: eta and c must be >= 0");
  }

  double evaluate(const Vector& z) const { return quad_form(P, z); }
};

/// L(P) = A0' P A0 + c1 A1' P A1 + c2 A2' P A2 with (c1, c2) per the
/// system's coefficient variant. Under DerivationExact this is exactly
/// E[Atilde(k)' P Atilde(k)] over the packet outcomes.
inline Matrix drift_operator(const AugmentedSystem& aug, const Matrix& P) {
  detail::require_symmetric(P, 1e-12, "drift_operator");
  if (P.rows() != aug.kappa())
    throw std::invalid_argument("drift_operator: P must be kappa x kappa");
  Matrix out = aug.A0().transpose() * P * aug.A0();
  if (aug.coeff_theta() != 0.0)
    out += aug.coeff_theta() * (aug.A1().transpose() * P * aug.A1());
  if (aug.coeff_phi() != 0.0)
    out += aug.coeff_phi() * (aug.A2().transpose() * P * aug.A2());
  return out;
}

/// Checks L(P) - P <= tol in the semidefinite sense.
inline ResidualReport check_inequality(const AugmentedSystem& aug,
                                       const Matrix& P, double tol) {
  const double scale = 1.0 + P.cwiseAbs().maxCoeff();
  if (detail::min_eigenvalue(P) < -1e-10 * scale)
    throw std::invalid_argument("check_inequality: P is not PSD");
  ResidualReport rep;
  rep.residual = drift_operator(aug, P) - P;
  rep.residual = ((rep.residual + rep.residual.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(rep.residual, Eigen::EigenvaluesOnly);
  rep.max_eig = es.eigenvalues().maxCoeff();
  rep.tol = tol;
  rep.satisfied = rep.max_eig <= tol;
  return rep;
}

/// Expected noise contribution per step:
///   c = Tr(E0' P E0 Sigma_w) + c1 Tr(E1' P E1 Sigma_w),
/// with c1 per the coefficient variant.
inline double compute_c(const AugmentedSystem& aug, const Matrix& P,
                        const Matrix& sigma_w) {
  detail::require_symmetric(P, 1e-12, "compute_c");
  if (P.rows() != aug.kappa())
    throw std::invalid_argument("compute_c: P must be kappa x kappa");
  if (sigma_w.rows() != aug.noise_dim() || sigma_w.cols() != aug.noise_dim())
    throw std::invalid_argument("compute_c: sigma_w must match the noise dimension");
  double c = (aug.E0().transpose() * P * aug.E0() * sigma_w).trace();
  if (aug.coeff_theta() != 0.0)
    c += aug.coeff_theta() *
         (aug.E1().transpose() * P * aug.E1() * sigma_w).trace();
  return c;
}

inline double compute_c(const AugmentedSystem& aug, const Matrix& P) {
  return compute_c(aug, P, aug.source_sys().augmented_noise_cov());
}

/// Exact maximum of z' P z over a bounded box, by vertex enumeration.
/// Valid for PSD P (the maximum of a convex function over a polytope is
/// attained at a vertex).
inline double max_quadratic_over_box(const Matrix& P, const Box& box) {
  const Eigen::Index d = box.dim();
  if (P.rows() != d || P.cols() != d)
    throw std::invalid_argument("max_quadratic_over_box: dimension mismatch");
  if (!box.is_bounded())
    throw std::invalid_argument("max_quadratic_over_box: box must be bounded");
  if (d > 26)
    throw std::invalid_argument(
        "max_quadratic_over_box: dimension " + std::to_string(d) +
        " exceeds 26; 2^d vertex enumeration is intractable -- reduce the "
        "domain dimension or evaluate a sampled estimate instead");
  const std::uint64_t count = std::uint64_t{1} << d;
  Vector z(d);
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (Eigen::Index i = 0; i < d; ++i)
      z[i] = (mask >> i) & 1u ? box.upper[i] : box.lower[i];
    best = std::max(best, quad_form(P, z));
  }
  return best;
}

/// Result of a box minimization; `certified` is false when the exact
/// active-set enumeration was out of reach and a projected-gradient
/// multistart estimate (an upper bound on the true minimum) was returned.
struct BoxMinResult {
  double value = 0.0;
  bool certified = true;
};

namespace detail {

/// Exact minimum of z' P z over a box by active-set enumeration: each
/// coordinate is pinned low, pinned high, or left free; free coordinates are
/// solved from stationarity P_SS z_S = -P_SF z_F. Candidates feasible for
/// the box cover the true minimizer, so the smallest candidate value is the
/// exact minimum.
inline double min_quadratic_active_set(const Matrix& P, const Box& box) {
  const Eigen::Index d = box.dim();
  std::uint64_t count = 1;
  for (Eigen::Index i = 0; i < d; ++i) count *= 3;

  const double bound_scale = std::max(
      1.0, std::max(box.lower.cwiseAbs().maxCoeff(),
                    box.upper.cwiseAbs().maxCoeff()));
  const double p_scale = 1.0 + P.cwiseAbs().maxCoeff();
  const double feas_slack = 1e-9 * bound_scale;

  std::vector<int> state(d);
  std::vector<Eigen::Index> free_idx, fixed_idx;
  free_idx.reserve(d);
  fixed_idx.reserve(d);
  Vector z(d);
  double best = std::numeric_limits<double>::infinity();

  for (std::uint64_t code = 0; code < count; ++code) {
    std::uint64_t rem = code;
    free_idx.clear();
    fixed_idx.clear();
    for (Eigen::Index i = 0; i < d; ++i) {
      state[i] = static_cast<int>(rem % 3);
      rem /= 3;
      if (state[i] == 0)
        free_idx.push_back(i);
      else
        fixed_idx.push_back(i);
    }
    for (Eigen::Index i : fixed_idx)
      z[i] = state[i] == 1 ? box.lower[i] : box.upper[i];

    if (!free_idx.empty()) {
      const Eigen::Index s = static_cast<Eigen::Index>(free_idx.size());
      Vector rhs = Vector::Zero(s);
      for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index i : fixed_idx) rhs[a] -= P(free_idx[a], i) * z[i];
      if (rhs.isZero(0.0)) {
        for (Eigen::Index i : free_idx) z[i] = 0.0;
      } else {
        Matrix sub(s, s);
        for (Eigen::Index a = 0; a < s; ++a)
          for (Eigen::Index b = 0; b < s; ++b)
            sub(a, b) = P(free_idx[a], free_idx[b]);
        const Vector sol = sub.ldlt().solve(rhs);
        if (!sol.allFinite()) continue;
        if ((sub * sol - rhs).cwiseAbs().maxCoeff() >
            1e-9 * p_scale * bound_scale)
          continue;  // stationarity system inconsistent on this face
        for (Eigen::Index a = 0; a < s; ++a) z[free_idx[a]] = sol[a];
      }
      bool feasible = true;
      for (Eigen::Index i : free_idx) {
        if (z[i] < box.lower[i] - feas_slack || z[i] > box.upper[i] + feas_slack) {
          feasible = false;
          break;
        }
        z[i] = std::min(std::max(z[i], box.lower[i]), box.upper[i]);
      }
      if (!feasible) continue;
    }
    best = std::min(best, quad_form(P, z));
  }
  return best;
}

/// Projected-gradient multistart; returns an upper estimate of the minimum.
inline double min_quadratic_projected_gradient(const Matrix& P, const Box& box,
                                               std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      ((P + P.transpose()) / 2.0).eval(), Eigen::EigenvaluesOnly);
  const double lmax = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
  const double step = 1.0 / (2.0 * lmax);
  SplitMix64 rng(seed);
  double best = std::numeric_limits<double>::infinity();
  constexpr int kStarts = 24;
  constexpr int kIters = 4000;
  for (int s = 0; s < kStarts; ++s) {
    Vector z = s == 0 ? box.clamp(Vector::Zero(box.dim()))
                      : box.sample_uniform(rng);
    for (int it = 0; it < kIters; ++it) {
      const Vector g = 2.0 * (P * z);
      const Vector next = box.clamp(z - step * g);
      if ((next - z).cwiseAbs().maxCoeff() < 1e-14) {
        z = next;
        break;
      }
      z = next;
    }
    best = std::min(best, quad_form(P, z));
  }
  return best;
}

}  // namespace detail

/// Minimum of z' P z over a box: exact for dim <= 12 (3^d active sets),
/// otherwise a non-certified projected-gradient estimate.
inline BoxMinResult min_quadratic_over_box(const Matrix& P, const Box& box,
                                           std::uint64_t pg_seed = 0x9b5e17u) {
  const Eigen::Index d = box.dim();
  if (P.rows() != d || P.cols() != d)
    throw std::invalid_argument("min_quadratic_over_box: dimension mismatch");
  if (!box.is_bounded())
    throw std::invalid_argument("min_quadratic_over_box: box must be bounded");
  if (d <= 12)
    return {detail::min_quadratic_active_set(P, box), true};
  return {detail::min_quadratic_projected_gradient(P, box, pg_seed), false};
}

/// eta: exact maximum of B over X0 x X x U x U.
inline double compute_eta(const Matrix& P, const SafetySpec& spec) {
  detail::require_symmetric(P, 1e-12, "compute_eta");
  return max_quadratic_over_box(P, spec.initial_domain());
}

/// beta: minimum of B over the union of unsafe domains X1_j x X x U x U.
inline BoxMinResult compute_beta(const Matrix& P, const SafetySpec& spec) {
  detail::require_symmetric(P, 1e-12, "compute_beta");
  const std::vector<Box> domains = spec.unsafe_domains();
  if (domains.empty())
    throw std::invalid_argument(
        "compute_beta: unsafe set X1 is empty, beta is undefined");
  BoxMinResult out{std::numeric_limits<double>::infinity(), true};
  for (std::size_t j = 0; j < domains.size(); ++j) {
    const BoxMinResult r =
        min_quadratic_over_box(P, domains[j], 0x5e7b0000u + j);
    out.value = std::min(out.value, r.value);
    out.certified = out.certified && r.certified;
  }
  return out;
}

/// The reach probability bound epsilon = (eta + c T) / beta, clamped to
/// [0, 1]. The safety guarantee is 1 - epsilon.
inline double probability_bound_raw(double eta, double c, double beta, long T) {
  if (!(beta > 0.0))
    throw std::invalid_argument(
        "probability_bound: beta must be positive (vacuous certificate)");
  if (T < 0) throw std::invalid_argument("probability_bound: T must be >= 0");
  const double ratio = (eta + c * static_cast<double>(T)) / beta;
  return std::min(1.0, std::max(0.0, ratio));
}

inline double probability_bound(const QuadraticCbc& cbc, long T) {
  return probability_bound_raw(cbc.eta, cbc.c, cbc.beta, T);
}

/// Outcome of validating a candidate (P, F) against every certificate
/// condition, with per-condition margins for diagnostics.
struct CbcValidation {
  bool valid = false;
  ResidualReport inequality;
  double eta = 0.0;
  double beta = 0.0;
  bool beta_certified = true;
  double c = 0.0;
  std::vector<std::string> failures;

  /// The assembled certificate; throws if any condition failed.
  QuadraticCbc certificate(const AugmentedSystem& aug, Matrix P) const {
    if (!valid) {
      std::string msg = "certificate invalid:";
      for (const std::string& f : failures) msg += " [" + f + "]";
      throw std::runtime_error(msg);
    }
    QuadraticCbc::BoundInputs inputs;
    inputs.mu_theta = aug.source_net().mu_theta;
    inputs.mu_phi = aug.source_net().mu_phi;
    inputs.sigma_w = aug.source_sys().augmented_noise_cov();
    return QuadraticCbc(std::move(P), eta, beta, c, aug.variant(),
                        std::move(inputs), beta_certified);
  }
};

/// Runs all certificate conditions for a candidate P over the given spec.
inline CbcValidation validate_cbc(const AugmentedSystem& aug, const Matrix& P,
                                  const SafetySpec& spec,
                                  const ToleranceConfig& tol = {}) {
  if (2 * (spec.n() + spec.m()) != aug.kappa())
    throw std::invalid_argument(
        "validate_cbc: spec dimensions inconsistent with the augmented system");
  CbcValidation v;
  detail::require_symmetric(P, tol.symmetry, "validate_cbc");
  const double scale = 1.0 + P.cwiseAbs().maxCoeff();
  const double min_eig = detail::min_eigenvalue(P);
  if (min_eig < tol.psd * scale)
    v.failures.push_back("P not PSD: min eigenvalue " + std::to_string(min_eig));

  v.inequality = check_inequality(aug, P, tol.inequality);
  if (!v.inequality.satisfied)
    v.failures.push_back("drift inequality violated: max residual eigenvalue " +
                         std::to_string(v.inequality.max_eig) + " > " +
                         std::to_string(tol.inequality));

  v.eta = compute_eta(P, spec);
  const BoxMinResult beta = compute_beta(P, spec);
  v.beta = beta.value;
  v.beta_certified = beta.certified;
  v.c = compute_c(aug, P);
  if (!(v.beta > v.eta))
    v.failures.push_back("level sets not separated: beta " +
                         std::to_string(v.beta) + " <= eta " +
                         std::to_string(v.eta));
  v.valid = v.failures.empty();
  return v;
}

}  // namespace netcbc
