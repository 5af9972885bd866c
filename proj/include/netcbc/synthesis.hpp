#pragma once

// Certificate synthesis: a derivative-free search over the feedback gain F
// wrapped around an exact generalized Lyapunov solve for P.
//
// The joint (P, F) matrix inequality is bilinear, but for a fixed gain the
// map P -> L(P) is linear, so P - L(P) = Q is a kappa(kappa+1)/2-dimensional
// linear system with a unique positive-definite solution whenever the drift
// operator is a contraction. The outer search therefore minimizes the
// spectral radius of the drift operator over F, and a second pass refines
// feasible gains against the safety bound itself.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netcbc/certificate.hpp"
#include "netcbc/model.hpp"
#include "netcbc/nelder_mead.hpp"
#include "netcbc/rng.hpp"
#include "netcbc/sets.hpp"

namespace netcbc {

/// Synthesis failure with the pipeline stage that produced it.
class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// No contractive solution exists (or was found within budget).
class InfeasibilityError : public SynthesisError {
 public:
  InfeasibilityError(std::string stage, const std::string& message,
                     double best_radius)
      : SynthesisError(std::move(stage),
                       message + " (best spectral radius " +
                           std::to_string(best_radius) + ")"),
        best_radius_(best_radius) {}
  double best_radius() const { return best_radius_; }

 private:
  double best_radius_;
};

struct SpectralRadiusEstimate {
  double value = 0.0;
  bool converged = false;
};

/// Spectral radius of the linear map P -> L(P) on symmetric matrices,
/// by shifted power iteration with restarts. The map is positive (it sends
/// the PSD cone into itself), so its spectral radius is a real eigenvalue
/// with a PSD eigenmatrix; iterating the shifted map L + I makes that
/// eigenvalue strictly dominant in modulus even when complex eigenvalues of
/// L tie it, and the identity start always overlaps the Perron eigenmatrix.
inline SpectralRadiusEstimate operator_spectral_radius(
    const AugmentedSystem& aug) {
  const Eigen::Index k = aug.kappa();

  SpectralRadiusEstimate best{0.0, false};
  SplitMix64 restart_rng(0x0badcafe12345678ull);
  constexpr int kRestarts = 3;
  constexpr int kIters = 200;

  for (int attempt = 0; attempt < kRestarts; ++attempt) {
    Matrix V;
    if (attempt == 0) {
      V = Matrix::Identity(k, k);
    } else {
      Matrix G(k, k);
      for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
          G(i, j) = restart_rng.uniform(-1.0, 1.0);
      V = G.transpose() * G;
    }
    V /= V.norm();

    double lambda_prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < kIters; ++it) {
      const Matrix W = drift_operator(aug, V) + V;  // (L + I)(V)
      const double lambda = (V.array() * W.array()).sum();  // <V, (L+I)(V)>_F
      const double wn = W.norm();
      if (wn == 0.0) return {0.0, true};
      V = W / wn;
      if (std::isfinite(lambda_prev) &&
          std::fabs(lambda - lambda_prev) <=
              1e-13 * std::max(1.0, std::fabs(lambda))) {
        const double r = std::max(lambda - 1.0, 0.0);
        if (r > best.value || !best.converged) best = {r, true};
        break;
      }
      lambda_prev = lambda;
    }
    if (!best.converged && std::isfinite(lambda_prev))
      best.value = std::max(best.value, std::max(lambda_prev - 1.0, 0.0));
    if (best.converged) break;
  }
  return best;
}

struct LyapunovSolution {
  Matrix P;
  double residual_max = 0.0;  // max-abs of P - L(P) - Q
  double rcond = 1.0;
  bool well_conditioned = true;
};

namespace detail {

inline Eigen::Index sym_dim(Eigen::Index k) { return k * (k + 1) / 2; }

inline Vector sym_to_vec(const Matrix& P) {
  const Eigen::Index k = P.rows();
  Vector v(sym_dim(k));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) v[idx++] = P(i, j);
  return v;
}

inline Matrix vec_to_sym(const Vector& v, Eigen::Index k) {
  Matrix P(k, k);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      P(i, j) = v[idx];
      P(j, i) = v[idx];
      ++idx;
    }
  return P;
}

}  // namespace detail

/// Solves P - L(P) = Q for symmetric P by assembling the action of the
/// drift operator on the symmetric basis and solving the resulting linear
/// system directly. Requires the operator to be a contraction; a converged
/// radius estimate >= 1 or a non-positive-definite solution is reported as
/// infeasibility.
inline LyapunovSolution solve_generalized_lyapunov(const AugmentedSystem& aug,
                                                   const Matrix& Q) {
  const Eigen::Index k = aug.kappa();
  detail::require_symmetric(Q, 1e-12, "solve_generalized_lyapunov");
  if (Q.rows() != k)
    throw std::invalid_argument(
        "solve_generalized_lyapunov: Q must be kappa x kappa");

  const SpectralRadiusEstimate radius = operator_spectral_radius(aug);
  if (radius.converged && radius.value >= 1.0)
    throw InfeasibilityError("lyapunov",
                             "drift operator is not a contraction",
                             radius.value);

  const Eigen::Index s = detail::sym_dim(k);
  Matrix system(s, s);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) {
      Matrix basis = Matrix::Zero(k, k);
      basis(i, j) = 1.0;
      basis(j, i) = 1.0;
      system.col(col++) = detail::sym_to_vec(drift_operator(aug, basis));
    }
  system = Matrix::Identity(s, s) - system;

  Eigen::PartialPivLU<Matrix> lu(system);
  LyapunovSolution sol;
  sol.rcond = lu.rcond();
  sol.well_conditioned = sol.rcond > 1e-12;
  sol.P = detail::vec_to_sym(lu.solve(detail::sym_to_vec(Q)), k);

  const double scale =
      std::max(1.0, std::max(sol.P.cwiseAbs().maxCoeff(), Q.cwiseAbs().maxCoeff()));
  sol.residual_max =
      (sol.P - drift_operator(aug, sol.P) - Q).cwiseAbs().maxCoeff();
  if (!sol.P.allFinite() || sol.residual_max > 1e-9 * scale)
    throw InfeasibilityError(
        "lyapunov", "fixed-point solve failed to converge", radius.value);
  if (detail::min_eigenvalue(sol.P) <= 0.0)
    throw InfeasibilityError(
        "lyapunov",
        "solved P is not positive definite; no contractive certificate exists",
        radius.value);
  return sol;
}

/// Gain search strategy for the outer loop.
enum class GainSearchMethod { NelderMead, RandomRestartCoordinate };

struct SynthesisConfig {
  CoeffVariant variant = CoeffVariant::DerivationExact;
  std::optional<Matrix> lyapunov_rhs;  // Q, identity when unset
  GainSearchMethod gain_search = GainSearchMethod::NelderMead;
  long budget = 400;
  std::uint64_t seed = 1;
  double rho_target = 0.999;
  ToleranceConfig tol;

  void validate() const {
    if (budget < 1)
      throw std::invalid_argument("SynthesisConfig: budget must be >= 1");
    if (!(rho_target > 0.0 && rho_target < 1.0))
      throw std::invalid_argument(
          "SynthesisConfig: rho_target must be in (0,1)");
  }

  Matrix resolved_rhs(Eigen::Index kappa) const {
    if (!lyapunov_rhs) return Matrix::Identity(kappa, kappa);
    if (lyapunov_rhs->rows() != kappa || lyapunov_rhs->cols() != kappa)
      throw std::invalid_argument(
          "SynthesisConfig: lyapunov_rhs must be kappa x kappa");
    return *lyapunov_rhs;
  }
};

struct TraceEntry {
  std::string stage;
  long eval = 0;
  double value = 0.0;
};

struct GainSearchResult {
  FeedbackGain gain;
  double radius = 0.0;
  long evals = 0;
  std::vector<TraceEntry> trace;
};

namespace detail {

inline Matrix unpack_gain(const Vector& v, Eigen::Index m, Eigen::Index n) {
  Matrix F(m, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) F(i, j) = v[idx++];
  return F;
}

inline Vector pack_gain(const Matrix& F) {
  Vector v(F.size());
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < F.rows(); ++i)
    for (Eigen::Index j = 0; j < F.cols(); ++j) v[idx++] = F(i, j);
  return v;
}

}  // namespace detail

/// Finds F minimizing the drift-operator spectral radius, starting from
/// F = 0 with seeded random restarts. Throws InfeasibilityError when the
/// budget is exhausted without reaching radius < 1.
inline GainSearchResult search_gain(const DtSls& sys, const NetworkParams& net,
                                    const SynthesisConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Eigen::Index p = m * n;

  GainSearchResult result{FeedbackGain(Matrix::Zero(m, n))};
  result.radius = std::numeric_limits<double>::infinity();

  long evals_used = 0;
  auto objective = [&](const Eigen::VectorXd& v) {
    const FeedbackGain gain(detail::unpack_gain(v, m, n));
    const AugmentedSystem aug = build_augmented(sys, gain, net, cfg.variant);
    const double r = operator_spectral_radius(aug).value;
    ++evals_used;
    result.trace.push_back({"gain_search", evals_used, r});
    return r;
  };

  SplitMix64 restart_rng = derive_stream(cfg.seed, 0xF00D);
  const int attempts = 4;
  const long chunk = std::max<long>(cfg.budget / attempts, 1);

  for (int attempt = 0; attempt < attempts && evals_used < cfg.budget;
       ++attempt) {
    Vector start(p);
    if (attempt == 0) {
      start.setZero();
    } else {
      for (Eigen::Index i = 0; i < p; ++i) start[i] = restart_rng.uniform(-1.0, 1.0);
    }
    const long allowance = std::min<long>(chunk, cfg.budget - evals_used);
    const MinimizeResult mr =
        cfg.gain_search == GainSearchMethod::NelderMead
            ? nelder_mead(objective, start, allowance)
            : coordinate_search(objective, start, allowance);
    if (mr.value < result.radius) {
      result.radius = mr.value;
      result.gain = FeedbackGain(detail::unpack_gain(mr.x, m, n));
    }
    if (result.radius <= cfg.rho_target) break;
  }
  result.evals = evals_used;

  if (!(result.radius < 1.0))
    throw InfeasibilityError(
        "gain_search", "no gain with a contractive drift operator found",
        result.radius);
  return result;
}

struct SynthesisResult {
  FeedbackGain gain;
  QuadraticCbc cbc;
  double rho = 0.0;    // spectral radius at the chosen gain
  double bound = 0.0;  // epsilon = min(1, (eta + c T) / beta)
  std::vector<TraceEntry> trace;
  LyapunovSolution lyapunov;
};

/// Full pipeline: gain search, Lyapunov solve, level sets, bound. Feasible
/// gains are refined a second time against the bound ratio itself, and the
/// final P is rescaled so that beta = 1 (the bound is invariant under joint
/// scaling; the scale only trades margin in the drift inequality).
inline SynthesisResult synthesize(const DtSls& sys, const NetworkParams& net,
                                  const SafetySpec& spec,
                                  const SynthesisConfig& cfg) {
  cfg.validate();
  if (spec.X1.empty())
    throw SynthesisError("level_sets",
                         "unsafe set X1 is empty; beta is undefined");
  if (spec.n() != sys.n() || spec.m() != sys.m())
    throw SynthesisError("setup", "spec dimensions do not match the plant");

  const Eigen::Index kappa = 2 * (sys.n() + sys.m());
  const Matrix Q = cfg.resolved_rhs(kappa);

  // Stage 1: contraction search on the gain.
  SynthesisConfig radius_cfg = cfg;
  radius_cfg.budget = std::max<long>(1, (cfg.budget * 3) / 5);
  GainSearchResult gs;
  try {
    gs = search_gain(sys, net, radius_cfg);
  } catch (const InfeasibilityError&) {
    throw;
  } catch (const std::exception& e) {
    throw SynthesisError("gain_search", e.what());
  }

  // Pipeline evaluation for a fixed gain: the unclamped bound ratio, or a
  // large penalty when no contractive P exists. Ratios above 1 smoothly
  // penalize gains whose level sets are not separated.
  struct Pipeline {
    bool feasible = false;
    double ratio = std::numeric_limits<double>::infinity();
    double radius = std::numeric_limits<double>::infinity();
    LyapunovSolution solution;
  };
  auto run_pipeline = [&](const FeedbackGain& gain) {
    Pipeline out;
    const AugmentedSystem aug = build_augmented(sys, gain, net, cfg.variant);
    const SpectralRadiusEstimate r = operator_spectral_radius(aug);
    out.radius = r.value;
    if (r.converged && r.value >= 1.0) return out;
    try {
      out.solution = solve_generalized_lyapunov(aug, Q);
    } catch (const InfeasibilityError&) {
      return out;
    }
    const double eta = compute_eta(out.solution.P, spec);
    const BoxMinResult beta = compute_beta(out.solution.P, spec);
    const double c = compute_c(aug, out.solution.P);
    if (!(beta.value > 0.0)) return out;
    out.feasible = true;
    out.ratio = (eta + c * static_cast<double>(spec.T)) / beta.value;
    return out;
  };

  // Stage 2: refine the gain against the bound ratio.
  FeedbackGain best_gain = gs.gain;
  Pipeline best = run_pipeline(best_gain);
  if (!best.feasible)
    throw SynthesisError("lyapunov",
                         "no certificate for the radius-optimal gain");

  std::vector<TraceEntry> trace = std::move(gs.trace);
  const long refine_budget = cfg.budget - gs.evals;
  if (refine_budget > 2 * sys.n() * sys.m()) {
    long refine_evals = 0;
    auto bound_objective = [&](const Eigen::VectorXd& v) {
      const FeedbackGain gain(detail::unpack_gain(v, sys.m(), sys.n()));
      const Pipeline p = run_pipeline(gain);
      ++refine_evals;
      const double value = p.feasible ? p.ratio : 1e3 + p.radius;
      trace.push_back({"bound_refine", refine_evals, value});
      return value;
    };
    const MinimizeResult mr = nelder_mead(
        bound_objective, detail::pack_gain(best_gain.F), refine_budget, 0.25);
    const FeedbackGain refined(detail::unpack_gain(mr.x, sys.m(), sys.n()));
    const Pipeline p = run_pipeline(refined);
    if (p.feasible && p.ratio < best.ratio) {
      best = p;
      best_gain = refined;
    }
  }

  // Stage 3: finalize at the chosen gain. Rescale P so beta = 1, then
  // re-derive every certificate quantity at the final scale.
  const AugmentedSystem aug = build_augmented(sys, best_gain, net, cfg.variant);
  const BoxMinResult beta_raw = compute_beta(best.solution.P, spec);
  Matrix P = best.solution.P;
  if (beta_raw.value > 0.0) {
    const double scale = 1.0 / beta_raw.value;
    P *= scale;
    trace.push_back({"rescale", 0, scale});
  }

  CbcValidation validation;
  try {
    validation = validate_cbc(aug, P, spec, cfg.tol);
  } catch (const std::exception& e) {
    throw SynthesisError("validate", e.what());
  }
  if (!validation.valid) {
    std::string msg = "certificate conditions failed:";
    for (const std::string& f : validation.failures) msg += " [" + f + "]";
    throw SynthesisError("validate", msg);
  }

  SynthesisResult result{best_gain, validation.certificate(aug, P)};
  result.rho = best.radius;
  result.bound = probability_bound(result.cbc, spec.T);
  result.trace = std::move(trace);
  result.lyapunov = best.solution;
  return result;
}

}  // namespace netcbc
