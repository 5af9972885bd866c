#pragma once

// Plant, lossy-network, and augmented closed-loop models.
//
// The closed loop stacks plant state x, predictor state x_hat, applied
// input u, and predicted input u_hat into z = [x; x_hat; u; u_hat] of
// dimension kappa = 2(n + m). One step of the loop is the jump-linear map
//
//   z(k+1) = Atilde(k) z(k) + Etilde(k) w(k),   w = [w1; w2],
//
// where Atilde(k), Etilde(k) depend on the Bernoulli delivery outcomes
// theta(k) (sensor->controller) and phi(k) (controller->actuator). Writing
// theta = mu_theta (1 - delta_theta) with delta_theta zero-mean splits the
// transition into a mean part plus independent fluctuations:
//
//   Atilde(k) = A0 + A1 delta_theta(k) + A2 delta_phi(k),
//   Etilde(k) = E0 + E1 delta_theta(k).
//
// delta takes the value 1 on a lost packet and 1 - 1/mu on a delivered one,
// so E[delta] = 0 and Var[delta] = 1/mu - 1.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "netcbc/rng.hpp"

namespace netcbc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Discrete-time stochastic linear plant
///   x(k+1) = A x(k) + B u(k) + w1(k),   y(k) = x(k) + w2(k),
/// with mutually independent i.i.d. process noise w1 ~ N(0, sigma_w1) and
/// measurement noise w2 ~ N(0, sigma_w2).
struct DtSls {
  Matrix A;
  Matrix B;
  Matrix sigma_w1;
  Matrix sigma_w2;

  DtSls(Matrix a, Matrix b) : DtSls(std::move(a), std::move(b), {}, {}) {
    sigma_w1 = Matrix::Identity(n(), n());
    sigma_w2 = Matrix::Identity(n(), n());
  }

  DtSls(Matrix a, Matrix b, Matrix w1_cov, Matrix w2_cov)
      : A(std::move(a)),
        B(std::move(b)),
        sigma_w1(std::move(w1_cov)),
        sigma_w2(std::move(w2_cov)) {
    if (A.rows() != A.cols())
      throw std::invalid_argument("DtSls: A must be square");
    if (B.rows() != A.rows())
      throw std::invalid_argument("DtSls: B row count must match A");
    if (sigma_w1.size() > 0) check_noise_cov(sigma_w1, "sigma_w1");
    if (sigma_w2.size() > 0) check_noise_cov(sigma_w2, "sigma_w2");
  }

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  /// Block-diagonal covariance of the stacked noise w = [w1; w2].
  Matrix augmented_noise_cov() const {
    Matrix s = Matrix::Zero(2 * n(), 2 * n());
    s.topLeftCorner(n(), n()) = sigma_w1;
    s.bottomRightCorner(n(), n()) = sigma_w2;
    return s;
  }

 private:
  void check_noise_cov(const Matrix& s, const char* name) const {
    if (s.rows() != n() || s.cols() != n())
      throw std::invalid_argument(std::string("DtSls: ") + name +
                                  " must be n x n");
    const double scale = 1.0 + s.cwiseAbs().maxCoeff();
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw std::invalid_argument(std::string("DtSls: ") + name +
                                  " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale)
      throw std::invalid_argument(std::string("DtSls: ") + name +
                                  " must be positive semidefinite");
  }
};

/// Per-step delivery probabilities of the two wireless branches.
struct NetworkParams {
  double mu_theta;  // sensor -> controller
  double mu_phi;    // controller -> actuator

  NetworkParams(double theta_prob, double phi_prob)
      : mu_theta(theta_prob), mu_phi(phi_prob) {
    if (!(mu_theta > 0.0 && mu_theta <= 1.0))
      throw std::invalid_argument("NetworkParams: mu_theta must be in (0,1]");
    if (!(mu_phi > 0.0 && mu_phi <= 1.0))
      throw std::invalid_argument("NetworkParams: mu_phi must be in (0,1]");
  }
};

/// Static output-feedback gain u = F y.
struct FeedbackGain {
  Matrix F;
  FeedbackGain() = default;
  explicit FeedbackGain(Matrix f) : F(std::move(f)) {}
};

/// Which variance coefficients weight the fluctuation terms in the drift
/// operator and the noise constant.
///
/// DerivationExact applies Var[delta] = 1/mu - 1 to the decomposition blocks
/// as stored (which carry the mu scaling), so the drift operator equals the
/// exact conditional expectation over the four packet outcomes.
/// PaperLiteral weights the unscaled difference blocks by (1 - mu)^2
/// instead, reproducing the printed inequality and noise-constant formulas.
enum class CoeffVariant { PaperLiteral, DerivationExact };

inline const char* to_string(CoeffVariant v) {
  return v == CoeffVariant::PaperLiteral ? "paper" : "exact";
}

/// The decomposed jump-linear closed loop. Instances built from a plant via
/// build_augmented keep a copy of their sources; synthetic instances for
/// tests can be assembled directly from blocks.
class AugmentedSystem {
 public:
  static AugmentedSystem from_model(const DtSls& sys, const FeedbackGain& gain,
                                    const NetworkParams& net,
                                    CoeffVariant variant);

  /// Assembles a system from raw blocks (no source model attached).
  /// var_theta/var_phi are used directly as the fluctuation weights.
  static AugmentedSystem from_blocks(Matrix a0, Matrix a1, Matrix a2,
                                     Matrix e0, Matrix e1, double var_theta,
                                     double var_phi) {
    AugmentedSystem aug;
    aug.A0_ = std::move(a0);
    aug.A1_ = std::move(a1);
    aug.A2_ = std::move(a2);
    aug.E0_ = std::move(e0);
    aug.E1_ = std::move(e1);
    aug.var_theta_ = var_theta;
    aug.var_phi_ = var_phi;
    aug.coeff_theta_ = var_theta;
    aug.coeff_phi_ = var_phi;
    aug.variant_ = CoeffVariant::DerivationExact;
    const Eigen::Index k = aug.A0_.rows();
    if (aug.A0_.cols() != k || aug.A1_.rows() != k || aug.A1_.cols() != k ||
        aug.A2_.rows() != k || aug.A2_.cols() != k)
      throw std::invalid_argument("AugmentedSystem: A blocks must be kappa x kappa");
    if (aug.E0_.rows() != k || aug.E1_.rows() != k ||
        aug.E0_.cols() != aug.E1_.cols())
      throw std::invalid_argument("AugmentedSystem: E blocks inconsistent");
    return aug;
  }

  Eigen::Index kappa() const { return A0_.rows(); }
  Eigen::Index noise_dim() const { return E0_.cols(); }

  const Matrix& A0() const { return A0_; }
  const Matrix& A1() const { return A1_; }
  const Matrix& A2() const { return A2_; }
  const Matrix& E0() const { return E0_; }
  const Matrix& E1() const { return E1_; }
  // E2 is identically zero and not stored.

  double var_theta() const { return var_theta_; }
  double var_phi() const { return var_phi_; }
  CoeffVariant variant() const { return variant_; }

  /// Fluctuation weights applied to the stored A1/A2 (and E1) blocks by the
  /// drift operator and noise constant, already translated per variant.
  double coeff_theta() const { return coeff_theta_; }
  double coeff_phi() const { return coeff_phi_; }

  bool has_source() const { return source_.has_value(); }
  const DtSls& source_sys() const { return require_source().sys; }
  const FeedbackGain& source_gain() const { return require_source().gain; }
  const NetworkParams& source_net() const { return require_source().net; }

 private:
  struct Source {
    DtSls sys;
    FeedbackGain gain;
    NetworkParams net;
  };

  AugmentedSystem() = default;

  const Source& require_source() const {
    if (!source_)
      throw std::logic_error("AugmentedSystem: no source model attached");
    return *source_;
  }

  Matrix A0_, A1_, A2_, E0_, E1_;
  double var_theta_ = 0.0, var_phi_ = 0.0;
  double coeff_theta_ = 0.0, coeff_phi_ = 0.0;
  CoeffVariant variant_ = CoeffVariant::DerivationExact;
  std::optional<Source> source_;

  friend AugmentedSystem build_augmented(const DtSls&, const FeedbackGain&,
                                         const NetworkParams&, CoeffVariant);
};

/// Builds the decomposed augmented system for plant, gain, and network.
/// Block layout over z = [x; x_hat; u; u_hat]:
///
///   A0 = [ A          0            B             0  ]
///        [ mt A   (1-mt) A         0             B  ]
///        [ 0      mp F A     (1-mp) I_m      mp F B ]
///        [ 0        F A            0            F B ]
///
///   A1 has the single nonzero row block [-mt A, mt A, 0, 0] at x_hat;
///   A2 has the single nonzero row block [0, -mp F A, mp I_m, -mp F B] at u;
///   E0 = [I, 0; 0, mt A; 0, 0; 0, 0],  E1 = [0, 0; 0, -mt A; 0, 0; 0, 0].
inline AugmentedSystem build_augmented(const DtSls& sys,
                                       const FeedbackGain& gain,
                                       const NetworkParams& net,
                                       CoeffVariant variant) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  if (gain.F.rows() != m || gain.F.cols() != n)
    throw std::invalid_argument(
        "build_augmented: gain block F must be m x n (got " +
        std::to_string(gain.F.rows()) + "x" + std::to_string(gain.F.cols()) +
        ", expected " + std::to_string(m) + "x" + std::to_string(n) + ")");
  const Eigen::Index k = 2 * (n + m);
  const double mt = net.mu_theta;
  const double mp = net.mu_phi;
  const Matrix& A = sys.A;
  const Matrix& B = sys.B;
  const Matrix FA = gain.F * A;
  const Matrix FB = gain.F * B;

  // Row/column offsets of the x, x_hat, u, u_hat blocks within z.
  const Eigen::Index ox = 0, oxh = n, ou = 2 * n, ouh = 2 * n + m;

  Matrix A0 = Matrix::Zero(k, k);
  A0.block(ox, ox, n, n) = A;
  A0.block(ox, ou, n, m) = B;
  A0.block(oxh, ox, n, n) = mt * A;
  A0.block(oxh, oxh, n, n) = (1.0 - mt) * A;
  A0.block(oxh, ouh, n, m) = B;
  A0.block(ou, oxh, m, n) = mp * FA;
  A0.block(ou, ou, m, m) = (1.0 - mp) * Matrix::Identity(m, m);
  A0.block(ou, ouh, m, m) = mp * FB;
  A0.block(ouh, oxh, m, n) = FA;
  A0.block(ouh, ouh, m, m) = FB;

  Matrix A1 = Matrix::Zero(k, k);
  A1.block(oxh, ox, n, n) = -mt * A;
  A1.block(oxh, oxh, n, n) = mt * A;

  Matrix A2 = Matrix::Zero(k, k);
  A2.block(ou, oxh, m, n) = -mp * FA;
  A2.block(ou, ou, m, m) = mp * Matrix::Identity(m, m);
  A2.block(ou, ouh, m, m) = -mp * FB;

  Matrix E0 = Matrix::Zero(k, 2 * n);
  E0.block(ox, 0, n, n) = Matrix::Identity(n, n);
  E0.block(oxh, n, n, n) = mt * A;

  Matrix E1 = Matrix::Zero(k, 2 * n);
  E1.block(oxh, n, n, n) = -mt * A;

  AugmentedSystem aug;
  aug.A0_ = std::move(A0);
  aug.A1_ = std::move(A1);
  aug.A2_ = std::move(A2);
  aug.E0_ = std::move(E0);
  aug.E1_ = std::move(E1);
  aug.var_theta_ = 1.0 / mt - 1.0;
  aug.var_phi_ = 1.0 / mp - 1.0;
  aug.variant_ = variant;
  if (variant == CoeffVariant::DerivationExact) {
    aug.coeff_theta_ = aug.var_theta_;
    aug.coeff_phi_ = aug.var_phi_;
  } else {
    // The printed inequality weights the unscaled difference blocks
    // (A1 / mt, A2 / mp) by (1 - mu)^2; translated to the stored blocks the
    // weight becomes ((1 - mu) / mu)^2.
    const double rt = (1.0 - mt) / mt;
    const double rp = (1.0 - mp) / mp;
    aug.coeff_theta_ = rt * rt;
    aug.coeff_phi_ = rp * rp;
  }
  aug.source_ = AugmentedSystem::Source{sys, gain, net};
  return aug;
}

inline AugmentedSystem AugmentedSystem::from_model(const DtSls& sys,
                                                   const FeedbackGain& gain,
                                                   const NetworkParams& net,
                                                   CoeffVariant variant) {
  return build_augmented(sys, gain, net, variant);
}

/// Realized transition matrices for concrete packet outcomes, assembled
/// directly from the closed-loop equations rather than the decomposition.
/// This is the oracle side of the decomposition-identity checks.
inline std::pair<Matrix, Matrix> realize_transition(const AugmentedSystem& aug,
                                                    int theta, int phi) {
  if ((theta != 0 && theta != 1) || (phi != 0 && phi != 1))
    throw std::invalid_argument("realize_transition: theta, phi must be 0 or 1");
  const DtSls& sys = aug.source_sys();
  const FeedbackGain& gain = aug.source_gain();
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Eigen::Index k = 2 * (n + m);
  const Matrix& A = sys.A;
  const Matrix& B = sys.B;
  const Matrix FA = gain.F * A;
  const Matrix FB = gain.F * B;
  const double th = static_cast<double>(theta);
  const double ph = static_cast<double>(phi);
  const Eigen::Index ox = 0, oxh = n, ou = 2 * n, ouh = 2 * n + m;

  Matrix Ak = Matrix::Zero(k, k);
  Ak.block(ox, ox, n, n) = A;
  Ak.block(ox, ou, n, m) = B;
  Ak.block(oxh, ox, n, n) = th * A;
  Ak.block(oxh, oxh, n, n) = (1.0 - th) * A;
  Ak.block(oxh, ouh, n, m) = B;
  Ak.block(ou, oxh, m, n) = ph * FA;
  Ak.block(ou, ou, m, m) = (1.0 - ph) * Matrix::Identity(m, m);
  Ak.block(ou, ouh, m, m) = ph * FB;
  Ak.block(ouh, oxh, m, n) = FA;
  Ak.block(ouh, ouh, m, m) = FB;

  Matrix Ek = Matrix::Zero(k, 2 * n);
  Ek.block(ox, 0, n, n) = Matrix::Identity(n, n);
  Ek.block(oxh, n, n, n) = th * A;

  return {std::move(Ak), std::move(Ek)};
}

/// The zero-mean fluctuation value associated with a delivery outcome:
/// delta = 1 on loss, 1 - 1/mu on delivery (so mu (1 - delta) reproduces
/// the outcome bit).
inline double delta_of_outcome(int outcome_bit, double mu) {
  return 1.0 - static_cast<double>(outcome_bit) / mu;
}

/// Draws delta: 1 with probability 1 - mu, otherwise 1 - 1/mu.
inline double sample_delta(double mu, SplitMix64& rng) {
  if (!(mu > 0.0 && mu <= 1.0))
    throw std::domain_error("sample_delta: mu must be in (0,1]");
  const bool delivered = rng.next_double() < mu;
  return delivered ? 1.0 - 1.0 / mu : 1.0;
}

}  // namespace netcbc
