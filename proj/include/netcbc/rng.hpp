#pragma once

// Seeded deterministic random number generation for the Monte Carlo layer.
//
// All randomness in the library flows through SplitMix64 so that runs are
// reproducible bit-for-bit across platforms. Gaussian variates use the
// Marsaglia polar transform of the uniform stream (never the standard
// library distributions, whose output is implementation-defined).

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace netcbc {

/// 64-bit SplitMix generator. Small state, passes BigCrush-level tests for
/// the stream lengths used here, and trivially splittable per trajectory.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + next_double() * (hi - lo);
  }

  /// Returns true with probability p.
  bool bernoulli(double p) { return next_double() < p; }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream for (seed, index), e.g. one per trajectory.
/// Serial and parallel drivers that use one stream per index produce
/// identical results regardless of scheduling.
inline SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mixer(seed ^ (0xA0761D6478BD642Full * (index + 1)));
  return SplitMix64(mixer.next_u64());
}

/// Standard normal variates via the Marsaglia polar transform.
/// Generates pairs; the spare is cached, so the mapping from the uniform
/// stream to the normal stream is fixed and documented by this code.
class PolarGaussian {
 public:
  double sample(SplitMix64& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = rng.uniform(-1.0, 1.0);
      v = rng.uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  void reset() { has_spare_ = false; }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Samples from N(0, cov) for a fixed PSD covariance. The symmetric square
/// root is factored once at construction; draws cost one matrix-vector
/// product on top of the base normals.
class ColoredGaussian {
 public:
  explicit ColoredGaussian(const Eigen::MatrixXd& covariance) {
    if (covariance.rows() != covariance.cols())
      throw std::invalid_argument("ColoredGaussian: covariance must be square");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + covariance.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("ColoredGaussian: covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    const double scale = 1.0 + es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-10 * scale)
      throw std::invalid_argument("ColoredGaussian: covariance is indefinite");
    factor_ = es.eigenvectors() *
              es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
              es.eigenvectors().transpose();
  }

  Eigen::Index dim() const { return factor_.rows(); }

  Eigen::VectorXd draw(SplitMix64& rng, PolarGaussian& polar) const {
    Eigen::VectorXd z(factor_.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = polar.sample(rng);
    return factor_ * z;
  }

 private:
  Eigen::MatrixXd factor_;
};

/// One-shot colored draw; prefer ColoredGaussian when sampling repeatedly.
inline Eigen::VectorXd gaussian_draws(SplitMix64& rng, PolarGaussian& polar,
                                      const Eigen::MatrixXd& covariance) {
  return ColoredGaussian(covariance).draw(rng, polar);
}

}  // namespace netcbc
