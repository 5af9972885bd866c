#pragma once

// Permanent-magnet synchronous motor case study: the discrete d/q-current
// plant, plus a bundled reference certificate candidate for cross-checking.

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "netcbc/model.hpp"

namespace netcbc {

struct MotorParams {
  double R = 0.025;         // stator resistance [Ohm]
  double omega_el = 6283.2; // electrical angular frequency [rad/s]
  double Ld = 1.0e-4;       // d-axis inductance [H-turn]
  double Lq = 1.2e-4;       // q-axis inductance [H-turn]
  double Ts = 1.0e-4;       // sampling time [s]

  void validate() const {
    if (!(R > 0.0 && omega_el > 0.0 && Ld > 0.0 && Lq > 0.0 && Ts > 0.0))
      throw std::invalid_argument("MotorParams: all parameters must be > 0");
  }
};

enum class MotorDiscretization {
  Printed,       // the published closed-form A, B (kept verbatim)
  ZeroOrderHold  // standard ZOH of the continuous d/q dynamics, for comparison
};

/// Builds the discrete motor plant. The printed A carries (Ld/R), (Lq/R)
/// prefactors on its diagonal, which makes its entries far from unity at
/// small Ts; it is reproduced verbatim. Noise covariances default to
/// noise_std^2 * I on both channels.
inline DtSls build_motor(const MotorParams& p, double noise_std = 0.005,
                         MotorDiscretization disc = MotorDiscretization::Printed) {
  p.validate();
  if (noise_std < 0.0)
    throw std::invalid_argument("build_motor: noise_std must be >= 0");

  Matrix A(2, 2), B(2, 2);
  if (disc == MotorDiscretization::Printed) {
    const double ed = std::exp(-(p.R / p.Ld) * p.Ts);
    const double eq = std::exp(-(p.R / p.Lq) * p.Ts);
    A << (p.Ld / p.R) * ed, p.Lq * (p.omega_el / p.R) * (1.0 - ed),
        -p.Ld * (p.omega_el / p.R) * (1.0 - eq), (p.Lq / p.R) * eq;
    B << (1.0 / p.R) * (1.0 - ed), (p.Lq / p.R) * (1.0 - ed),
        (p.Ld / p.R) * (1.0 - eq), (1.0 / p.R) * (1.0 - eq);
  } else {
    // Continuous d/q current dynamics: Ld id' = -R id + w Lq iq + vd,
    // Lq iq' = -w Ld id - R iq + vq.
    Matrix Ac(2, 2), Bc(2, 2);
    Ac << -p.R / p.Ld, p.omega_el * p.Lq / p.Ld,
        -p.omega_el * p.Ld / p.Lq, -p.R / p.Lq;
    Bc << 1.0 / p.Ld, 0.0, 0.0, 1.0 / p.Lq;
    A = (Ac * p.Ts).exp();
    B = Ac.partialPivLu().solve((A - Matrix::Identity(2, 2)) * Bc);
  }

  const Matrix cov = noise_std * noise_std * Matrix::Identity(2, 2);
  return DtSls(A, B, cov, cov);
}

/// The bundled reference candidate (P, F) for the motor loop. The sampling
/// time behind these numbers is not known, so they are used for structural
/// checks and recorded verdicts, never asserted as valid.
struct ReferenceCandidate {
  Matrix P;
  Matrix F;
};

inline ReferenceCandidate motor_reference_candidate() {
  ReferenceCandidate rc;
  rc.P.resize(8, 8);
  rc.P << 0.92, 0.68, -0.58, -0.031, 0.34, -0.061, -0.073, -0.074,
      0.68, 3.7, -0.41, -0.85, 0.21, 0.33, 0.036, 0.12,
      -0.58, -0.41, 0.94, 0.22, -0.088, -0.056, 0.43, -0.034,
      -0.031, -0.85, 0.22, 1.2, -0.071, 0.066, 0.23, 0.14,
      0.34, 0.21, -0.088, -0.071, 1.5, -0.013, -0.85, -0.093,
      -0.061, 0.33, -0.056, 0.066, -0.013, 0.91, -0.13, -0.13,
      -0.073, 0.036, 0.43, 0.23, -0.85, -0.13, 1.5, -0.053,
      -0.074, 0.12, -0.034, 0.14, -0.093, -0.13, -0.053, 0.88;
  rc.F.resize(2, 2);
  rc.F << -0.68, -0.70, 0.79, -0.60;
  return rc;
}

}  // namespace netcbc
