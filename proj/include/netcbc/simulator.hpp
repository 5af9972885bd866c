#pragma once

// Seeded Monte Carlo simulation of the networked closed loop, in both the
// component-wise form (plant, predictor, hold, input propagation) and the
// augmented jump-linear form. The two steppers consume the same draw record
// so their agreement can be checked trajectory-by-trajectory.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "netcbc/model.hpp"
#include "netcbc/rng.hpp"
#include "netcbc/sets.hpp"
#include "netcbc/stats.hpp"

namespace netcbc {

/// Closed-loop state; the stacking order [x; x_hat; u; u_hat] matches the
/// augmented z exactly.
struct LoopState {
  Vector x;
  Vector x_hat;
  Vector u;
  Vector u_hat;

  Vector to_augmented() const {
    Vector z(x.size() + x_hat.size() + u.size() + u_hat.size());
    z << x, x_hat, u, u_hat;
    return z;
  }

  static LoopState from_augmented(const Vector& z, Eigen::Index n,
                                  Eigen::Index m) {
    if (z.size() != 2 * (n + m))
      throw std::invalid_argument("LoopState: augmented vector size mismatch");
    LoopState s;
    s.x = z.segment(0, n);
    s.x_hat = z.segment(n, n);
    s.u = z.segment(2 * n, m);
    s.u_hat = z.segment(2 * n + m, m);
    return s;
  }
};

/// Noise and packet outcomes consumed by one transition. The phi consumed
/// here is the decision that reaches the actuator for the next input slot;
/// the one-round transmission delay of the hold path is already baked into
/// the shifted input update, so a single phi per transition drives both
/// steppers identically.
struct DrawRecord {
  Vector w1;
  Vector w2;
  int theta = 1;
  int phi = 1;
};

/// One step of the component-wise closed loop:
///   x+     = A x + B u + w1
///   x_hat+ = theta A x + (1-theta) A x_hat + B u_hat + theta A w2
///   u+     = phi F (A x_hat + B u_hat) + (1-phi) u        (zero-order hold)
///   u_hat+ = F (A x_hat + B u_hat)
inline LoopState step_componentwise(const LoopState& state, const DtSls& sys,
                                    const FeedbackGain& gain,
                                    const DrawRecord& draws) {
  const double th = static_cast<double>(draws.theta);
  const double ph = static_cast<double>(draws.phi);
  const Vector propagated = sys.A * state.x_hat + sys.B * state.u_hat;
  LoopState next;
  next.x = sys.A * state.x + sys.B * state.u + draws.w1;
  next.x_hat = th * (sys.A * state.x) + (1.0 - th) * (sys.A * state.x_hat) +
               sys.B * state.u_hat + th * (sys.A * draws.w2);
  next.u = ph * (gain.F * propagated) + (1.0 - ph) * state.u;
  next.u_hat = gain.F * propagated;
  return next;
}

/// One step of the augmented form z+ = Atilde(k) z + Etilde(k) w, with the
/// realized transition built directly from the packet outcomes.
inline Vector step_augmented(const Vector& z, const AugmentedSystem& aug,
                             const DrawRecord& draws) {
  const auto [Ak, Ek] = realize_transition(aug, draws.theta, draws.phi);
  Vector w(draws.w1.size() + draws.w2.size());
  w << draws.w1, draws.w2;
  return Ak * z + Ek * w;
}

/// How trajectories are initialized.
struct InitUniformOverX0 {};
struct InitFixedPoint {
  Vector x0;
};
using InitMode = std::variant<InitUniformOverX0, InitFixedPoint>;

struct SimConfig {
  long trajectories = 10;
  long horizon = 100;
  std::uint64_t seed = 1;
  InitMode init_mode = InitUniformOverX0{};
  bool record_full = true;

  void validate() const {
    if (trajectories < 1)
      throw std::invalid_argument("SimConfig: trajectories must be >= 1");
    if (horizon < 1)
      throw std::invalid_argument("SimConfig: horizon must be >= 1");
  }
};

struct SimulationReport {
  long trajectories = 0;
  long horizon = 0;
  std::uint64_t seed = 0;
  long violations = 0;        // trajectories entering X1 within [0, T]
  long exited_state_set = 0;  // trajectories leaving X at some step
  double empirical_p = 0.0;
  double ci_upper = 0.0;  // one-sided 99% Clopper-Pearson upper bound
  std::optional<double> bound_epsilon;

  std::vector<std::uint8_t> violated_flags;  // per trajectory
  std::vector<std::uint8_t> exited_flags;

  // Min/max of each plant-state coordinate per step, across trajectories.
  std::vector<Vector> env_min;
  std::vector<Vector> env_max;

  struct Step {
    long k = 0;
    Vector x, x_hat, u, u_hat;
    int theta = -1;  // draws taken at this step; -1 on the final row
    int phi = -1;
    bool violated = false;
  };
  std::vector<std::vector<Step>> full;  // per trajectory, when record_full
};

/// Runs N seeded trajectories of the component-wise loop and aggregates
/// safety statistics. Trajectory t draws from derive_stream(seed, t), so
/// the report is independent of scheduling order.
///
/// Initialization: x(0) per init_mode; the first measurement is assumed
/// delivered, so x_hat(0) = y(0) clamped into X, u_hat(0) = F y(0) clamped
/// into U, u(0) = u_hat(0). Per-step draw order is w1, w2, theta, phi.
inline SimulationReport run_monte_carlo(
    const DtSls& sys, const FeedbackGain& gain, const NetworkParams& net,
    const SafetySpec& spec, const SimConfig& cfg,
    std::optional<double> bound_epsilon = std::nullopt) {
  cfg.validate();
  if (spec.n() != sys.n() || spec.m() != sys.m())
    throw std::invalid_argument("run_monte_carlo: spec/plant dimension mismatch");
  if (const auto* fixed = std::get_if<InitFixedPoint>(&cfg.init_mode)) {
    if (fixed->x0.size() != sys.n())
      throw std::invalid_argument("run_monte_carlo: fixed x0 has wrong dimension");
    if (!spec.X0.contains(fixed->x0))
      throw std::invalid_argument("run_monte_carlo: fixed x0 lies outside X0");
  }

  const ColoredGaussian process_noise(sys.sigma_w1);
  const ColoredGaussian measurement_noise(sys.sigma_w2);

  SimulationReport rep;
  rep.trajectories = cfg.trajectories;
  rep.horizon = cfg.horizon;
  rep.seed = cfg.seed;
  rep.bound_epsilon = bound_epsilon;
  rep.violated_flags.assign(cfg.trajectories, 0);
  rep.exited_flags.assign(cfg.trajectories, 0);
  rep.env_min.assign(cfg.horizon + 1,
                     Vector::Constant(sys.n(), std::numeric_limits<double>::infinity()));
  rep.env_max.assign(cfg.horizon + 1,
                     Vector::Constant(sys.n(), -std::numeric_limits<double>::infinity()));
  if (cfg.record_full) rep.full.resize(cfg.trajectories);

  for (long t = 0; t < cfg.trajectories; ++t) {
    SplitMix64 rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(t));
    PolarGaussian polar;

    LoopState state;
    if (std::holds_alternative<InitUniformOverX0>(cfg.init_mode))
      state.x = spec.X0.sample_uniform(rng);
    else
      state.x = std::get<InitFixedPoint>(cfg.init_mode).x0;
    const Vector y0 = state.x + measurement_noise.draw(rng, polar);
    state.x_hat = spec.X.clamp(y0);
    state.u_hat = spec.U.clamp(gain.F * y0);
    state.u = state.u_hat;

    bool violated = spec.in_unsafe(state.x);
    bool exited = !spec.X.contains(state.x);
    rep.env_min[0] = rep.env_min[0].cwiseMin(state.x);
    rep.env_max[0] = rep.env_max[0].cwiseMax(state.x);

    std::vector<SimulationReport::Step>* record =
        cfg.record_full ? &rep.full[t] : nullptr;
    if (record) {
      record->reserve(cfg.horizon + 1);
      record->push_back({0, state.x, state.x_hat, state.u, state.u_hat, -1, -1,
                         spec.in_unsafe(state.x)});
    }

    for (long k = 0; k < cfg.horizon; ++k) {
      DrawRecord draws;
      draws.w1 = process_noise.draw(rng, polar);
      draws.w2 = measurement_noise.draw(rng, polar);
      draws.theta = rng.bernoulli(net.mu_theta) ? 1 : 0;
      draws.phi = rng.bernoulli(net.mu_phi) ? 1 : 0;
      if (record) {
        record->back().theta = draws.theta;
        record->back().phi = draws.phi;
      }
      state = step_componentwise(state, sys, gain, draws);

      const bool step_unsafe = spec.in_unsafe(state.x);
      violated = violated || step_unsafe;
      exited = exited || !spec.X.contains(state.x);
      rep.env_min[k + 1] = rep.env_min[k + 1].cwiseMin(state.x);
      rep.env_max[k + 1] = rep.env_max[k + 1].cwiseMax(state.x);
      if (record)
        record->push_back({k + 1, state.x, state.x_hat, state.u, state.u_hat,
                           -1, -1, step_unsafe});
    }

    rep.violated_flags[t] = violated ? 1 : 0;
    rep.exited_flags[t] = exited ? 1 : 0;
    if (violated) ++rep.violations;
    if (exited) ++rep.exited_state_set;
  }

  rep.empirical_p =
      static_cast<double>(rep.violations) / static_cast<double>(rep.trajectories);
  rep.ci_upper = clopper_pearson_upper(rep.violations, rep.trajectories, 0.99);
  return rep;
}

/// Writes recorded trajectories as CSV, one row per (trajectory, step):
/// traj,k,x...,xhat...,u...,uhat...,theta,phi,violated. theta/phi are the
/// draws taken at that step (-1 on the final row, which has no transition).
inline void write_trajectories_csv(const SimulationReport& rep,
                                   Eigen::Index n, Eigen::Index m,
                                   std::ostream& os) {
  if (rep.full.empty())
    throw std::logic_error(
        "write_trajectories_csv: report has no recorded trajectories "
        "(record_full was false)");
  os << "traj,k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",xhat" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",u" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",uhat" << i;
  os << ",theta,phi,violated\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t t = 0; t < rep.full.size(); ++t) {
    for (const SimulationReport::Step& s : rep.full[t]) {
      os << t << ',' << s.k;
      for (Eigen::Index i = 0; i < n; ++i) put(s.x[i]);
      for (Eigen::Index i = 0; i < n; ++i) put(s.x_hat[i]);
      for (Eigen::Index i = 0; i < m; ++i) put(s.u[i]);
      for (Eigen::Index i = 0; i < m; ++i) put(s.u_hat[i]);
      os << ',' << s.theta << ',' << s.phi << ',' << (s.violated ? 1 : 0)
         << '\n';
    }
  }
}

}  // namespace netcbc
