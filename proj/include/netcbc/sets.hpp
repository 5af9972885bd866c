#pragma once

// Axis-aligned boxes and the safety specification (initial set, unsafe set
// as a box union, state/input boxes, horizon).

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "netcbc/rng.hpp"

namespace netcbc {

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size())
      throw std::invalid_argument("Box: bound dimensions differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]))
        throw std::invalid_argument("Box: lower > upper at coordinate " +
                                    std::to_string(i));
  }

  /// Interval box [-h, h]^d.
  static Box centered(Eigen::Index d, double h) {
    return Box(Eigen::VectorXd::Constant(d, -h),
               Eigen::VectorXd::Constant(d, h));
  }

  Eigen::Index dim() const { return lower.size(); }

  bool is_bounded() const {
    return lower.allFinite() && upper.allFinite();
  }

  bool contains(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) return false;
    return (x.array() >= lower.array()).all() &&
           (x.array() <= upper.array()).all();
  }

  bool contains_box(const Box& other) const {
    return (other.lower.array() >= lower.array()).all() &&
           (other.upper.array() <= upper.array()).all();
  }

  bool intersects(const Box& other) const {
    return (lower.array() <= other.upper.array()).all() &&
           (other.lower.array() <= upper.array()).all();
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }

  Eigen::VectorXd sample_uniform(SplitMix64& rng) const {
    Eigen::VectorXd x(dim());
    for (Eigen::Index i = 0; i < dim(); ++i)
      x[i] = rng.uniform(lower[i], upper[i]);
    return x;
  }

  /// Cartesian product [this x other].
  Box product(const Box& other) const {
    Eigen::VectorXd lo(dim() + other.dim()), hi(dim() + other.dim());
    lo << lower, other.lower;
    hi << upper, other.upper;
    return Box(std::move(lo), std::move(hi));
  }
};

/// Safety specification: stay inside X and never reach the unsafe union X1
/// within the first T steps, starting from X0. U bounds the inputs the
/// certificate conditions quantify over.
struct SafetySpec {
  Box X;
  Box X0;
  std::vector<Box> X1;
  Box U;
  long T = 0;

  SafetySpec() = default;
  SafetySpec(Box state_set, Box initial_set, std::vector<Box> unsafe_sets,
             Box input_set, long horizon)
      : X(std::move(state_set)),
        X0(std::move(initial_set)),
        X1(std::move(unsafe_sets)),
        U(std::move(input_set)),
        T(horizon) {
    if (T < 0) throw std::invalid_argument("SafetySpec: horizon must be >= 0");
    if (X0.dim() != X.dim())
      throw std::invalid_argument("SafetySpec: X0 dimension differs from X");
    if (!X.contains_box(X0))
      throw std::invalid_argument("SafetySpec: X0 must be contained in X");
    for (std::size_t j = 0; j < X1.size(); ++j) {
      if (X1[j].dim() != X.dim())
        throw std::invalid_argument("SafetySpec: X1 box " + std::to_string(j) +
                                    " dimension differs from X");
      if (!X1[j].intersects(X))
        throw std::invalid_argument("SafetySpec: X1 box " + std::to_string(j) +
                                    " does not intersect X");
      if (X0.intersects(X1[j]))
        throw std::invalid_argument("SafetySpec: X0 overlaps X1 box " +
                                    std::to_string(j));
    }
  }

  Eigen::Index n() const { return X.dim(); }
  Eigen::Index m() const { return U.dim(); }

  bool in_unsafe(const Eigen::VectorXd& x) const {
    for (const Box& b : X1)
      if (b.contains(x)) return true;
    return false;
  }

  /// Quantification domain of the initial-level condition:
  /// X0 x X x U x U over z = [x; x_hat; u; u_hat].
  Box initial_domain() const { return X0.product(X).product(U).product(U); }

  /// Quantification domain of the drift condition: X x X x U x U.
  Box state_domain() const { return X.product(X).product(U).product(U); }

  /// One domain per unsafe box: X1_j x X x U x U.
  std::vector<Box> unsafe_domains() const {
    std::vector<Box> out;
    out.reserve(X1.size());
    for (const Box& b : X1) out.push_back(b.product(X).product(U).product(U));
    return out;
  }
};

}  // namespace netcbc
