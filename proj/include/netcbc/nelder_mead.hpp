#pragma once

// Small derivative-free minimizers used by the gain search: Nelder-Mead
// simplex and an adaptive coordinate search. Both are deterministic given
// the start point and objective.

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace netcbc {

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  long evals = 0;
};

/// Nelder-Mead with standard coefficients (reflect 1, expand 2,
/// contract 0.5, shrink 0.5). Stops on eval budget or simplex collapse.
inline MinimizeResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, long max_evals, double init_step = 0.5) {
  const Eigen::Index d = x0.size();
  MinimizeResult out;
  long evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  std::vector<Eigen::VectorXd> pts(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (Eigen::Index i = 0; i < d; ++i) pts[i + 1][i] += init_step;
  for (Eigen::Index i = 0; i <= d; ++i) {
    if (evals >= max_evals) break;
    fv[i] = eval(pts[i]);
  }

  std::vector<int> order(d + 1);
  std::iota(order.begin(), order.end(), 0);
  auto sort_simplex = [&] {
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fv[a] < fv[b]; });
  };

  while (evals + 2 <= max_evals) {
    sort_simplex();
    const int best = order[0], worst = order[d];
    const int second_worst = order[d - 1];

    const double spread = fv[worst] - fv[best];
    double diam = 0.0;
    for (Eigen::Index i = 1; i <= d; ++i)
      diam = std::max(diam, (pts[order[i]] - pts[best]).norm());
    if (spread <= 1e-14 * (1.0 + std::fabs(fv[best])) && diam <= 1e-12) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second_worst]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      const Eigen::VectorXd xc =
          centroid + 0.5 * (pts[worst] - centroid);
      const double fc = eval(xc);
      if (fc < fv[worst]) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        // Shrink toward the best vertex.
        for (Eigen::Index i = 1; i <= d; ++i) {
          if (evals >= max_evals) break;
          const int idx = order[i];
          pts[idx] = pts[best] + 0.5 * (pts[idx] - pts[best]);
          fv[idx] = eval(pts[idx]);
        }
      }
    }
  }

  sort_simplex();
  out.x = pts[order[0]];
  out.value = fv[order[0]];
  out.evals = evals;
  return out;
}

/// Cyclic coordinate descent with per-coordinate step adaptation.
inline MinimizeResult coordinate_search(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, long max_evals, double init_step = 0.5) {
  const Eigen::Index d = x0.size();
  MinimizeResult out;
  Eigen::VectorXd x = x0;
  long evals = 0;
  double fx = f(x);
  ++evals;
  Eigen::VectorXd h = Eigen::VectorXd::Constant(d, init_step);

  while (evals < max_evals && h.maxCoeff() > 1e-11) {
    bool improved = false;
    for (Eigen::Index i = 0; i < d && evals < max_evals; ++i) {
      bool moved = false;
      for (const double dir : {1.0, -1.0}) {
        if (evals >= max_evals) break;
        Eigen::VectorXd y = x;
        y[i] += dir * h[i];
        const double fy = f(y);
        ++evals;
        if (fy < fx) {
          x = y;
          fx = fy;
          moved = true;
          improved = true;
          break;
        }
      }
      if (!moved) h[i] *= 0.5;
      else h[i] *= 1.2;
    }
    if (!improved && h.maxCoeff() <= 1e-11) break;
  }

  out.x = x;
  out.value = fx;
  out.evals = evals;
  return out;
}

}  // namespace netcbc
