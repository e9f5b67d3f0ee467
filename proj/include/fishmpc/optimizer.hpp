#pragma once

// Derivative-free Nelder-Mead simplex minimizer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace fishmpc {

struct NelderMeadOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;    // on both simplex spread in f and in x
  double initial_step = 0.3;  // edge length of the starting simplex
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, const std::vector<double>& x0,
                             const NelderMeadOptions& opts = {}) {
  const std::size_t dim = x0.size();
  NelderMeadResult res;
  std::vector<std::vector<double>> simplex(dim + 1, x0);
  for (std::size_t i = 0; i < dim; ++i) simplex[i + 1][i] += opts.initial_step;
  std::vector<double> values(dim + 1);
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    return f(x);
  };
  for (std::size_t i = 0; i <= dim; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), trial(dim), trial2(dim);
  auto point_along = [&](double t, std::vector<double>& out) {
    // centroid + t (centroid - worst)
    const auto& worst = simplex[order[dim]];
    for (std::size_t k = 0; k < dim; ++k) out[k] = centroid[k] + t * (centroid[k] - worst[k]);
  };

  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const auto& best = simplex[order[0]];
    double f_spread = 0.0, x_spread = 0.0;
    for (std::size_t i = 1; i <= dim; ++i) {
      f_spread = std::max(f_spread, std::abs(values[order[i]] - values[order[0]]));
      for (std::size_t k = 0; k < dim; ++k)
        x_spread = std::max(x_spread, std::abs(simplex[order[i]][k] - best[k]));
    }
    if (f_spread <= opts.tolerance && x_spread <= opts.tolerance) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[order[i]][k] / static_cast<double>(dim);

    const double f_best = values[order[0]];
    const double f_second_worst = values[order[dim - (dim > 0 ? 1 : 0)]];
    const double f_worst = values[order[dim]];

    point_along(1.0, trial);
    const double f_reflect = eval(trial);
    if (f_reflect < f_best) {
      point_along(2.0, trial2);
      const double f_expand = eval(trial2);
      if (f_expand < f_reflect) {
        simplex[order[dim]] = trial2;
        values[order[dim]] = f_expand;
      } else {
        simplex[order[dim]] = trial;
        values[order[dim]] = f_reflect;
      }
      continue;
    }
    if (f_reflect < f_second_worst) {
      simplex[order[dim]] = trial;
      values[order[dim]] = f_reflect;
      continue;
    }
    const bool outside = f_reflect < f_worst;
    point_along(outside ? 0.5 : -0.5, trial2);
    const double f_contract = eval(trial2);
    if (f_contract < (outside ? f_reflect : f_worst)) {
      simplex[order[dim]] = trial2;
      values[order[dim]] = f_contract;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t i = 1; i <= dim; ++i) {
      auto& v = simplex[order[i]];
      for (std::size_t k = 0; k < dim; ++k) v[k] = best[k] + 0.5 * (v[k] - best[k]);
      values[order[i]] = eval(v);
    }
  }

  const auto it = std::min_element(values.begin(), values.end());
  res.value = *it;
  res.x = simplex[static_cast<std::size_t>(it - values.begin())];
  return res;
}

}  // namespace fishmpc
