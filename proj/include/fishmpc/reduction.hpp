#pragma once

// Reduced-order predictors of the school's mass center and the analytic
// error bounds of the one-step direction approximation
//
//   <phi(D)>_alpha  ~  |<V>_alpha| phi(<V>_alpha + A + u),
//   A = sum_i alpha_i/n_i eta A_i,   u = sum_i alpha_i/n_i xi_i u_i.
//
// With alpha = 1/N this is the static-weight predictor; with alpha equal to
// the orientation-graph centrality it is the dynamic-weight predictor.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fishmpc/error.hpp"
#include "fishmpc/network.hpp"
#include "fishmpc/school.hpp"
#include "fishmpc/vec3.hpp"

namespace fishmpc {

/// Estimated mass center and aggregate direction. `direction` is not unit:
/// its norm is fixed at the polarization of the observation it came from.
struct ReducedState {
  Vec3 center;
  Vec3 direction;
};

inline ReducedState init_reduced(const SchoolState& state) {
  return {mass_center(state), mean_direction(state)};
}

enum class IsolatedFishPolicy {
  reject,  // throw ZeroOrientationDegree
  skip,    // drop fish with n_i = 0 from the aggregate sums
};

/// Quantities captured once at an observation instant and held fixed over
/// the prediction horizon. Only the stimulus varies along a rollout.
struct FrozenAggregates {
  std::vector<double> weights;
  std::vector<std::size_t> degrees;     // n_i
  std::vector<Vec3> attraction_forces;  // A_i
  Vec3 attraction;                      // sum alpha_i/n_i eta A_i
  std::vector<double> stimulus_coefficients;  // alpha_i xi_i / n_i
  double stimulus_gain = 0.0;                 // sum of the coefficients
  double stride = 0.0;                        // tau v
  std::vector<std::size_t> skipped;           // isolated fish left out

  [[nodiscard]] Vec3 aggregate_stimulus(std::span<const Vec3> u) const {
    if (u.size() != stimulus_coefficients.size())
      throw DimensionMismatch(stimulus_coefficients.size(), u.size());
    Vec3 s;
    for (std::size_t i = 0; i < u.size(); ++i) s += stimulus_coefficients[i] * u[i];
    return s;
  }
};

inline FrozenAggregates freeze_aggregates(const SchoolState& state, const NeighborSets& sets,
                                          const ModelParams& params, const WeightVector& weights,
                                          IsolatedFishPolicy policy = IsolatedFishPolicy::reject) {
  const std::size_t n = state.size();
  if (weights.size() != n) throw DimensionMismatch(n, weights.size());
  FrozenAggregates agg;
  agg.weights.assign(weights.values().begin(), weights.values().end());
  agg.degrees.resize(n);
  agg.attraction_forces.resize(n);
  agg.stimulus_coefficients.assign(n, 0.0);
  agg.stride = params.stride();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ni = sets.orientation_degree(i);
    agg.degrees[i] = ni;
    agg.attraction_forces[i] = attraction_force(state, sets, i);
    if (ni == 0) {
      if (policy == IsolatedFishPolicy::reject) throw ZeroOrientationDegree(i);
      agg.skipped.push_back(i);
      continue;
    }
    const double share = weights[i] / static_cast<double>(ni);
    agg.attraction += (share * params.attraction_gain) * agg.attraction_forces[i];
    agg.stimulus_coefficients[i] = share * params.sensitivity[i];
    agg.stimulus_gain += agg.stimulus_coefficients[i];
  }
  return agg;
}

struct PredictionEvents {
  std::size_t degenerate_holds = 0;
};

namespace detail {

inline ReducedState advance_reduced(const ReducedState& r, const Vec3& argument,
                                    PredictionEvents* events) {
  ReducedState next = r;
  if (is_zero(argument)) {
    if (events != nullptr) ++events->degenerate_holds;
  } else {
    next.direction = norm(r.direction) * normalize(argument).vec();
  }
  return next;
}

}  // namespace detail

/// One reduced step: c += tau v V^, V^ <- |V^| phi(V^ + A + u_agg).
/// A degenerate phi argument holds V^ for the step and counts an event.
inline ReducedState predict_step(const ReducedState& r, const FrozenAggregates& agg,
                                 std::span<const Vec3> u, PredictionEvents* events = nullptr) {
  ReducedState next =
      detail::advance_reduced(r, r.direction + agg.attraction + agg.aggregate_stimulus(u), events);
  next.center = r.center + agg.stride * r.direction;
  return next;
}

/// Broadcast stimulus: every fish receives `u`.
inline ReducedState predict_step(const ReducedState& r, const FrozenAggregates& agg, const Vec3& u,
                                 PredictionEvents* events = nullptr) {
  ReducedState next =
      detail::advance_reduced(r, r.direction + agg.attraction + agg.stimulus_gain * u, events);
  next.center = r.center + agg.stride * r.direction;
  return next;
}

/// As predict_step, but throws ZeroArgument instead of holding.
inline ReducedState predict_step_strict(const ReducedState& r, const FrozenAggregates& agg,
                                        std::span<const Vec3> u) {
  PredictionEvents ev;
  ReducedState next = predict_step(r, agg, u, &ev);
  if (ev.degenerate_holds > 0) throw ZeroArgument();
  return next;
}

// ---------------------------------------------------------------------------
// Bound verification.

/// Pairwise heading angles theta_jj'.
class AngleMatrix {
 public:
  explicit AngleMatrix(const SchoolState& state) : n_(state.size()), theta_sq_(n_ * n_, 0.0) {
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t k = j + 1; k < n_; ++k) {
        const double t = angle_between(state.V[j].vec(), state.V[k].vec());
        theta_sq_[j * n_ + k] = theta_sq_[k * n_ + j] = t * t;
      }
  }
  [[nodiscard]] double squared(std::size_t j, std::size_t k) const { return theta_sq_[j * n_ + k]; }
  [[nodiscard]] std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> theta_sq_;
};

/// Q_{i,y} = 1/n_i^2 sum_j sum_j' |w_ij - y_j| |w_ij' - y_j'| theta_jj'^2 / 2,
/// w_ij the orientation-membership indicator.
inline double quadratic_angle_form(const AngleMatrix& angles, const NeighborSets& sets,
                                   std::size_t i, std::span<const double> y) {
  const std::size_t n = angles.size();
  if (y.size() != n) throw DimensionMismatch(n, y.size());
  const std::size_t ni = sets.orientation_degree(i);
  if (ni == 0) throw AssumptionViolated("n_i > 0");
  std::vector<double> c(y.begin(), y.end());
  for (auto& v : c) v = -v;
  for (std::size_t j : sets.orientation[i]) c[j] += 1.0;
  double q = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double cj = std::abs(c[j]);
    if (cj == 0.0) continue;
    double row = 0.0;
    for (std::size_t k = 0; k < n; ++k) row += std::abs(c[k]) * angles.squared(j, k);
    q += cj * row;
  }
  return q / (2.0 * static_cast<double>(ni) * static_cast<double>(ni));
}

inline double quadratic_angle_form(const SchoolState& state, const NeighborSets& sets,
                                   std::size_t i, std::span<const double> y) {
  return quadratic_angle_form(AngleMatrix(state), sets, i, y);
}

struct FishDiagnostics {
  std::size_t degree = 0;      // n_i
  Vec3 orientation;            // O_i
  Vec3 attraction;             // A_i
  Vec3 drive;                  // w_i = eta A_i + xi_i u_i
  double polarization = 0.0;   // pi_i = |O_i| / n_i
  double misalignment = 0.0;   // 1 - pi_i
  double dominance = 0.0;      // rho_i = |w_i| / |O_i|
  double quadratic = 0.0;      // Q_{i, n_i alpha}
};

struct DiagnosticReport {
  std::vector<FishDiagnostics> fish;
  Vec3 weighted_direction;          // <V>_alpha
  double school_misalignment = 0;   // 1 - |<V>_alpha|
  Vec3 aggregate_attraction;        // A
  Vec3 aggregate_stimulus;          // u
  Vec3 residual;                    // epsilon_alpha
  double theorem1_bound = 0.0;
  /// Centrality-weight bound evaluated at the same alpha; a valid bound
  /// only when alpha is the centrality of the orientation graph.
  double theorem2_bound = 0.0;
};

namespace detail {

inline void require(bool ok, const char* condition) {
  if (!ok) throw AssumptionViolated(condition);
}

// Per-fish terms plus aggregates; requires n_i > 0 and O_i != 0 for every
// fish, and <V>_alpha != 0.
inline DiagnosticReport evaluate_terms(const SchoolState& state, const NeighborSets& sets,
                                       const ModelParams& params, std::span<const Vec3> u,
                                       const WeightVector& alpha) {
  const std::size_t n = state.size();
  if (alpha.size() != n) throw DimensionMismatch(n, alpha.size());
  check_stimulus(u, n);

  DiagnosticReport rep;
  rep.fish.resize(n);
  rep.weighted_direction = weighted_sum(std::span<const UnitVec3>(state.V), alpha);
  require(!is_zero(rep.weighted_direction), "<V>_alpha != 0");
  rep.school_misalignment = 1.0 - norm(rep.weighted_direction);

  const AngleMatrix angles(state);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    FishDiagnostics& f = rep.fish[i];
    f.degree = sets.orientation_degree(i);
    require(f.degree > 0, "n_i > 0");
    f.orientation = orientation_force(state, sets, i);
    require(!is_zero(f.orientation), "O_i != 0");
    f.attraction = attraction_force(state, sets, i);
    f.drive = params.attraction_gain * f.attraction + params.sensitivity[i] * u[i];
    const double ni = static_cast<double>(f.degree);
    f.polarization = norm(f.orientation) / ni;
    f.misalignment = 1.0 - f.polarization;
    f.dominance = norm(f.drive) / norm(f.orientation);
    for (std::size_t j = 0; j < n; ++j) y[j] = ni * alpha[j];
    f.quadratic = quadratic_angle_form(angles, sets, i, y);

    rep.aggregate_attraction += (alpha[i] / ni * params.attraction_gain) * f.attraction;
    rep.aggregate_stimulus += (alpha[i] / ni * params.sensitivity[i]) * u[i];
  }

  const Vec3 w = rep.aggregate_attraction + rep.aggregate_stimulus;
  const double vbar = norm(rep.weighted_direction);
  double common = 2.0 * squared_norm(w) / vbar;
  double static_part = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const FishDiagnostics& f = rep.fish[i];
    const double sq = std::sqrt(f.quadratic);
    static_part += alpha[i] * sq;
    common += alpha[i] * f.misalignment;
    common += 2.0 * alpha[i] * f.dominance *
              (rep.school_misalignment + f.dominance + 2.0 * f.misalignment + sq);
  }
  rep.theorem1_bound = common + static_part;
  rep.theorem2_bound = common;
  return rep;
}

inline void require_no_repulsion(const NeighborSets& sets) {
  for (const auto& r : sets.repulsion) require(r.empty(), "N_r,i empty");
}

}  // namespace detail

namespace detail {

inline Vec3 residual_from(const DiagnosticReport& rep, const SchoolState& state, const NeighborSets& sets,
                          const ModelParams& params, std::span<const Vec3> u, const WeightVector& alpha) {
  const Forces forces = compute_forces(state, sets, params, u);
  Vec3 lhs;
  for (std::size_t i = 0; i < state.size(); ++i) {
    require(!is_zero(forces.desired[i]), "D_i != 0");
    lhs += alpha[i] * normalize(forces.desired[i]).vec();
  }
  const Vec3 arg = rep.weighted_direction + rep.aggregate_attraction + rep.aggregate_stimulus;
  require(!is_zero(arg), "<V>_alpha + A + u != 0");
  return lhs - norm(rep.weighted_direction) * normalize(arg).vec();
}

}  // namespace detail

/// epsilon_alpha = <phi(D)>_alpha - |<V>_alpha| phi(<V>_alpha + A + u).
inline Vec3 residual_epsilon_alpha(const SchoolState& state, const NeighborSets& sets,
                                   const ModelParams& params, std::span<const Vec3> u,
                                   const WeightVector& alpha) {
  detail::require_no_repulsion(sets);
  const DiagnosticReport rep = detail::evaluate_terms(state, sets, params, u, alpha);
  return detail::residual_from(rep, state, sets, params, u, alpha);
}

/// Full diagnostic set, including the residual and both bounds.
inline DiagnosticReport diagnostics(const SchoolState& state, const NeighborSets& sets,
                                    const ModelParams& params, std::span<const Vec3> u,
                                    const WeightVector& alpha) {
  detail::require_no_repulsion(sets);
  DiagnosticReport rep = detail::evaluate_terms(state, sets, params, u, alpha);
  rep.residual = detail::residual_from(rep, state, sets, params, u, alpha);
  return rep;
}

/// Static-weight bound: 2|A+u|^2/|<V>| + sum alpha_i (pi~_i + sqrt Q_i)
///   + 2 sum alpha_i rho_i (pi~_alpha + rho_i + 2 pi~_i + sqrt Q_i).
inline double theorem1_bound(const SchoolState& state, const NeighborSets& sets,
                             const ModelParams& params, std::span<const Vec3> u,
                             const WeightVector& alpha) {
  detail::require_no_repulsion(sets);
  return detail::evaluate_terms(state, sets, params, u, alpha).theorem1_bound;
}

/// Centrality-weight bound: the static bound without the outer sqrt Q sum.
/// `beta` must be the centrality of the orientation graph of `sets`.
inline double theorem2_bound(const SchoolState& state, const NeighborSets& sets,
                             const ModelParams& params, std::span<const Vec3> u,
                             const CentralityVector& beta) {
  detail::require_no_repulsion(sets);
  const OrientationGraph g = build_graph(sets);
  if (beta.size() != g.size()) throw DimensionMismatch(g.size(), beta.size());
  detail::require(centrality_residual(g, beta.values()) <= 1e-9,
                  "alpha is the orientation-graph centrality");
  return detail::evaluate_terms(state, sets, params, u, beta.as_weights()).theorem2_bound;
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  [[nodiscard]] bool holds(double slack) const { return lhs <= rhs + slack; }
};

/// |O_i - n_i <V>_alpha|  vs  n_i sqrt(Q_{i, n_i alpha}).
inline BoundCheck lemma_a2_check(const SchoolState& state, const NeighborSets& sets,
                                 const WeightVector& alpha, std::size_t i, const AngleMatrix& angles) {
  const std::size_t n = state.size();
  if (alpha.size() != n) throw DimensionMismatch(n, alpha.size());
  const double ni = static_cast<double>(sets.orientation_degree(i));
  detail::require(ni > 0, "n_i > 0");
  const Vec3 vbar = weighted_sum(std::span<const UnitVec3>(state.V), alpha);
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) y[j] = ni * alpha[j];
  const double q = quadratic_angle_form(angles, sets, i, y);
  return {norm(orientation_force(state, sets, i) - ni * vbar), ni * std::sqrt(q)};
}

inline BoundCheck lemma_a2_check(const SchoolState& state, const NeighborSets& sets,
                                 const WeightVector& alpha, std::size_t i) {
  return lemma_a2_check(state, sets, alpha, i, AngleMatrix(state));
}

/// |zeta_i| with zeta_i = phi(D_i) - (<V> + w_i/n_i - (w_i.<V>)/(n_i |<V>|^2) <V>)
/// vs 2 pi~_alpha rho_i + 2 rho_i^2 + pi~_i (1 + 4 rho_i) + (1 + 2 rho_i) sqrt Q_i.
inline BoundCheck prop_a3_check(const SchoolState& state, const NeighborSets& sets,
                                const ModelParams& params, std::span<const Vec3> u,
                                const WeightVector& alpha, std::size_t i, const AngleMatrix& angles) {
  const std::size_t n = state.size();
  if (alpha.size() != n) throw DimensionMismatch(n, alpha.size());
  detail::check_stimulus(u, n);
  detail::require(sets.repulsion[i].empty(), "N_r,i empty");
  const std::size_t deg = sets.orientation_degree(i);
  detail::require(deg > 0, "n_i > 0");
  const double ni = static_cast<double>(deg);
  const Vec3 o = orientation_force(state, sets, i);
  detail::require(!is_zero(o), "O_i != 0");
  const Vec3 vbar = weighted_sum(std::span<const UnitVec3>(state.V), alpha);
  detail::require(!is_zero(vbar), "<V>_alpha != 0");
  const Vec3 w = params.attraction_gain * attraction_force(state, sets, i) + params.sensitivity[i] * u[i];
  const Vec3 d = o + w;
  detail::require(!is_zero(d), "D_i != 0");

  const Vec3 zeta = normalize(d).vec() -
                    (vbar + w / ni - (dot(w, vbar) / (ni * squared_norm(vbar))) * vbar);

  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) y[j] = ni * alpha[j];
  const double sq = std::sqrt(quadratic_angle_form(angles, sets, i, y));
  const double rho = norm(w) / norm(o);
  const double mis = 1.0 - norm(o) / ni;
  const double mis_alpha = 1.0 - norm(vbar);
  const double rhs =
      2.0 * mis_alpha * rho + 2.0 * rho * rho + mis * (1.0 + 4.0 * rho) + (1.0 + 2.0 * rho) * sq;
  return {norm(zeta), rhs};
}

inline BoundCheck prop_a3_check(const SchoolState& state, const NeighborSets& sets,
                                const ModelParams& params, std::span<const Vec3> u,
                                const WeightVector& alpha, std::size_t i) {
  return prop_a3_check(state, sets, params, u, alpha, i, AngleMatrix(state));
}

}  // namespace fishmpc
