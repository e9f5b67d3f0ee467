#pragma once

// Zone-based fish school dynamics with an optional external stimulus.
//
// Each fish sees the others inside a cone of half-angle psi around its
// heading, split by distance into repulsion (0, r_r], orientation
// (r_r, r_o] and attraction (r_o, r_a] bands. Per step, every fish turns
// toward its desired direction by at most tau*theta, optionally followed by
// a random rotation, and moves by tau*v along its pre-step heading.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "fishmpc/error.hpp"
#include "fishmpc/vec3.hpp"

namespace fishmpc {

struct ModelParams {
  double speed = 50.0;                                   // v
  double step_length = 0.1;                              // tau
  double turning_rate = 0.69;                            // theta, rad per unit time
  double half_view_angle = 3.0 * std::numbers::pi / 4;  // psi
  double attraction_gain = 1.0;                          // eta
  std::vector<double> sensitivity;                       // xi_i, one per fish
  double r_repulsion = 50.0;
  double r_orientation = 750.0;
  double r_attraction = 1000.0;
  double noise_scale = 0.0;
  double noise_baseline = 0.35;  // sigma_0, rad per sqrt(unit time)

  /// Homogeneous school of `n` fish sharing one sensitivity.
  static ModelParams homogeneous(std::size_t n, double xi) {
    ModelParams p;
    p.sensitivity.assign(n, xi);
    return p;
  }

  [[nodiscard]] std::size_t fish_count() const { return sensitivity.size(); }
  [[nodiscard]] double max_turn() const { return step_length * turning_rate; }
  [[nodiscard]] double stride() const { return step_length * speed; }

  void validate() const {
    if (sensitivity.empty()) throw InvalidArgument("ModelParams: no fish");
    if (!(0.0 < r_repulsion && r_repulsion < r_orientation && r_orientation < r_attraction))
      throw InvalidArgument("ModelParams: need 0 < r_r < r_o < r_a");
    if (!(0.0 < half_view_angle && half_view_angle < std::numbers::pi))
      throw InvalidArgument("ModelParams: need 0 < psi < pi");
    if (!(speed > 0.0 && step_length > 0.0 && turning_rate > 0.0 && attraction_gain > 0.0))
      throw InvalidArgument("ModelParams: v, tau, theta, eta must be positive");
    for (double xi : sensitivity)
      if (!(xi >= 0.0)) throw InvalidArgument("ModelParams: sensitivities must be nonnegative");
    if (!(noise_scale >= 0.0) || !(noise_baseline >= 0.0))
      throw InvalidArgument("ModelParams: noise parameters must be nonnegative");
  }
};

struct SchoolState {
  long k = 0;
  std::vector<Vec3> x;
  std::vector<UnitVec3> V;

  [[nodiscard]] std::size_t size() const { return x.size(); }

  void validate(std::size_t expected_fish) const {
    if (x.size() != V.size()) throw DimensionMismatch(x.size(), V.size());
    if (x.size() != expected_fish) throw DimensionMismatch(expected_fish, x.size());
    for (const auto& p : x)
      if (!p.is_finite()) throw InvalidArgument("SchoolState: non-finite position");
  }
};

struct NeighborSets {
  std::vector<std::vector<std::size_t>> repulsion;
  std::vector<std::vector<std::size_t>> orientation;
  std::vector<std::vector<std::size_t>> attraction;

  [[nodiscard]] std::size_t size() const { return orientation.size(); }
  [[nodiscard]] std::size_t orientation_degree(std::size_t i) const { return orientation[i].size(); }
};

struct Forces {
  std::vector<Vec3> repulsion;    // E_i
  std::vector<Vec3> orientation;  // O_i
  std::vector<Vec3> attraction;   // A_i
  std::vector<Vec3> desired;      // D_i
};

/// Random-rotation stream: axis chi uniform on the sphere, angle
/// eps = noise_scale * sigma_0 * sqrt(tau) * |z| with z standard normal.
class AngularNoise {
 public:
  AngularNoise(std::uint64_t seed, const ModelParams& params)
      : engine_(seed),
        angle_scale_(params.noise_scale * params.noise_baseline * std::sqrt(params.step_length)) {}

  std::pair<UnitVec3, double> draw() {
    Vec3 axis;
    do {
      axis = {gauss_(engine_), gauss_(engine_), gauss_(engine_)};
    } while (is_zero(axis));
    const double angle = angle_scale_ * std::abs(gauss_(engine_));
    return {normalize(axis), angle};
  }

  [[nodiscard]] double angle_scale() const { return angle_scale_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  double angle_scale_;
};

inline NeighborSets classify_neighbors(const SchoolState& state, const ModelParams& params) {
  const std::size_t n = state.size();
  NeighborSets sets;
  sets.repulsion.resize(n);
  sets.orientation.resize(n);
  sets.attraction.resize(n);

  const double rr2 = params.r_repulsion * params.r_repulsion;
  const double ro2 = params.r_orientation * params.r_orientation;
  const double ra2 = params.r_attraction * params.r_attraction;
  const double cos_view = std::cos(params.half_view_angle);

  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& xi = state.x[i];
    const Vec3& vi = state.V[i].vec();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec3 d = state.x[j] - xi;
      const double d2 = squared_norm(d);
      if (d2 > ra2) continue;
      if (d2 == 0.0) throw CoincidentFish(std::min(i, j), std::max(i, j));
      // angle(V_i, d) <= psi  <=>  cos(angle) >= cos(psi), |V_i| = 1
      if (dot(vi, d) < cos_view * std::sqrt(d2)) continue;
      if (d2 <= rr2)
        sets.repulsion[i].push_back(j);
      else if (d2 <= ro2)
        sets.orientation[i].push_back(j);
      else
        sets.attraction[i].push_back(j);
    }
  }
  return sets;
}

namespace detail {

inline void check_stimulus(std::span<const Vec3> u, std::size_t n) {
  if (u.size() != n) throw DimensionMismatch(n, u.size());
  for (const auto& ui : u) {
    const double m = norm(ui);
    if (m > kZeroNorm && std::abs(m - 1.0) > 1e-9)
      throw InvalidArgument("stimulus vectors must be unit-norm or zero");
  }
}

}  // namespace detail

/// Attraction force A_i of a single fish.
inline Vec3 attraction_force(const SchoolState& state, const NeighborSets& sets, std::size_t i) {
  Vec3 a;
  for (std::size_t j : sets.attraction[i]) a += normalize(state.x[j] - state.x[i]).vec();
  return a;
}

inline Vec3 orientation_force(const SchoolState& state, const NeighborSets& sets, std::size_t i) {
  Vec3 o;
  for (std::size_t j : sets.orientation[i]) o += state.V[j].vec();
  return o;
}

inline Forces compute_forces(const SchoolState& state, const NeighborSets& sets,
                             const ModelParams& params, std::span<const Vec3> u) {
  const std::size_t n = state.size();
  detail::check_stimulus(u, n);
  Forces f;
  f.repulsion.resize(n);
  f.orientation.resize(n);
  f.attraction.resize(n);
  f.desired.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 e;
    for (std::size_t j : sets.repulsion[i]) e -= normalize(state.x[j] - state.x[i]).vec();
    f.repulsion[i] = e;
    f.orientation[i] = orientation_force(state, sets, i);
    f.attraction[i] = attraction_force(state, sets, i);

    const Vec3 stimulus = params.sensitivity[i] * u[i];
    if (!sets.repulsion[i].empty()) {
      f.desired[i] = e;
    } else if (!sets.orientation[i].empty() || !sets.attraction[i].empty() || !is_zero(stimulus)) {
      f.desired[i] = f.orientation[i] + params.attraction_gain * f.attraction[i] + stimulus;
    } else {
      f.desired[i] = state.V[i].vec();
    }
  }
  return f;
}

/// Capped turn R_{D_i, phi_i} V_i with phi_i = min(angle(V_i, D_i), tau*theta).
inline UnitVec3 capped_turn(const UnitVec3& heading, const Vec3& desired, double max_turn) {
  const double turn = std::min(angle_between(heading.vec(), desired), max_turn);
  return rotate_toward(heading, desired, turn);
}

/// Advances the school one step. Without `noise` the random rotation is the
/// identity. Forces, headings and positions are all computed from step k.
inline SchoolState step(const SchoolState& state, const ModelParams& params,
                        std::span<const Vec3> u, AngularNoise* noise = nullptr) {
  const NeighborSets sets = classify_neighbors(state, params);
  const Forces f = compute_forces(state, sets, params, u);
  const std::size_t n = state.size();
  const double max_turn = params.max_turn();
  const double stride = params.stride();

  SchoolState next;
  next.k = state.k + 1;
  next.x.resize(n);
  next.V.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    UnitVec3 heading = capped_turn(state.V[i], f.desired[i], max_turn);
    if (noise != nullptr) {
      const auto [axis, angle] = noise->draw();
      heading = rotate_toward(heading, axis.vec(), angle);
    }
    next.V.push_back(heading);
    next.x[i] = state.x[i] + stride * state.V[i].vec();
  }
  return next;
}

/// Same stimulus vector for every fish.
inline SchoolState step(const SchoolState& state, const ModelParams& params, const Vec3& broadcast,
                        AngularNoise* noise = nullptr) {
  const std::vector<Vec3> u(state.size(), broadcast);
  return step(state, params, u, noise);
}

inline Vec3 mass_center(const SchoolState& state) {
  if (state.size() == 0) throw InvalidArgument("mass_center: empty school");
  Vec3 c;
  for (const auto& p : state.x) c += p;
  return c / static_cast<double>(state.size());
}

inline Vec3 mean_direction(const SchoolState& state) {
  if (state.size() == 0) throw InvalidArgument("mean_direction: empty school");
  Vec3 s;
  for (const auto& d : state.V) s += d.vec();
  return s / static_cast<double>(state.size());
}

/// Norm of the mean heading; 1 for a perfectly aligned school.
inline double polarization(const SchoolState& state) { return norm(mean_direction(state)); }

}  // namespace fishmpc
