#pragma once

// Seeded samplers: sphere, ball, von Mises-Fisher directions, and random
// school configurations that satisfy the reduction-bound preconditions.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "fishmpc/network.hpp"
#include "fishmpc/school.hpp"
#include "fishmpc/vec3.hpp"

namespace fishmpc {

/// splitmix64 finalizer; derives independent stream seeds from (base, index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline UnitVec3 uniform_on_sphere(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Vec3 v{g(rng), g(rng), g(rng)};
    if (!is_zero(v)) return normalize(v);
  }
}

inline Vec3 uniform_in_ball(Rng& rng, double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::cbrt(u(rng));
  return r * uniform_on_sphere(rng).vec();
}

/// Von Mises-Fisher direction on S^2 with mean `mean` and concentration
/// `kappa` (Wood's exact inversion for three dimensions).
inline UnitVec3 von_mises_fisher(Rng& rng, const UnitVec3& mean, double kappa) {
  if (kappa <= 0.0) return uniform_on_sphere(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double xi = u(rng);
  // w = 1 + log(xi + (1 - xi) e^{-2 kappa}) / kappa, written to avoid overflow.
  const double w = 1.0 + std::log(xi + (1.0 - xi) * std::exp(-2.0 * kappa)) / kappa;
  const double phi = 2.0 * std::numbers::pi * u(rng);
  const Vec3& m = mean.vec();
  const Vec3 e1 = detail::fallback_tangent(m);
  const Vec3 e2 = cross(m, e1);
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  return normalize(w * m + s * (std::cos(phi) * e1 + std::sin(phi) * e2));
}

struct AuditSample {
  SchoolState state;
  ModelParams params;
  std::vector<Vec3> stimulus;
};

struct AuditSamplerOptions {
  double ball_radius = 500.0;     // positions uniform in this ball
  double max_sensitivity = 10.0;  // xi_i uniform in [0, max]
  int max_attempts = 1000;
  bool require_strongly_connected = true;  // needed for centrality weights
};

/// Random school satisfying: empty repulsion sets, n_i > 0 and O_i != 0
/// for every fish. Positions keep a minimum separation above r_r; headings are
/// von Mises-Fisher around a random axis. Rejected draws are resampled.
inline std::optional<AuditSample> sample_audit_state(Rng& rng, std::size_t n, double kappa,
                                                     const ModelParams& base,
                                                     const AuditSamplerOptions& opts = {}) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    AuditSample s;
    s.params = base;
    s.params.sensitivity.assign(n, 0.0);
    for (auto& xi : s.params.sensitivity) xi = opts.max_sensitivity * unit(rng);

    const double min_sep2 = 1.0001 * base.r_repulsion * base.r_repulsion;
    s.state.x.reserve(n);
    int placement_tries = 0;
    while (s.state.x.size() < n && placement_tries < 100000) {
      ++placement_tries;
      const Vec3 p = uniform_in_ball(rng, opts.ball_radius);
      bool ok = true;
      for (const auto& q : s.state.x)
        if (squared_norm(p - q) <= min_sep2) {
          ok = false;
          break;
        }
      if (ok) s.state.x.push_back(p);
    }
    if (s.state.x.size() < n) continue;

    const UnitVec3 axis = uniform_on_sphere(rng);
    for (std::size_t i = 0; i < n; ++i) s.state.V.push_back(von_mises_fisher(rng, axis, kappa));

    const UnitVec3 u = uniform_on_sphere(rng);
    s.stimulus.assign(n, u.vec());

    const NeighborSets sets = classify_neighbors(s.state, s.params);
    bool valid = true;
    for (std::size_t i = 0; i < n && valid; ++i) {
      valid = sets.repulsion[i].empty() && !sets.orientation[i].empty() &&
              !is_zero(orientation_force(s.state, sets, i));
    }
    if (!valid) continue;
    if (opts.require_strongly_connected && !is_strongly_connected(build_graph(sets))) continue;
    if (is_zero(mean_direction(s.state))) continue;
    return s;
  }
  return std::nullopt;
}

}  // namespace fishmpc
