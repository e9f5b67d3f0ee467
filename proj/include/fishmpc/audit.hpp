#pragma once

// Sampled audit of the reduction error bounds.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fishmpc/network.hpp"
#include "fishmpc/reduction.hpp"
#include "fishmpc/sampling.hpp"

namespace fishmpc {

enum class BoundKind { lemma_a1, lemma_a2, prop_a3, theorem1, theorem2 };

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::lemma_a1: return "lemma_a1";
    case BoundKind::lemma_a2: return "lemma_a2";
    case BoundKind::prop_a3: return "prop_a3";
    case BoundKind::theorem1: return "theorem1";
    case BoundKind::theorem2: return "theorem2";
  }
  return "?";
}

struct AuditOptions {
  std::size_t states = 10000;
  std::vector<double> kappas{2.0, 8.0, 32.0};
  std::vector<std::size_t> sizes{10, 50, 100};
  double slack = 1e-9;
  std::uint64_t seed = 1;
  AuditSamplerOptions sampler;
};

struct BoundTally {
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst_gap = -1e300;  // max(lhs - rhs)
  double worst_ratio = 0.0;   // max(lhs / rhs), rhs > 0
};

struct AuditViolation {
  BoundKind kind;
  std::size_t state = 0;
  std::size_t fish = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AuditSummary {
  std::size_t states = 0;
  std::size_t sampler_failures = 0;
  std::size_t degenerate = 0;  // some D_i or aggregate argument was zero
  BoundTally tally[5];
  std::vector<AuditViolation> violations;  // first 100 only

  [[nodiscard]] const BoundTally& of(BoundKind k) const { return tally[static_cast<int>(k)]; }
  [[nodiscard]] std::size_t total_violations() const {
    std::size_t v = 0;
    for (const auto& t : tally) v += t.violations;
    return v;
  }
};

namespace detail {

inline void record(AuditSummary& s, BoundKind kind, std::size_t state, std::size_t fish, const BoundCheck& c,
                   double slack) {
  BoundTally& t = s.tally[static_cast<int>(kind)];
  ++t.checks;
  t.worst_gap = std::max(t.worst_gap, c.lhs - c.rhs);
  if (c.rhs > 0.0) t.worst_ratio = std::max(t.worst_ratio, c.lhs / c.rhs);
  if (!c.holds(slack)) {
    ++t.violations;
    if (s.violations.size() < 100) s.violations.push_back({kind, state, fish, c.lhs, c.rhs});
  }
}

}  // namespace detail

/// Checks every bound on `opts.states` sampled schools, cycling through
/// (N, kappa) combinations. Per state: the two lemmas and the proposition
/// for every fish (uniform weights for the proposition and Lemma A.2,
/// centrality weights for a second pass of both), Theorem 1 with uniform
/// weights and Theorem 2 with centrality weights.
inline AuditSummary audit_bounds(const AuditOptions& opts, const ModelParams& base = {}) {
  AuditSummary sum;
  Rng rng(opts.seed);
  for (std::size_t s = 0; s < opts.states; ++s) {
    const std::size_t n = opts.sizes[(s / opts.kappas.size()) % opts.sizes.size()];
    const double kappa = opts.kappas[s % opts.kappas.size()];
    const auto sample = sample_audit_state(rng, n, kappa, base, opts.sampler);
    if (!sample) {
      ++sum.sampler_failures;
      continue;
    }
    const SchoolState& st = sample->state;
    const ModelParams& p = sample->params;
    const std::span<const Vec3> u(sample->stimulus);
    const NeighborSets sets = classify_neighbors(st, p);
    const WeightVector uniform = WeightVector::uniform(n);
    const CentralityVector beta = eigenvector_centrality(build_graph(sets));
    const WeightVector central = beta.as_weights();
    DiagnosticReport stc, dyn;
    try {
      stc = diagnostics(st, sets, p, u, uniform);
      dyn = diagnostics(st, sets, p, u, central);
    } catch (const AssumptionViolated&) {
      ++sum.degenerate;
      continue;
    }
    ++sum.states;
    const AngleMatrix angles(st);

    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 o = orientation_force(st, sets, i);
      const Vec3 w = p.attraction_gain * attraction_force(st, sets, i) + p.sensitivity[i] * u[i];
      if (!is_zero(o + w)) {
        const double lhs = norm(delta_phi(o, w));
        detail::record(sum, BoundKind::lemma_a1, s, i, {lhs, 2.0 * squared_norm(w) / squared_norm(o)}, opts.slack);
      }
      for (const WeightVector* a : {&uniform, &central}) {
        detail::record(sum, BoundKind::lemma_a2, s, i, lemma_a2_check(st, sets, *a, i, angles), opts.slack);
        detail::record(sum, BoundKind::prop_a3, s, i, prop_a3_check(st, sets, p, u, *a, i, angles), opts.slack);
      }
    }

    detail::record(sum, BoundKind::theorem1, s, 0, {norm(stc.residual), stc.theorem1_bound}, opts.slack);
    detail::record(sum, BoundKind::theorem2, s, 0, {norm(dyn.residual), dyn.theorem2_bound}, opts.slack);
  }
  return sum;
}

}  // namespace fishmpc
