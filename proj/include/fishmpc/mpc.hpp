#pragma once

// Receding-horizon tracking of a reference set by the school's mass center.
//
// Protocol: the school is observed every T steps. The observation at l*T
// fixes the stimulus applied on [(l+1)T, (l+2)T); the solve happens while
// the stimulus chosen at (l-1)T is still in flight. The cost sums the
// predicted distance to the reference over k = (l+1)T ... (l+1)T + T_h.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fishmpc/error.hpp"
#include "fishmpc/network.hpp"
#include "fishmpc/optimizer.hpp"
#include "fishmpc/reduction.hpp"
#include "fishmpc/sampling.hpp"
#include "fishmpc/school.hpp"
#include "fishmpc/vec3.hpp"

namespace fishmpc {

/// Sphere surface {p : |p - center| = radius}.
struct ReferenceSet {
  Vec3 center;
  double radius = 1.0;

  static ReferenceSet sphere(const Vec3& center, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("reference radius must be positive");
    return {center, radius};
  }
};

inline double distance_to_reference(const Vec3& p, const ReferenceSet& ref) {
  return std::abs(norm(p - ref.center) - ref.radius);
}

/// Nearest point of the reference set; `fallback` direction when p is the center.
inline Vec3 nearest_reference_point(const Vec3& p, const ReferenceSet& ref) {
  const Vec3 d = p - ref.center;
  const Vec3 dir = is_zero(d) ? Vec3{1.0, 0.0, 0.0} : normalize(d).vec();
  return ref.center + ref.radius * dir;
}

enum class PredictorKind { original, static_weight, dynamic_weight };

inline std::string to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::original: return "orig";
    case PredictorKind::static_weight: return "static";
    case PredictorKind::dynamic_weight: return "dynamic";
  }
  return "?";
}

inline PredictorKind parse_predictor(const std::string& s) {
  if (s == "orig" || s == "original") return PredictorKind::original;
  if (s == "static" || s == "stc") return PredictorKind::static_weight;
  if (s == "dynamic" || s == "dyn") return PredictorKind::dynamic_weight;
  throw InvalidArgument("unknown predictor '" + s + "' (expected orig|static|dynamic)");
}

struct OptimizerSettings {
  int restarts = 4;
  int max_iterations = 200;  // per restart
  double tolerance = 1e-6;
  double initial_step = 0.3;  // rad
};

struct ControllerConfig {
  int period = 30;   // T
  int horizon = 60;  // T_h
  PredictorKind predictor = PredictorKind::dynamic_weight;
  OptimizerSettings optimizer;

  [[nodiscard]] int blocks() const { return horizon / period; }

  void validate() const {
    if (period < 1) throw InvalidArgument("controller: T must be >= 1");
    if (horizon < period) throw InvalidArgument("controller: T_h must be >= T");
    if (horizon % period != 0) throw InvalidArgument("controller: T_h must be a multiple of T");
    if (optimizer.restarts < 1 || optimizer.max_iterations < 1)
      throw InvalidArgument("controller: optimizer needs at least one restart and iteration");
  }
};

/// Unit direction from (azimuth, elevation).
inline UnitVec3 direction_from_angles(double azimuth, double elevation) {
  return normalize({std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
                    std::sin(elevation)});
}

inline std::pair<double, double> angles_from_direction(const Vec3& d) {
  return {std::atan2(d.y, d.x), std::atan2(d.z, std::hypot(d.x, d.y))};
}

/// Block-constant stimulus: blocks[b] is applied for `period` consecutive steps.
struct StimulusSchedule {
  std::vector<UnitVec3> blocks;
  int period = 1;

  static StimulusSchedule from_angles(std::span<const double> angles, int period) {
    if (angles.size() % 2 != 0) throw InvalidArgument("schedule angles come in pairs");
    StimulusSchedule s;
    s.period = period;
    for (std::size_t b = 0; b < angles.size(); b += 2)
      s.blocks.push_back(direction_from_angles(angles[b], angles[b + 1]));
    return s;
  }

  static StimulusSchedule constant(const UnitVec3& u, int period, int count) {
    return {std::vector<UnitVec3>(static_cast<std::size_t>(count), u), period};
  }

  [[nodiscard]] int length() const { return period * static_cast<int>(blocks.size()); }
  [[nodiscard]] const UnitVec3& at(int offset) const {
    return blocks[static_cast<std::size_t>(offset / period)];
  }
  [[nodiscard]] std::vector<double> angles() const {
    std::vector<double> a;
    for (const auto& b : blocks) {
      const auto [az, el] = angles_from_direction(b.vec());
      a.push_back(az);
      a.push_back(el);
    }
    return a;
  }
};

/// Sum of dist(c^(k), R) over the start state and the schedule's steps
/// (length + 1 terms), rolling the reduced model.
inline double horizon_cost(const ReducedState& start, const FrozenAggregates& agg,
                           const StimulusSchedule& schedule, const ReferenceSet& ref,
                           PredictionEvents* events = nullptr) {
  ReducedState r = start;
  double cost = distance_to_reference(r.center, ref);
  const int steps = schedule.length();
  for (int m = 0; m < steps; ++m) {
    r = predict_step(r, agg, schedule.at(m).vec(), events);
    cost += distance_to_reference(r.center, ref);
  }
  return cost;
}

/// Same sum, rolling the noise-free full model with a broadcast stimulus.
inline double horizon_cost(const SchoolState& start, const ModelParams& params,
                           const StimulusSchedule& schedule, const ReferenceSet& ref) {
  SchoolState s = start;
  double cost = distance_to_reference(mass_center(s), ref);
  const int steps = schedule.length();
  for (int m = 0; m < steps; ++m) {
    s = step(s, params, schedule.at(m).vec());
    cost += distance_to_reference(mass_center(s), ref);
  }
  return cost;
}

/// Prediction backend anchored at one observation. The lead-in interval
/// [lT, (l+1)T) with the in-flight stimulus is rolled once at construction.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Cost of a schedule starting at (l+1)T.
  [[nodiscard]] virtual double cost(const StimulusSchedule& schedule) const = 0;
  /// Predicted mass center and aggregate heading at (l+1)T.
  [[nodiscard]] virtual Vec3 anchor_center() const = 0;
  [[nodiscard]] virtual Vec3 anchor_direction() const = 0;
  [[nodiscard]] virtual PredictorKind kind() const = 0;
};

class ReducedPredictor final : public Predictor {
 public:
  ReducedPredictor(PredictorKind kind, FrozenAggregates agg, const ReducedState& observed,
                   const Vec3& lead_in, int lead_in_steps, const ReferenceSet& ref)
      : kind_(kind), agg_(std::move(agg)), ref_(ref), anchor_(observed) {
    for (int m = 0; m < lead_in_steps; ++m) anchor_ = predict_step(anchor_, agg_, lead_in, &events_);
  }

  [[nodiscard]] double cost(const StimulusSchedule& schedule) const override {
    return horizon_cost(anchor_, agg_, schedule, ref_);
  }
  [[nodiscard]] Vec3 anchor_center() const override { return anchor_.center; }
  [[nodiscard]] Vec3 anchor_direction() const override { return anchor_.direction; }
  [[nodiscard]] PredictorKind kind() const override { return kind_; }
  [[nodiscard]] const FrozenAggregates& aggregates() const { return agg_; }
  [[nodiscard]] const ReducedState& anchor() const { return anchor_; }

 private:
  PredictorKind kind_;
  FrozenAggregates agg_;
  ReferenceSet ref_;
  ReducedState anchor_;
  PredictionEvents events_;
};

class FullModelPredictor final : public Predictor {
 public:
  FullModelPredictor(const SchoolState& observed, ModelParams params, const Vec3& lead_in,
                     int lead_in_steps, const ReferenceSet& ref)
      : params_(std::move(params)), ref_(ref), anchor_(observed) {
    for (int m = 0; m < lead_in_steps; ++m) anchor_ = step(anchor_, params_, lead_in);
  }

  [[nodiscard]] double cost(const StimulusSchedule& schedule) const override {
    return horizon_cost(anchor_, params_, schedule, ref_);
  }
  [[nodiscard]] Vec3 anchor_center() const override { return mass_center(anchor_); }
  [[nodiscard]] Vec3 anchor_direction() const override { return mean_direction(anchor_); }
  [[nodiscard]] PredictorKind kind() const override { return PredictorKind::original; }

 private:
  ModelParams params_;
  ReferenceSet ref_;
  SchoolState anchor_;
};

struct EventLog {
  std::vector<std::string> entries;
  void add(std::string e) { entries.push_back(std::move(e)); }
};

/// Weights of the dynamic predictor: the orientation-graph centrality, or
/// uniform weights (with a logged warning) when the graph is not strongly
/// connected.
inline WeightVector dynamic_weights(const NeighborSets& sets, EventLog* log = nullptr) {
  const OrientationGraph g = build_graph(sets);
  if (is_strongly_connected(g)) return eigenvector_centrality(g).as_weights();
  if (log != nullptr) log->add("centrality unavailable: orientation graph not strongly connected; using 1/N");
  return WeightVector::uniform(g.size());
}

/// Builds the predictor for an observation at l*T. `lead_in` is the
/// stimulus already committed for [lT, (l+1)T).
inline std::unique_ptr<Predictor> make_predictor(const SchoolState& observation,
                                                 const ModelParams& params,
                                                 const ControllerConfig& cfg,
                                                 const ReferenceSet& ref, const Vec3& lead_in,
                                                 EventLog* log = nullptr) {
  if (cfg.predictor == PredictorKind::original)
    return std::make_unique<FullModelPredictor>(observation, params, lead_in, cfg.period, ref);

  const NeighborSets sets = classify_neighbors(observation, params);
  const WeightVector weights = cfg.predictor == PredictorKind::dynamic_weight
                                   ? dynamic_weights(sets, log)
                                   : WeightVector::uniform(observation.size());
  FrozenAggregates agg =
      freeze_aggregates(observation, sets, params, weights, IsolatedFishPolicy::skip);
  if (!agg.skipped.empty() && log != nullptr)
    log->add(std::to_string(agg.skipped.size()) + " fish without orientation neighbors left out of aggregates");
  return std::make_unique<ReducedPredictor>(cfg.predictor, std::move(agg), init_reduced(observation),
                                            lead_in, cfg.period, ref);
}

/// Keeps moving along the reference: heading projected on the tangent plane.
inline UnitVec3 tangent_heading(const Vec3& center, const Vec3& heading, const ReferenceSet& ref) {
  const Vec3 radial_raw = center - ref.center;
  const Vec3 radial = is_zero(radial_raw) ? Vec3{0.0, 0.0, 1.0} : normalize(radial_raw).vec();
  const Vec3 t = heading - dot(heading, radial) * radial;
  if (!is_zero(t)) return normalize(t);
  return normalize(detail::fallback_tangent(radial));
}

struct OptimizeResult {
  StimulusSchedule schedule;
  std::vector<double> angles;
  double cost = 0.0;
  int evaluations = 0;
  bool budget_exhausted = false;  // some restart hit its iteration limit
  double seconds = 0.0;
};

inline std::vector<double> tangent_start(const Predictor& p, const ReferenceSet& ref, int blocks) {
  const auto [az, el] =
      angles_from_direction(tangent_heading(p.anchor_center(), p.anchor_direction(), ref).vec());
  std::vector<double> a;
  for (int b = 0; b < blocks; ++b) {
    a.push_back(az);
    a.push_back(el);
  }
  return a;
}

/// Minimizes the horizon cost over spherical block angles with Nelder-Mead
/// restarts: warm start (or the direction toward the nearest reference point
/// when there is none), tangent heuristic, then seeded random starts. The
/// result is the best schedule among all evaluated ones; ties go to the
/// lexicographically smallest angle tuple.
inline OptimizeResult optimize_schedule(const Predictor& predictor, const ControllerConfig& cfg,
                                        const ReferenceSet& ref, std::uint64_t seed,
                                        const std::vector<double>* warm_start = nullptr) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int blocks = cfg.blocks();
  const std::size_t dim = 2 * static_cast<std::size_t>(blocks);

  OptimizeResult best;
  best.cost = std::numeric_limits<double>::infinity();
  auto objective = [&](const std::vector<double>& a) {
    const StimulusSchedule s = StimulusSchedule::from_angles(a, cfg.period);
    const double c = predictor.cost(s);
    ++best.evaluations;
    if (c < best.cost || (c == best.cost && a < best.angles)) {
      best.cost = c;
      best.angles = a;
    }
    return c;
  };

  std::vector<std::vector<double>> starts;
  if (warm_start != nullptr && warm_start->size() == dim) {
    starts.push_back(*warm_start);
  } else {
    const Vec3 target = nearest_reference_point(predictor.anchor_center(), ref) - predictor.anchor_center();
    const UnitVec3 toward = is_zero(target) ? tangent_heading(predictor.anchor_center(), predictor.anchor_direction(), ref)
                                            : normalize(target);
    const auto [az, el] = angles_from_direction(toward.vec());
    std::vector<double> a;
    for (int b = 0; b < blocks; ++b) {
      a.push_back(az);
      a.push_back(el);
    }
    starts.push_back(std::move(a));
  }
  starts.push_back(tangent_start(predictor, ref, blocks));
  Rng rng(seed);
  while (static_cast<int>(starts.size()) < cfg.optimizer.restarts) {
    std::vector<double> a;
    for (int b = 0; b < blocks; ++b) {
      const auto [az, el] = angles_from_direction(uniform_on_sphere(rng).vec());
      a.push_back(az);
      a.push_back(el);
    }
    starts.push_back(std::move(a));
  }
  starts.resize(static_cast<std::size_t>(cfg.optimizer.restarts));

  const NelderMeadOptions nm{cfg.optimizer.max_iterations, cfg.optimizer.tolerance,
                             cfg.optimizer.initial_step};
  for (const auto& x0 : starts) {
    const NelderMeadResult r = nelder_mead(objective, x0, nm);
    if (!r.converged) best.budget_exhausted = true;
  }
  best.schedule = StimulusSchedule::from_angles(best.angles, cfg.period);
  best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

struct WindowLog {
  long observation_step = 0;  // k of the state handed to the solver
  long apply_begin = 0;       // first step the solved block is applied
  long apply_end = 0;         // one past the last
  double cost = 0.0;
  int evaluations = 0;
  double seconds = 0.0;
  bool over_budget = false;  // solve slower than T*tau
  bool budget_exhausted = false;
  std::vector<double> solution;  // block angles of the optimized schedule
  std::vector<std::string> events;
};

struct MpcOptions {
  Vec3 initial_stimulus;  // applied on [0, T); zero by default
  bool record_states = false;
};

struct MpcRun {
  std::vector<double> error;      // e(k), k = 0 ... steps
  std::vector<Vec3> centers;      // c(k)
  std::vector<Vec3> applied;      // u(k), k = 0 ... steps - 1
  std::vector<WindowLog> windows;
  std::vector<SchoolState> states;  // when recorded
};

inline std::uint64_t plant_noise_seed(std::uint64_t seed) { return derive_seed(seed, 0); }
inline std::uint64_t solver_seed(std::uint64_t seed, long window) {
  return derive_seed(seed, 1000 + static_cast<std::uint64_t>(window));
}

/// Previous solution shifted by one block, last block repeated.
inline std::vector<double> shifted_warm_start(const std::vector<double>& angles) {
  std::vector<double> warm(angles.begin() + 2, angles.end());
  warm.push_back(angles[angles.size() - 2]);
  warm.push_back(angles.back());
  return warm;
}

/// Closed loop: the plant is the full model with angular noise.
inline MpcRun run_mpc(const SchoolState& initial, const ModelParams& params,
                      const ControllerConfig& cfg, const ReferenceSet& ref, long steps,
                      std::uint64_t seed, const MpcOptions& opts = {}) {
  cfg.validate();
  params.validate();
  initial.validate(params.fish_count());
  const long period = cfg.period;
  if (steps < 2 * period) throw InvalidArgument("run_mpc: need at least two observation periods");

  AngularNoise noise(plant_noise_seed(seed), params);
  MpcRun run;
  run.error.reserve(static_cast<std::size_t>(steps + 1));
  run.applied.reserve(static_cast<std::size_t>(steps));

  SchoolState state = initial;
  state.k = 0;
  Vec3 current = opts.initial_stimulus;  // block in flight
  std::optional<Vec3> next_block;
  std::vector<double> warm;

  for (long k = 0;; ++k) {
    const Vec3 c = mass_center(state);
    run.centers.push_back(c);
    run.error.push_back(distance_to_reference(c, ref));
    if (opts.record_states) run.states.push_back(state);
    if (k == steps) break;

    if (k % period == 0) {
      if (next_block) current = *next_block;
      next_block.reset();
      if (k + period < steps) {
        const SchoolState observation = state;  // the solver sees only this copy
        WindowLog w;
        w.observation_step = observation.k;
        w.apply_begin = k + period;
        w.apply_end = std::min(k + 2 * period, steps);
        const auto t0 = std::chrono::steady_clock::now();
        EventLog log;
        const auto predictor = make_predictor(observation, params, cfg, ref, current, &log);
        const OptimizeResult res =
            optimize_schedule(*predictor, cfg, ref, solver_seed(seed, k / period), warm.empty() ? nullptr : &warm);
        w.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        w.cost = res.cost;
        w.evaluations = res.evaluations;
        w.budget_exhausted = res.budget_exhausted;
        w.over_budget = w.seconds > static_cast<double>(period) * params.step_length;
        w.events = std::move(log.entries);
        w.solution = res.angles;
        next_block = res.schedule.blocks.front().vec();
        warm = shifted_warm_start(res.angles);
        run.windows.push_back(std::move(w));
      }
    }
    run.applied.push_back(current);
    state = step(state, params, current, &noise);
  }
  return run;
}

/// Open-loop run of the noisy plant under a constant broadcast stimulus,
/// sharing run_mpc's noise stream for a given seed.
inline MpcRun simulate(const SchoolState& initial, const ModelParams& params, const ReferenceSet& ref,
                       long steps, std::uint64_t seed, const Vec3& stimulus = {},
                       bool record_states = false) {
  params.validate();
  initial.validate(params.fish_count());
  AngularNoise noise(plant_noise_seed(seed), params);
  MpcRun run;
  SchoolState state = initial;
  state.k = 0;
  for (long k = 0;; ++k) {
    const Vec3 c = mass_center(state);
    run.centers.push_back(c);
    run.error.push_back(distance_to_reference(c, ref));
    if (record_states) run.states.push_back(state);
    if (k == steps) break;
    run.applied.push_back(stimulus);
    state = step(state, params, stimulus, &noise);
  }
  return run;
}

/// Closed-loop protocol invariants: observation timing (causality),
/// block-constant and unit-norm applied stimulus after the first interval.
/// Returns one message per violation.
inline std::vector<std::string> check_protocol(const MpcRun& run, const ControllerConfig& cfg) {
  std::vector<std::string> bad;
  const long period = cfg.period;
  const long steps = static_cast<long>(run.applied.size());
  for (std::size_t w = 0; w < run.windows.size(); ++w) {
    const WindowLog& log = run.windows[w];
    const long l = static_cast<long>(w);
    if (log.observation_step != l * period)
      bad.push_back("window " + std::to_string(w) + " solved from step " +
                    std::to_string(log.observation_step) + ", expected " + std::to_string(l * period));
    if (log.apply_begin != (l + 1) * period)
      bad.push_back("window " + std::to_string(w) + " applied from step " + std::to_string(log.apply_begin));
  }
  for (long k = 0; k < steps; ++k) {
    const Vec3& u = run.applied[static_cast<std::size_t>(k)];
    const long block_start = (k / period) * period;
    if (u != run.applied[static_cast<std::size_t>(block_start)])
      bad.push_back("stimulus changes inside block at step " + std::to_string(k));
    if (k >= period && std::abs(norm(u) - 1.0) > 1e-12)
      bad.push_back("non-unit stimulus at step " + std::to_string(k));
  }
  return bad;
}

}  // namespace fishmpc
