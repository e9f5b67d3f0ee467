#pragma once

// Scenario files, seeded initialization, batch trials, timing and
// parameter sweeps, and CSV emission.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fishmpc/json_io.hpp"
#include "fishmpc/mpc.hpp"
#include "fishmpc/sampling.hpp"
#include "fishmpc/school.hpp"

namespace fishmpc {

inline constexpr int kScenarioVersion = 1;

struct ScenarioConfig {
  ModelParams params;  // sensitivity sized to `fish`
  double sensitivity = 10.0;
  ControllerConfig controller;
  double reference_radius = 2000.0;
  std::size_t fish = 100;
  long steps = 1000;
  int trials = 20;
  std::uint64_t seed = 1;
  std::map<std::string, double> overrides;  // model parameter name -> value

  // sweep grid
  std::vector<std::size_t> grid_fish{50, 100, 200};
  std::vector<double> grid_radius{1000.0, 2000.0, 3000.0};

  // timing sweep
  std::vector<std::size_t> timing_fish{50, 300};
  std::vector<std::pair<int, int>> timing_periods{{30, 60}};
  std::vector<PredictorKind> timing_predictors{PredictorKind::original, PredictorKind::static_weight,
                                               PredictorKind::dynamic_weight};
  int timing_windows = 2;

  /// Model parameters for a school of `n` fish with overrides applied.
  [[nodiscard]] ModelParams model_for(std::size_t n) const;
};

/// Sets one named model parameter; throws on unknown names.
inline void set_model_parameter(ModelParams& p, double& sensitivity, const std::string& name, double value) {
  if (name == "speed") p.speed = value;
  else if (name == "step_length") p.step_length = value;
  else if (name == "turning_rate") p.turning_rate = value;
  else if (name == "half_view_angle") p.half_view_angle = value;
  else if (name == "attraction_gain") p.attraction_gain = value;
  else if (name == "sensitivity") sensitivity = value;
  else if (name == "r_repulsion") p.r_repulsion = value;
  else if (name == "r_orientation") p.r_orientation = value;
  else if (name == "r_attraction") p.r_attraction = value;
  else if (name == "noise_scale") p.noise_scale = value;
  else if (name == "noise_baseline") p.noise_baseline = value;
  else throw InvalidArgument("unknown model parameter '" + name + "'");
}

inline ModelParams ScenarioConfig::model_for(std::size_t n) const {
  ModelParams p = params;
  double xi = sensitivity;
  for (const auto& [name, value] : overrides) set_model_parameter(p, xi, name, value);
  p.sensitivity.assign(n, xi);
  p.validate();
  return p;
}

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw InvalidArgument(where + ": unknown key '" + key + "'");
}

template <class T>
void read_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

/// Parses and validates a scenario document. Unknown keys are rejected.
inline ScenarioConfig scenario_from_json(const json& j) {
  using detail::read_if;
  detail::reject_unknown(j,
                         {"version", "description", "model", "controller", "reference_radius", "fish",
                          "steps", "trials", "seed", "overrides", "grid", "timing"},
                         "scenario");
  if (j.value("version", kScenarioVersion) != kScenarioVersion)
    throw InvalidArgument("scenario: unsupported version");
  ScenarioConfig c;
  c.params.noise_scale = 10.0;
  if (j.contains("model")) {
    const json& m = j.at("model");
    detail::reject_unknown(m,
                           {"speed", "step_length", "turning_rate", "half_view_angle", "attraction_gain",
                            "sensitivity", "r_repulsion", "r_orientation", "r_attraction", "noise_scale",
                            "noise_baseline"},
                           "model");
    for (const auto& [key, value] : m.items()) set_model_parameter(c.params, c.sensitivity, key, value.get<double>());
  }
  if (j.contains("controller")) {
    const json& k = j.at("controller");
    detail::reject_unknown(k, {"period", "horizon", "predictor", "restarts", "max_iterations", "tolerance", "initial_step"},
                           "controller");
    read_if(k, "period", c.controller.period);
    read_if(k, "horizon", c.controller.horizon);
    if (k.contains("predictor")) c.controller.predictor = parse_predictor(k.at("predictor").get<std::string>());
    read_if(k, "restarts", c.controller.optimizer.restarts);
    read_if(k, "max_iterations", c.controller.optimizer.max_iterations);
    read_if(k, "tolerance", c.controller.optimizer.tolerance);
    read_if(k, "initial_step", c.controller.optimizer.initial_step);
  }
  read_if(j, "reference_radius", c.reference_radius);
  read_if(j, "fish", c.fish);
  read_if(j, "steps", c.steps);
  read_if(j, "trials", c.trials);
  read_if(j, "seed", c.seed);
  if (j.contains("overrides")) {
    for (const auto& [key, value] : j.at("overrides").items()) c.overrides[key] = value.get<double>();
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    detail::reject_unknown(g, {"fish", "reference_radius"}, "grid");
    read_if(g, "fish", c.grid_fish);
    read_if(g, "reference_radius", c.grid_radius);
  }
  if (j.contains("timing")) {
    const json& t = j.at("timing");
    detail::reject_unknown(t, {"fish", "periods", "predictors", "windows"}, "timing");
    read_if(t, "fish", c.timing_fish);
    if (t.contains("periods")) {
      c.timing_periods.clear();
      for (const auto& p : t.at("periods")) c.timing_periods.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
    if (t.contains("predictors")) {
      c.timing_predictors.clear();
      for (const auto& p : t.at("predictors")) c.timing_predictors.push_back(parse_predictor(p.get<std::string>()));
    }
    read_if(t, "windows", c.timing_windows);
  }

  c.controller.validate();
  if (!(c.reference_radius > 0.0)) throw InvalidArgument("scenario: reference_radius must be positive");
  if (c.fish < 1) throw InvalidArgument("scenario: fish must be >= 1");
  if (c.trials < 1) throw InvalidArgument("scenario: trials must be >= 1");
  if (c.steps < 2 * c.controller.period) throw InvalidArgument("scenario: steps must be >= 2T");
  (void)c.model_for(c.fish);  // validates parameters and overrides
  return c;
}

inline json scenario_to_json(const ScenarioConfig& c) {
  const ModelParams& p = c.params;
  json periods = json::array(), preds = json::array(), overrides = json::object();
  for (const auto& [t, th] : c.timing_periods) periods.push_back({t, th});
  for (auto k : c.timing_predictors) preds.push_back(to_string(k));
  for (const auto& [k, v] : c.overrides) overrides[k] = v;
  return {{"version", kScenarioVersion},
          {"model",
           {{"speed", p.speed},
            {"step_length", p.step_length},
            {"turning_rate", p.turning_rate},
            {"half_view_angle", p.half_view_angle},
            {"attraction_gain", p.attraction_gain},
            {"sensitivity", c.sensitivity},
            {"r_repulsion", p.r_repulsion},
            {"r_orientation", p.r_orientation},
            {"r_attraction", p.r_attraction},
            {"noise_scale", p.noise_scale},
            {"noise_baseline", p.noise_baseline}}},
          {"controller",
           {{"period", c.controller.period},
            {"horizon", c.controller.horizon},
            {"predictor", to_string(c.controller.predictor)},
            {"restarts", c.controller.optimizer.restarts},
            {"max_iterations", c.controller.optimizer.max_iterations},
            {"tolerance", c.controller.optimizer.tolerance},
            {"initial_step", c.controller.optimizer.initial_step}}},
          {"reference_radius", c.reference_radius},
          {"fish", c.fish},
          {"steps", c.steps},
          {"trials", c.trials},
          {"seed", c.seed},
          {"overrides", overrides},
          {"grid", {{"fish", c.grid_fish}, {"reference_radius", c.grid_radius}}},
          {"timing", {{"fish", c.timing_fish}, {"periods", periods}, {"predictors", preds}, {"windows", c.timing_windows}}}};
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file " + path);
  return scenario_from_json(json::parse(in));
}

/// FNV-1a over the canonical JSON dump.
inline std::string config_hash(const ScenarioConfig& c) {
  const std::string s = scenario_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Positions uniform in a ball of radius r_a/2, headings uniform, then a
/// rigid shift that puts the mass center on a seeded random point of the
/// reference sphere.
inline SchoolState initialize_school(std::size_t n, const ModelParams& params, const ReferenceSet& ref,
                                     std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("initialize_school: need at least one fish");
  Rng rng(derive_seed(seed, 7));
  SchoolState s;
  for (std::size_t i = 0; i < n; ++i) s.x.push_back(uniform_in_ball(rng, params.r_attraction / 2.0));
  for (std::size_t i = 0; i < n; ++i) s.V.push_back(uniform_on_sphere(rng));
  const Vec3 anchor = ref.center + ref.radius * uniform_on_sphere(rng).vec();
  const Vec3 shift = anchor - mass_center(s);
  for (auto& p : s.x) p += shift;
  return s;
}

/// Trapezoidal integral of e over the second half of the run, dt = tau.
/// For 1000 steps at tau = 0.1 this covers t in [50, 100].
inline double asymptotic_cumulative_error(const std::vector<double>& e, double tau) {
  if (e.size() < 2) return 0.0;
  const std::size_t last = e.size() - 1;
  const std::size_t first = last / 2;
  double acc = 0.0;
  for (std::size_t k = first; k < last; ++k) acc += 0.5 * (e[k] + e[k + 1]) * tau;
  return acc;
}

struct TrialResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> error;
  std::vector<WindowLog> windows;
  std::vector<std::string> protocol_violations;
};

struct Metrics {
  std::vector<double> mean_error;  // e-bar(k)
  double cumulative_error = 0.0;   // epsilon
  std::vector<double> solve_seconds;
  std::size_t failures = 0;
};

struct TrialBatch {
  PredictorKind predictor = PredictorKind::dynamic_weight;
  std::vector<TrialResult> trials;
  Metrics metrics;
};

inline std::uint64_t trial_seed(std::uint64_t base, int trial) {
  return derive_seed(base, 100 + static_cast<std::uint64_t>(trial));
}

/// Runs `count` jobs on a fixed worker pool; job i writes only slot i.
template <class Job>
void parallel_for(int count, Job&& job) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::min<int>(count, static_cast<int>(hw));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) job(i);
    });
  for (auto& t : pool) t.join();
}

inline Metrics aggregate(const std::vector<TrialResult>& trials, double tau) {
  Metrics m;
  std::size_t len = 0;
  for (const auto& t : trials) {
    if (t.failed) {
      ++m.failures;
      continue;
    }
    len = std::max(len, t.error.size());
    for (const auto& w : t.windows) m.solve_seconds.push_back(w.seconds);
  }
  m.mean_error.assign(len, 0.0);
  std::vector<double> count(len, 0.0);
  for (const auto& t : trials) {
    if (t.failed) continue;
    for (std::size_t k = 0; k < t.error.size(); ++k) {
      m.mean_error[k] += t.error[k];
      count[k] += 1.0;
    }
  }
  for (std::size_t k = 0; k < len; ++k) m.mean_error[k] /= count[k];
  m.cumulative_error = asymptotic_cumulative_error(m.mean_error, tau);
  return m;
}

/// Seeded closed-loop trials. Trial t uses the same seed (hence the same
/// initial school and plant noise) for every predictor, so batches with
/// different predictors are paired.
inline TrialBatch run_trials(const ScenarioConfig& cfg, PredictorKind predictor) {
  const ModelParams params = cfg.model_for(cfg.fish);
  ControllerConfig ctrl = cfg.controller;
  ctrl.predictor = predictor;
  const ReferenceSet ref = ReferenceSet::sphere({}, cfg.reference_radius);

  TrialBatch batch;
  batch.predictor = predictor;
  batch.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, [&](int t) {
    TrialResult& r = batch.trials[static_cast<std::size_t>(t)];
    r.seed = trial_seed(cfg.seed, t);
    try {
      const SchoolState init = initialize_school(cfg.fish, params, ref, r.seed);
      MpcRun run = run_mpc(init, params, ctrl, ref, cfg.steps, r.seed);
      r.protocol_violations = check_protocol(run, ctrl);
      r.error = std::move(run.error);
      r.windows = std::move(run.windows);
    } catch (const std::exception& e) {
      r.failed = true;
      r.failure = e.what();
    }
  });
  batch.metrics = aggregate(batch.trials, params.step_length);
  return batch;
}

struct TimingRow {
  std::size_t fish = 0;
  int period = 0;
  int horizon = 0;
  PredictorKind predictor = PredictorKind::original;
  std::size_t windows = 0;
  double mean_seconds = 0.0;
  double max_seconds = 0.0;
  double budget_seconds = 0.0;  // T tau
  std::size_t over_budget = 0;
};

/// Mean per-window solve time for each (N, T, T_h, predictor), over
/// `windows` solves of one closed-loop instance.
inline std::vector<TimingRow> timing_sweep(const ScenarioConfig& cfg, const std::vector<std::size_t>& fish,
                                           const std::vector<std::pair<int, int>>& periods,
                                           const std::vector<PredictorKind>& predictors, std::uint64_t seed,
                                           int windows) {
  std::vector<TimingRow> rows;
  const ReferenceSet ref = ReferenceSet::sphere({}, cfg.reference_radius);
  for (std::size_t n : fish) {
    const ModelParams params = cfg.model_for(n);
    const SchoolState init = initialize_school(n, params, ref, seed);
    for (const auto& [t, th] : periods) {
      for (PredictorKind kind : predictors) {
        ControllerConfig ctrl = cfg.controller;
        ctrl.period = t;
        ctrl.horizon = th;
        ctrl.predictor = kind;
        const MpcRun run = run_mpc(init, params, ctrl, ref, static_cast<long>(windows + 1) * t, seed);
        TimingRow row{n, t, th, kind, run.windows.size(), 0.0, 0.0, t * params.step_length, 0};
        for (const auto& w : run.windows) {
          row.mean_seconds += w.seconds;
          row.max_seconds = std::max(row.max_seconds, w.seconds);
          if (w.over_budget) ++row.over_budget;
        }
        if (!run.windows.empty()) row.mean_seconds /= static_cast<double>(run.windows.size());
        rows.push_back(row);
      }
    }
  }
  return rows;
}

struct SweepCase {
  std::string label;
  std::string parameter;
  double value = 0.0;
};

/// The ten one-parameter perturbations (a)-(j) of the robustness study.
inline std::vector<SweepCase> standard_sweep_cases() {
  using std::numbers::pi;
  return {{"a", "sensitivity", 15.0},          {"b", "sensitivity", 5.0},
          {"c", "turning_rate", 0.92},         {"d", "turning_rate", 0.23},
          {"e", "half_view_angle", 7 * pi / 8}, {"f", "half_view_angle", 5 * pi / 8},
          {"g", "r_orientation", 875.0},       {"h", "r_orientation", 625.0},
          {"i", "r_attraction", 1125.0},       {"j", "r_attraction", 875.0}};
}

inline ScenarioConfig apply_case(const ScenarioConfig& base, const SweepCase& c) {
  ScenarioConfig out = base;
  out.overrides[c.parameter] = c.value;
  (void)out.model_for(out.fish);
  return out;
}

struct ComparisonRow {
  std::string label;  // "base" or a case label
  std::string parameter;
  double value = 0.0;
  std::size_t fish = 0;
  double reference_radius = 0.0;
  double eps_static = 0.0;
  double eps_dynamic = 0.0;
  std::size_t failures = 0;
  std::size_t protocol_violations = 0;
  [[nodiscard]] bool dynamic_better() const { return eps_dynamic <= eps_static; }
};

/// Paired static vs dynamic comparison over the (N, r_R) grid of `cfg`.
inline std::vector<ComparisonRow> compare_predictors(const ScenarioConfig& cfg, const std::string& label = "base",
                                                     const std::string& parameter = "", double value = 0.0) {
  std::vector<ComparisonRow> rows;
  for (std::size_t n : cfg.grid_fish) {
    for (double radius : cfg.grid_radius) {
      ScenarioConfig cell = cfg;
      cell.fish = n;
      cell.reference_radius = radius;
      const TrialBatch stc = run_trials(cell, PredictorKind::static_weight);
      const TrialBatch dyn = run_trials(cell, PredictorKind::dynamic_weight);
      ComparisonRow row{label, parameter, value, n, radius, stc.metrics.cumulative_error,
                        dyn.metrics.cumulative_error, stc.metrics.failures + dyn.metrics.failures, 0};
      for (const auto* b : {&stc, &dyn})
        for (const auto& t : b->trials) row.protocol_violations += t.protocol_violations.size();
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::vector<ComparisonRow> sweep_parameters(const ScenarioConfig& base, const std::vector<SweepCase>& cases) {
  std::vector<ComparisonRow> rows;
  for (const auto& c : cases) {
    auto part = compare_predictors(apply_case(base, c), c.label, c.parameter, c.value);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV output. Every file starts with one "# generated_at=..." line; the rest
// is a pure function of the config and seed (timings excepted).

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string timestamp_line() {
  const std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return std::string("# generated_at=") + buf + "\n";
}

inline std::string errors_csv(const std::vector<double>& mean, const std::vector<TrialResult>& trials, double tau) {
  std::ostringstream out;
  out << "k,t,mean_error";
  for (std::size_t i = 0; i < trials.size(); ++i) out << ",trial_" << i;
  out << "\n";
  for (std::size_t k = 0; k < mean.size(); ++k) {
    out << k << ',' << format_number(static_cast<double>(k) * tau) << ',' << format_number(mean[k]);
    for (const auto& t : trials) out << ',' << (k < t.error.size() ? format_number(t.error[k]) : "");
    out << "\n";
  }
  return out.str();
}

inline std::string trials_csv(const std::vector<TrialBatch>& batches, double tau) {
  std::ostringstream out;
  out << "predictor,trial,seed,failed,cumulative_error,protocol_violations\n";
  for (const auto& b : batches)
    for (std::size_t i = 0; i < b.trials.size(); ++i) {
      const auto& t = b.trials[i];
      out << to_string(b.predictor) << ',' << i << ',' << t.seed << ',' << (t.failed ? 1 : 0) << ','
          << (t.failed ? "" : format_number(asymptotic_cumulative_error(t.error, tau))) << ','
          << t.protocol_violations.size() << "\n";
    }
  return out.str();
}

inline std::string windows_csv(const std::vector<WindowLog>& windows) {
  std::ostringstream out;
  out << "window,observation_step,apply_begin,apply_end,cost,evaluations,seconds,over_budget,budget_exhausted,events\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    out << i << ',' << w.observation_step << ',' << w.apply_begin << ',' << w.apply_end << ','
        << format_number(w.cost) << ',' << w.evaluations << ',' << format_number(w.seconds) << ','
        << (w.over_budget ? 1 : 0) << ',' << (w.budget_exhausted ? 1 : 0) << ',' << w.events.size() << "\n";
  }
  return out.str();
}

inline std::string timings_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "fish,period,horizon,predictor,windows,mean_seconds,max_seconds,budget_seconds,over_budget\n";
  for (const auto& r : rows)
    out << r.fish << ',' << r.period << ',' << r.horizon << ',' << to_string(r.predictor) << ',' << r.windows << ','
        << format_number(r.mean_seconds) << ',' << format_number(r.max_seconds) << ','
        << format_number(r.budget_seconds) << ',' << r.over_budget << "\n";
  return out.str();
}

inline std::string comparisons_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "case,parameter,value,fish,reference_radius,eps_static,eps_dynamic,dynamic_better,failures\n";
  for (const auto& r : rows)
    out << r.label << ',' << r.parameter << ',' << format_number(r.value) << ',' << r.fish << ','
        << format_number(r.reference_radius) << ',' << format_number(r.eps_static) << ','
        << format_number(r.eps_dynamic) << ',' << (r.dynamic_better() ? 1 : 0) << ',' << r.failures << "\n";
  return out.str();
}

inline void write_file(const std::string& path, const std::string& body, bool with_timestamp = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  if (with_timestamp) out << timestamp_line();
  out << body;
}

inline json run_manifest(const ScenarioConfig& cfg, const std::string& command) {
  return {{"command", command},
          {"config_hash", config_hash(cfg)},
          {"seed", cfg.seed},
          {"code_version", "fishmpc 0.1.0"},
          {"paired_by_seed", true},
          {"config", scenario_to_json(cfg)}};
}

}  // namespace fishmpc
