// fishmpc: command-line driver for simulations, closed-loop runs, batch
// trials, timing and parameter sweeps, and the bound audit.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fishmpc.hpp"

namespace fs = std::filesystem;
using namespace fishmpc;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::optional<std::string> predictor;
  std::optional<int> trials;
  std::optional<std::size_t> n;
  std::optional<double> radius;
  std::optional<long> steps;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "Scenario JSON file");
  app->add_option("--seed", f.seed, "Base seed (overrides the file)");
  app->add_option("--out-dir", f.out_dir, "Output directory")->capture_default_str();
  app->add_option("--predictor", f.predictor, "orig|static|dynamic");
  app->add_option("--trials", f.trials, "Trial count");
  app->add_option("--n", f.n, "Number of fish");
  app->add_option("--radius", f.radius, "Reference sphere radius");
  app->add_option("--steps", f.steps, "Simulation steps");
}

ScenarioConfig resolve(const CommonFlags& f) {
  ScenarioConfig c = f.config.empty() ? scenario_from_json(json::object()) : load_scenario(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.predictor) c.controller.predictor = parse_predictor(*f.predictor);
  if (f.trials) c.trials = *f.trials;
  if (f.n) c.fish = *f.n;
  if (f.radius) c.reference_radius = *f.radius;
  if (f.steps) c.steps = *f.steps;
  return scenario_from_json(scenario_to_json(c));  // revalidate after overrides
}

std::string out_path(const CommonFlags& f, const std::string& name) {
  fs::create_directories(f.out_dir);
  return (fs::path(f.out_dir) / name).string();
}

void write_manifest(const CommonFlags& f, const ScenarioConfig& c, const std::string& command) {
  write_file(out_path(f, "manifest.json"), run_manifest(c, command).dump(2) + "\n", false);
}

void write_trajectory(const CommonFlags& f, const std::vector<SchoolState>& states) {
  json frames = json::array();
  for (const auto& s : states) frames.push_back(state_to_json(s));
  write_file(out_path(f, "trajectory.json"), frames.dump() + "\n", false);
}

// Open-loop invariants: unit headings and a finite, nonnegative error.
std::vector<std::string> check_open_loop(const MpcRun& run) {
  std::vector<std::string> bad;
  for (std::size_t k = 0; k < run.error.size(); ++k)
    if (!(run.error[k] >= 0.0) || !std::isfinite(run.error[k])) bad.push_back("bad error at step " + std::to_string(k));
  for (const auto& s : run.states)
    for (const auto& v : s.V)
      if (std::abs(norm(v.vec()) - 1.0) > 1e-12) {
        bad.push_back("non-unit heading at step " + std::to_string(s.k));
        break;
      }
  return bad;
}

int report(const std::vector<std::string>& violations) {
  for (const auto& v : violations) std::cerr << "invariant violated: " << v << "\n";
  return violations.empty() ? 0 : 1;
}

int cmd_simulate(const CommonFlags& f, bool dump) {
  const ScenarioConfig c = resolve(f);
  const ModelParams p = c.model_for(c.fish);
  const ReferenceSet ref = ReferenceSet::sphere({}, c.reference_radius);
  const SchoolState init = initialize_school(c.fish, p, ref, c.seed);
  const MpcRun run = simulate(init, p, ref, c.steps, c.seed, {}, true);
  write_file(out_path(f, "errors.csv"), errors_csv(run.error, {}, p.step_length));
  if (dump) write_trajectory(f, run.states);
  write_manifest(f, c, "simulate");
  std::cout << "simulate: N=" << c.fish << " steps=" << c.steps << " final_error=" << run.error.back()
            << " polarization=" << polarization(run.states.back()) << "\n";
  return report(check_open_loop(run));
}

int cmd_mpc(const CommonFlags& f, bool dump) {
  const ScenarioConfig c = resolve(f);
  const ModelParams p = c.model_for(c.fish);
  const ReferenceSet ref = ReferenceSet::sphere({}, c.reference_radius);
  const SchoolState init = initialize_school(c.fish, p, ref, c.seed);
  MpcOptions opts;
  opts.record_states = dump;
  const MpcRun run = run_mpc(init, p, c.controller, ref, c.steps, c.seed, opts);
  TrialResult t;
  t.seed = c.seed;
  t.error = run.error;
  write_file(out_path(f, "errors.csv"), errors_csv(run.error, {t}, p.step_length));
  write_file(out_path(f, "windows.csv"), windows_csv(run.windows));
  if (dump) write_trajectory(f, run.states);
  write_manifest(f, c, "mpc");
  std::cout << "mpc: predictor=" << to_string(c.controller.predictor) << " N=" << c.fish
            << " windows=" << run.windows.size()
            << " epsilon=" << asymptotic_cumulative_error(run.error, p.step_length) << "\n";
  return report(check_protocol(run, c.controller));
}

int cmd_trials(const CommonFlags& f) {
  const ScenarioConfig c = resolve(f);
  std::vector<TrialBatch> batches;
  if (f.predictor) {
    batches.push_back(run_trials(c, c.controller.predictor));
  } else {
    batches.push_back(run_trials(c, PredictorKind::static_weight));
    batches.push_back(run_trials(c, PredictorKind::dynamic_weight));
  }
  const double tau = c.params.step_length;
  std::vector<std::string> violations;
  for (const auto& b : batches) {
    write_file(out_path(f, "errors_" + to_string(b.predictor) + ".csv"), errors_csv(b.metrics.mean_error, b.trials, tau));
    std::cout << "trials: predictor=" << to_string(b.predictor) << " N=" << c.fish << " trials=" << b.trials.size()
              << " failures=" << b.metrics.failures << " epsilon=" << b.metrics.cumulative_error << "\n";
    for (const auto& t : b.trials) {
      if (t.failed) std::cerr << "trial seed " << t.seed << " failed: " << t.failure << "\n";
      for (const auto& v : t.protocol_violations) violations.push_back("seed " + std::to_string(t.seed) + ": " + v);
    }
  }
  write_file(out_path(f, "trials.csv"), trials_csv(batches, tau));
  write_manifest(f, c, "trials");
  return report(violations);
}

int cmd_timing(const CommonFlags& f) {
  const ScenarioConfig c = resolve(f);
  std::vector<std::size_t> fish = c.timing_fish;
  if (f.n) fish = {*f.n};
  std::vector<PredictorKind> preds = c.timing_predictors;
  if (f.predictor) preds = {c.controller.predictor};
  const auto rows = timing_sweep(c, fish, c.timing_periods, preds, c.seed, c.timing_windows);
  write_file(out_path(f, "timings.csv"), timings_csv(rows));
  write_manifest(f, c, "timing");
  for (const auto& r : rows)
    std::cout << "timing: N=" << r.fish << " T=" << r.period << " T_h=" << r.horizon
              << " predictor=" << to_string(r.predictor) << " mean=" << r.mean_seconds << "s"
              << " budget=" << r.budget_seconds << "s over=" << r.over_budget << "/" << r.windows << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::vector<std::string>& labels, bool include_base) {
  const ScenarioConfig c = resolve(f);
  std::vector<SweepCase> cases;
  for (const auto& sc : standard_sweep_cases())
    if (labels.empty() || std::find(labels.begin(), labels.end(), sc.label) != labels.end()) cases.push_back(sc);
  std::vector<ComparisonRow> rows;
  if (include_base) rows = compare_predictors(c);
  const auto swept = sweep_parameters(c, cases);
  rows.insert(rows.end(), swept.begin(), swept.end());
  write_file(out_path(f, "comparisons.csv"), comparisons_csv(rows));
  write_manifest(f, c, "sweep");
  std::size_t violations = 0;
  for (const auto& r : rows) {
    std::cout << "sweep: case=" << r.label << " N=" << r.fish << " r_R=" << r.reference_radius
              << " eps_static=" << r.eps_static << " eps_dynamic=" << r.eps_dynamic << "\n";
    violations += r.protocol_violations;
  }
  if (violations > 0) std::cerr << "invariant violated: " << violations << " protocol violations\n";
  return violations == 0 ? 0 : 1;
}

int cmd_audit(const CommonFlags& f, std::size_t states) {
  const ScenarioConfig c = resolve(f);
  AuditOptions opts;
  opts.states = states;
  opts.seed = c.seed;
  ModelParams base = c.params;
  base.noise_scale = 0.0;
  const AuditSummary s = audit_bounds(opts, base);
  std::ostringstream csv;
  csv << "bound,checks,violations,worst_gap,worst_ratio\n";
  for (BoundKind k : {BoundKind::lemma_a1, BoundKind::lemma_a2, BoundKind::prop_a3, BoundKind::theorem1,
                      BoundKind::theorem2}) {
    const BoundTally& t = s.of(k);
    csv << to_string(k) << ',' << t.checks << ',' << t.violations << ',' << format_number(t.worst_gap) << ','
        << format_number(t.worst_ratio) << "\n";
    std::cout << "audit: " << to_string(k) << " checks=" << t.checks << " violations=" << t.violations
              << " worst_ratio=" << t.worst_ratio << "\n";
  }
  write_file(out_path(f, "audit.csv"), csv.str());
  write_manifest(f, c, "audit-bounds");
  std::cout << "audit: states=" << s.states << " sampler_failures=" << s.sampler_failures
            << " degenerate=" << s.degenerate << "\n";
  for (const auto& v : s.violations)
    std::cerr << "invariant violated: " << to_string(v.kind) << " state " << v.state << " fish " << v.fish
              << " lhs=" << v.lhs << " rhs=" << v.rhs << "\n";
  return s.total_violations() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon control of a simulated fish school"};
  app.require_subcommand(1);

  CommonFlags f;
  bool dump = false;
  std::vector<std::string> labels;
  bool no_base = false;
  std::size_t audit_states = 10000;

  auto* sim = app.add_subcommand("simulate", "Open-loop run of the noisy school without stimulus");
  add_common(sim, f);
  sim->add_flag("--trajectory", dump, "Write trajectory.json");

  auto* mpc = app.add_subcommand("mpc", "One closed-loop trial");
  add_common(mpc, f);
  mpc->add_flag("--trajectory", dump, "Write trajectory.json");

  auto* trials = app.add_subcommand("trials", "Seeded batch of closed-loop trials");
  add_common(trials, f);

  auto* timing = app.add_subcommand("timing", "Per-window solve times");
  add_common(timing, f);

  auto* sweep = app.add_subcommand("sweep", "Static vs dynamic comparison under parameter overrides");
  add_common(sweep, f);
  sweep->add_option("--cases", labels, "Subset of case labels a-j");
  sweep->add_flag("--no-base", no_base, "Skip the unperturbed grid");

  auto* audit = app.add_subcommand("audit-bounds", "Check the reduction error bounds on sampled states");
  add_common(audit, f);
  audit->add_option("--states", audit_states, "Number of sampled states")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(f, dump);
    if (mpc->parsed()) return cmd_mpc(f, dump);
    if (trials->parsed()) return cmd_trials(f);
    if (timing->parsed()) return cmd_timing(f);
    if (sweep->parsed()) return cmd_sweep(f, labels, !no_base);
    if (audit->parsed()) return cmd_audit(f, audit_states);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
