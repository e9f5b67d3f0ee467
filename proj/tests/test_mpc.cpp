#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fishmpc/mpc.hpp"
#include "fishmpc/optimizer.hpp"
#include "fishmpc/sampling.hpp"

using namespace fishmpc;
using std::numbers::pi;

namespace {

// Aligned hexagonal school of radius 300 around `center`, in the plane
// normal to `heading`: complete orientation graph, no attraction.
SchoolState hexagon(const Vec3& center, const Vec3& heading) {
  const UnitVec3 h = normalize(heading);
  const Vec3 e1 = detail::fallback_tangent(h.vec());
  const Vec3 e2 = cross(h.vec(), e1);
  SchoolState s;
  for (int k = 0; k < 6; ++k) {
    const double a = k * pi / 3 + 0.1;
    s.x.push_back(center + 300.0 * (std::cos(a) * e1 + std::sin(a) * e2));
    s.V.push_back(h);
  }
  return s;
}

ControllerConfig config(PredictorKind kind, int period = 30, int horizon = 60) {
  ControllerConfig c;
  c.period = period;
  c.horizon = horizon;
  c.predictor = kind;
  return c;
}

FrozenAggregates free_motion(double stride) {
  FrozenAggregates agg;
  agg.stride = stride;
  return agg;
}

}  // namespace

TEST(Reference, Distance) {
  const ReferenceSet r = ReferenceSet::sphere({1, 0, 0}, 10.0);
  EXPECT_DOUBLE_EQ(distance_to_reference({11, 0, 0}, r), 0.0);
  EXPECT_DOUBLE_EQ(distance_to_reference({1, 0, 0}, r), 10.0);
  EXPECT_DOUBLE_EQ(distance_to_reference({1, 20, 0}, r), 10.0);
  EXPECT_THROW((void)ReferenceSet::sphere({}, 0.0), InvalidArgument);
  EXPECT_EQ(nearest_reference_point({1, 0, 5}, r), (Vec3{1, 0, 10}));
}

TEST(Controller, Validation) {
  EXPECT_NO_THROW(config(PredictorKind::static_weight).validate());
  EXPECT_THROW(config(PredictorKind::static_weight, 0, 10).validate(), InvalidArgument);
  EXPECT_THROW(config(PredictorKind::static_weight, 30, 20).validate(), InvalidArgument);
  EXPECT_THROW(config(PredictorKind::static_weight, 30, 45).validate(), InvalidArgument);
  EXPECT_EQ(config(PredictorKind::static_weight, 30, 90).blocks(), 3);
  EXPECT_EQ(parse_predictor("orig"), PredictorKind::original);
  EXPECT_EQ(parse_predictor("dynamic"), PredictorKind::dynamic_weight);
  EXPECT_THROW((void)parse_predictor("best"), InvalidArgument);
}

TEST(Schedule, AnglesRoundTripAndBlocks) {
  const std::vector<double> a{0.3, -0.2, 2.5, 1.0};
  const StimulusSchedule s = StimulusSchedule::from_angles(a, 5);
  EXPECT_EQ(s.length(), 10);
  EXPECT_EQ(s.at(4), s.blocks[0]);
  EXPECT_EQ(s.at(5), s.blocks[1]);
  const auto back = s.angles();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(back[i], a[i], 1e-12);
  for (const auto& b : s.blocks) EXPECT_NEAR(norm(b.vec()), 1.0, 1e-15);
}

TEST(HorizonCost, RadialEscapeClosedForm) {
  const ReferenceSet ref = ReferenceSet::sphere({}, 1000.0);
  const ReducedState start{{1000, 0, 0}, {1, 0, 0}};
  const StimulusSchedule s = StimulusSchedule::constant(normalize({0, 1, 0}), 10, 3);
  const double cost = horizon_cost(start, free_motion(5.0), s, ref);
  double expected = 0.0;
  for (int m = 0; m <= 30; ++m) expected += m * 5.0;
  EXPECT_NEAR(cost, expected, 1e-9);
}

TEST(HorizonCost, TangentialMotionClosedForm) {
  const ReferenceSet ref = ReferenceSet::sphere({}, 1000.0);
  const ReducedState start{{1000, 0, 0}, {0, 1, 0}};
  const StimulusSchedule s = StimulusSchedule::constant(normalize({0, 1, 0}), 10, 2);
  const double cost = horizon_cost(start, free_motion(0.01), s, ref);
  double expected = 0.0;
  for (int m = 0; m <= 20; ++m) expected += std::hypot(1000.0, 0.01 * m) - 1000.0;
  EXPECT_NEAR(cost, expected, 1e-9);
}

TEST(HorizonCost, FullAndReducedAgreeForAlignedSchool) {
  ModelParams p = ModelParams::homogeneous(6, 2.0);
  p.turning_rate = 40.0;  // cap never binds
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const SchoolState s = hexagon({2000, 0, 0}, {0, 1, 0});
  const FrozenAggregates agg =
      freeze_aggregates(s, classify_neighbors(s, p), p, WeightVector::uniform(6));
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    // keep headings within 45 degrees of the start so the graph stays complete
    const Vec3 h = normalize(Vec3{0, 1, 0} + 0.5 * uniform_on_sphere(rng).vec()).vec();
    const StimulusSchedule sched = StimulusSchedule::constant(normalize(h), 30, 2);
    const double full = horizon_cost(s, p, sched, ref);
    const double reduced = horizon_cost(init_reduced(s), agg, sched, ref);
    EXPECT_NEAR(full, reduced, 1e-6 * 61);
  }
}

TEST(NelderMead, MinimizesQuadratic) {
  auto f = [](const std::vector<double>& x) { return (x[0] - 1) * (x[0] - 1) + 10 * (x[1] + 2) * (x[1] + 2); };
  const NelderMeadResult r = nelder_mead(f, {0.0, 0.0}, {1000, 1e-10, 0.5});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], -2.0, 1e-4);
}

TEST(NelderMead, ReportsBudgetExhaustion) {
  auto rosen = [](const std::vector<double>& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  const NelderMeadResult r = nelder_mead(rosen, {-1.2, 1.0}, {5, 1e-12, 0.3});
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 5);
}

TEST(Optimize, BeatsEveryGridPointForSingleBlock) {
  const ModelParams p = ModelParams::homogeneous(6, 10.0);
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const ControllerConfig cfg = config(PredictorKind::static_weight, 30, 30);
  Rng rng(5);
  for (int t = 0; t < 5; ++t) {
    const Vec3 c = (2000.0 + 400.0 * (t - 2)) * uniform_on_sphere(rng).vec();
    const SchoolState s = hexagon(c, uniform_on_sphere(rng).vec());
    const auto predictor = make_predictor(s, p, cfg, ref, Vec3{});
    const OptimizeResult res = optimize_schedule(*predictor, cfg, ref, 11);
    double grid_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const std::vector<double> a{-pi + (i + 0.5) * 2 * pi / 10, -pi / 2 + (j + 0.5) * pi / 10};
        grid_min = std::min(grid_min, predictor->cost(StimulusSchedule::from_angles(a, 30)));
      }
    EXPECT_LE(res.cost, grid_min + 1e-6) << t;
    EXPECT_DOUBLE_EQ(res.cost, predictor->cost(res.schedule));
  }
}

TEST(Optimize, NoWorseThanTangentHeuristic) {
  const ModelParams p = ModelParams::homogeneous(6, 10.0);
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const ControllerConfig cfg = config(PredictorKind::dynamic_weight);
  const SchoolState s = hexagon({2000, 0, 0}, {0, 0, 1});
  const auto predictor = make_predictor(s, p, cfg, ref, Vec3{});
  const OptimizeResult res = optimize_schedule(*predictor, cfg, ref, 1);
  const auto tangent = tangent_start(*predictor, ref, cfg.blocks());
  EXPECT_LE(res.cost, predictor->cost(StimulusSchedule::from_angles(tangent, cfg.period)));
  for (const auto& b : res.schedule.blocks) EXPECT_NEAR(norm(b.vec()), 1.0, 1e-12);
}

TEST(Optimize, TurnsBackTowardReference) {
  // school outside the sphere heading straight away from it
  const ModelParams p = ModelParams::homogeneous(6, 10.0);
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const ControllerConfig cfg = config(PredictorKind::static_weight);
  Rng rng(7);
  int good = 0;
  const int seeds = 20;
  for (int t = 0; t < seeds; ++t) {
    const Vec3 out = normalize(Vec3{1, 0, 0} + 0.2 * uniform_on_sphere(rng).vec()).vec();
    const SchoolState s = hexagon(3000.0 * out, out);
    const auto predictor = make_predictor(s, p, cfg, ref, Vec3{});
    const OptimizeResult res = optimize_schedule(*predictor, cfg, ref, derive_seed(9, t));
    const Vec3 toward = nearest_reference_point(predictor->anchor_center(), ref) - predictor->anchor_center();
    if (dot(res.schedule.blocks.front().vec(), toward) > 0.0) ++good;
  }
  EXPECT_GE(good, 18);
}

TEST(Optimize, DeterministicPerSeed) {
  const ModelParams p = ModelParams::homogeneous(6, 10.0);
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const ControllerConfig cfg = config(PredictorKind::dynamic_weight);
  const SchoolState s = hexagon({1500, 500, 0}, {1, 1, 1});
  const auto a = optimize_schedule(*make_predictor(s, p, cfg, ref, Vec3{}), cfg, ref, 4);
  const auto b = optimize_schedule(*make_predictor(s, p, cfg, ref, Vec3{}), cfg, ref, 4);
  EXPECT_EQ(a.angles, b.angles);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(Predictor, AnchorsAtObservedMassCenter) {
  Rng rng(13);
  const AuditSample s = *sample_audit_state(rng, 30, 4.0, ModelParams{});
  const NeighborSets sets = classify_neighbors(s.state, s.params);
  const FrozenAggregates agg = freeze_aggregates(s.state, sets, s.params, WeightVector::uniform(30));
  const ReferenceSet ref = ReferenceSet::sphere({}, 1000.0);
  const ReducedPredictor pred(PredictorKind::static_weight, agg, init_reduced(s.state), {}, 0, ref);
  EXPECT_EQ(pred.anchor_center(), mass_center(s.state));
  EXPECT_EQ(pred.anchor_direction(), mean_direction(s.state));
}

TEST(Predictor, LeadInRollsInFlightStimulus) {
  ModelParams p = ModelParams::homogeneous(6, 2.0);
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const SchoolState s = hexagon({0, 0, 0}, {1, 0, 0});
  const ControllerConfig cfg = config(PredictorKind::static_weight, 10, 20);
  const Vec3 lead{0, 1, 0};
  const auto pred = make_predictor(s, p, cfg, ref, lead);
  const FrozenAggregates agg = freeze_aggregates(s, classify_neighbors(s, p), p, WeightVector::uniform(6));
  ReducedState r = init_reduced(s);
  for (int m = 0; m < 10; ++m) r = predict_step(r, agg, lead);
  EXPECT_EQ(pred->anchor_center(), r.center);
  EXPECT_EQ(pred->anchor_direction(), r.direction);
}

TEST(DynamicWeights, FallBackToUniform) {
  const ModelParams p = ModelParams::homogeneous(2, 1.0);
  SchoolState s;
  s.x = {{0, 0, 0}, {0, 5000, 0}};
  s.V = {normalize({1, 0, 0}), normalize({1, 0, 0})};
  EventLog log;
  const WeightVector w = dynamic_weights(classify_neighbors(s, p), &log);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_EQ(log.entries.size(), 1u);
}

class ClosedLoop : public ::testing::Test {
 protected:
  ModelParams params = [] {
    ModelParams p = ModelParams::homogeneous(12, 10.0);
    p.noise_scale = 10.0;
    return p;
  }();
  ReferenceSet ref = ReferenceSet::sphere({}, 1500.0);
  SchoolState init = [] {
    Rng rng(21);
    SchoolState s;
    for (int i = 0; i < 12; ++i) s.x.push_back(Vec3{1500, 0, 0} + uniform_in_ball(rng, 400.0));
    for (int i = 0; i < 12; ++i) s.V.push_back(von_mises_fisher(rng, normalize({0, 1, 0}), 10.0));
    return s;
  }();
};

TEST_F(ClosedLoop, ProtocolInvariantsHold) {
  for (PredictorKind k : {PredictorKind::static_weight, PredictorKind::dynamic_weight}) {
    const ControllerConfig cfg = config(k, 20, 40);
    const MpcRun run = run_mpc(init, params, cfg, ref, 200, 3);
    EXPECT_TRUE(check_protocol(run, cfg).empty());
    ASSERT_EQ(run.windows.size(), 9u);
    EXPECT_EQ(run.error.size(), 201u);
    EXPECT_EQ(run.applied.size(), 200u);
    for (long k2 = 0; k2 < 20; ++k2) EXPECT_EQ(run.applied[static_cast<std::size_t>(k2)], (Vec3{}));
    for (double e : run.error) EXPECT_GE(e, 0.0);
  }
}

TEST_F(ClosedLoop, DecisionsDependOnlyOnTheirObservation) {
  // re-solving each window offline from the recorded observation and the
  // in-flight stimulus reproduces the applied block bit for bit
  const ControllerConfig cfg = config(PredictorKind::dynamic_weight, 20, 40);
  MpcOptions opts;
  opts.record_states = true;
  const MpcRun run = run_mpc(init, params, cfg, ref, 200, 8, opts);
  std::vector<double> warm;
  for (std::size_t w = 0; w < run.windows.size(); ++w) {
    const long k = static_cast<long>(w) * cfg.period;
    const SchoolState& obs = run.states[static_cast<std::size_t>(k)];
    ASSERT_EQ(obs.k, k);
    const auto pred = make_predictor(obs, params, cfg, ref, run.applied[static_cast<std::size_t>(k)]);
    const OptimizeResult res = optimize_schedule(*pred, cfg, ref, solver_seed(8, static_cast<long>(w)),
                                                 warm.empty() ? nullptr : &warm);
    EXPECT_EQ(res.angles, run.windows[w].solution);
    for (long j = k + cfg.period; j < std::min<long>(k + 2 * cfg.period, 200); ++j)
      EXPECT_EQ(run.applied[static_cast<std::size_t>(j)], res.schedule.blocks.front().vec());
    warm = shifted_warm_start(res.angles);
  }
}

TEST_F(ClosedLoop, InsensitiveFishIgnoreControl) {
  ModelParams p = params;
  p.sensitivity.assign(12, 0.0);
  const ControllerConfig cfg = config(PredictorKind::static_weight, 20, 40);
  const MpcRun controlled = run_mpc(init, p, cfg, ref, 120, 5);
  const MpcRun free = simulate(init, p, ref, 120, 5);
  ASSERT_EQ(controlled.centers.size(), free.centers.size());
  for (std::size_t k = 0; k < free.centers.size(); ++k) EXPECT_EQ(controlled.centers[k], free.centers[k]);
}

TEST_F(ClosedLoop, Deterministic) {
  const ControllerConfig cfg = config(PredictorKind::dynamic_weight, 20, 40);
  const MpcRun a = run_mpc(init, params, cfg, ref, 100, 17);
  const MpcRun b = run_mpc(init, params, cfg, ref, 100, 17);
  EXPECT_EQ(a.error, b.error);
  EXPECT_EQ(a.applied, b.applied);
}

TEST(ClosedLoopEnvelope, NoiseFreeTangentialSchoolStaysClose) {
  // xi / n_i = 0.6: the stimulus is weaker than the orientation pull
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const SchoolState s = hexagon({2000, 0, 0}, {0, 1, 0});
  for (PredictorKind k : {PredictorKind::original, PredictorKind::static_weight, PredictorKind::dynamic_weight}) {
    const ModelParams p = ModelParams::homogeneous(6, 3.0);
    const ControllerConfig cfg = config(k);
    const MpcRun run = run_mpc(s, p, cfg, ref, 600, 1);
    for (double e : run.error) EXPECT_LT(e, p.stride() * cfg.period) << to_string(k);
  }
}

TEST(ClosedLoopEnvelope, FullModelPredictorHoldsUnderStrongDrive) {
  const ModelParams p = ModelParams::homogeneous(6, 10.0);
  const ReferenceSet ref = ReferenceSet::sphere({}, 2000.0);
  const SchoolState s = hexagon({2000, 0, 0}, {0, 1, 0});
  const ControllerConfig cfg = config(PredictorKind::original);
  const MpcRun run = run_mpc(s, p, cfg, ref, 600, 1);
  for (double e : run.error) EXPECT_LT(e, p.stride() * cfg.period);
}

TEST(ClosedLoopArgs, RejectShortRuns) {
  const ModelParams p = ModelParams::homogeneous(6, 10.0);
  const SchoolState s = hexagon({2000, 0, 0}, {0, 1, 0});
  EXPECT_THROW((void)run_mpc(s, p, config(PredictorKind::static_weight), ReferenceSet::sphere({}, 2000.0), 59, 1),
               InvalidArgument);
}
