#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fishmpc/sampling.hpp"
#include "fishmpc/school.hpp"

using namespace fishmpc;
using std::numbers::pi;

namespace {

SchoolState make_state(std::vector<Vec3> x, std::vector<Vec3> v) {
  SchoolState s;
  s.x = std::move(x);
  for (const auto& d : v) s.V.push_back(normalize(d));
  return s;
}

SchoolState random_school(Rng& rng, std::size_t n, double radius) {
  SchoolState s;
  for (std::size_t i = 0; i < n; ++i) s.x.push_back(uniform_in_ball(rng, radius));
  for (std::size_t i = 0; i < n; ++i) s.V.push_back(uniform_on_sphere(rng));
  return s;
}

bool contains(const std::vector<std::size_t>& v, std::size_t j) { return std::find(v.begin(), v.end(), j) != v.end(); }

}  // namespace

TEST(ModelParams, DefaultsAndValidation) {
  ModelParams p = ModelParams::homogeneous(3, 10.0);
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.max_turn(), 0.069);
  EXPECT_DOUBLE_EQ(p.stride(), 5.0);
  p.r_orientation = 40.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = ModelParams::homogeneous(3, 10.0);
  p.half_view_angle = pi;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = ModelParams::homogeneous(3, -1.0);
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Classify, FacingPairInRepulsion) {
  const ModelParams p = ModelParams::homogeneous(2, 0.0);
  const auto s = make_state({{0, 0, 0}, {25, 0, 0}}, {{1, 0, 0}, {-1, 0, 0}});
  const NeighborSets n = classify_neighbors(s, p);
  EXPECT_EQ(n.repulsion[0], std::vector<std::size_t>{1});
  EXPECT_EQ(n.repulsion[1], std::vector<std::size_t>{0});
}

TEST(Classify, BlindZoneBehind) {
  const ModelParams p = ModelParams::homogeneous(2, 0.0);
  const auto s = make_state({{0, 0, 0}, {-375, 0, 0}}, {{1, 0, 0}, {1, 0, 0}});
  const NeighborSets n = classify_neighbors(s, p);
  EXPECT_TRUE(n.repulsion[0].empty() && n.orientation[0].empty() && n.attraction[0].empty());
  EXPECT_EQ(n.orientation[1], std::vector<std::size_t>{0});  // 0 is straight ahead of 1
}

TEST(Classify, BandBoundariesClosedOnTheRight) {
  const ModelParams p = ModelParams::homogeneous(2, 0.0);
  for (const auto& [d, band] : std::vector<std::pair<double, int>>{{50.0, 0}, {750.0, 1}, {1000.0, 2}, {1000.5, 3}}) {
    const auto s = make_state({{0, 0, 0}, {d, 0, 0}}, {{1, 0, 0}, {1, 0, 0}});
    const NeighborSets n = classify_neighbors(s, p);
    EXPECT_EQ(n.repulsion[0].size(), band == 0 ? 1u : 0u) << d;
    EXPECT_EQ(n.orientation[0].size(), band == 1 ? 1u : 0u) << d;
    EXPECT_EQ(n.attraction[0].size(), band == 2 ? 1u : 0u) << d;
  }
}

TEST(Classify, ConeEdge) {
  // neighbor at 3pi/4 from the heading is visible; slightly beyond is not
  const ModelParams p = ModelParams::homogeneous(2, 0.0);
  const double r = 400.0;
  for (const auto& [a, visible] : std::vector<std::pair<double, bool>>{{3 * pi / 4 - 1e-6, true}, {3 * pi / 4 + 1e-6, false}}) {
    const auto s = make_state({{0, 0, 0}, {r * std::cos(a), r * std::sin(a), 0}}, {{1, 0, 0}, {1, 0, 0}});
    EXPECT_EQ(classify_neighbors(s, p).orientation[0].size(), visible ? 1u : 0u);
  }
}

TEST(Classify, CoincidentFishRaise) {
  const ModelParams p = ModelParams::homogeneous(3, 0.0);
  const auto s = make_state({{0, 0, 0}, {1, 1, 1}, {1, 1, 1}}, {{1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
  try {
    (void)classify_neighbors(s, p);
    FAIL() << "expected CoincidentFish";
  } catch (const CoincidentFish& e) {
    EXPECT_EQ(e.first, 1u);
    EXPECT_EQ(e.second, 2u);
  }
}

TEST(Classify, ZonePartitionAgainstBruteForce) {
  Rng rng(21);
  const ModelParams p = ModelParams::homogeneous(60, 0.0);
  for (int t = 0; t < 20; ++t) {
    const SchoolState s = random_school(rng, 60, 900.0);
    const NeighborSets n = classify_neighbors(s, p);
    for (std::size_t i = 0; i < 60; ++i) {
      std::set<std::size_t> seen;
      for (const auto* set : {&n.repulsion[i], &n.orientation[i], &n.attraction[i]})
        for (std::size_t j : *set) {
          EXPECT_NE(j, i);
          EXPECT_TRUE(seen.insert(j).second) << "zones overlap";
        }
      for (std::size_t j = 0; j < 60; ++j) {
        if (j == i) continue;
        const Vec3 d = s.x[j] - s.x[i];
        const double dist = norm(d);
        const double ang = std::acos(std::clamp(dot(d, s.V[i].vec()) / dist, -1.0, 1.0));
        const bool in = ang <= p.half_view_angle && dist <= p.r_attraction;
        EXPECT_EQ(seen.count(j) == 1, in);
        if (!in) continue;
        if (dist <= p.r_repulsion) EXPECT_TRUE(contains(n.repulsion[i], j));
        else if (dist <= p.r_orientation) EXPECT_TRUE(contains(n.orientation[i], j));
        else EXPECT_TRUE(contains(n.attraction[i], j));
      }
    }
  }
}

TEST(Forces, IsolatedFishKeepsHeading) {
  const ModelParams p = ModelParams::homogeneous(1, 10.0);
  const auto s = make_state({{0, 0, 0}}, {{0, 1, 0}});
  const NeighborSets n = classify_neighbors(s, p);
  const std::vector<Vec3> u{{}};
  const Forces f = compute_forces(s, n, p, u);
  EXPECT_EQ(f.desired[0], (Vec3{0, 1, 0}));
}

TEST(Forces, IsolatedFishFollowsStimulus) {
  const ModelParams p = ModelParams::homogeneous(1, 10.0);
  const auto s = make_state({{0, 0, 0}}, {{0, 1, 0}});
  const std::vector<Vec3> u{{0, 0, 1}};
  const Forces f = compute_forces(s, classify_neighbors(s, p), p, u);
  EXPECT_EQ(f.desired[0], (Vec3{0, 0, 10}));
}

TEST(Forces, RepulsionPrevails) {
  const ModelParams p = ModelParams::homogeneous(3, 10.0);
  const auto s = make_state({{0, 0, 0}, {30, 0, 0}, {400, 0, 0}}, {{1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
  const std::vector<Vec3> u(3, Vec3{0, 1, 0});
  const Forces f = compute_forces(s, classify_neighbors(s, p), p, u);
  EXPECT_NEAR(norm(f.repulsion[0] - Vec3{-1, 0, 0}), 0.0, 1e-15);
  EXPECT_EQ(f.desired[0], f.repulsion[0]);
}

TEST(Forces, OrientationSum) {
  const ModelParams p = ModelParams::homogeneous(3, 0.0);
  const auto s = make_state({{0, 0, 0}, {300, 0, 0}, {0, 300, 0}}, {{1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
  const std::vector<Vec3> u(3, Vec3{});
  const Forces f = compute_forces(s, classify_neighbors(s, p), p, u);
  EXPECT_NEAR(norm(f.desired[0] - Vec3{2, 0, 0}), 0.0, 1e-15);
}

TEST(Forces, OrientationNormBoundedByDegree) {
  Rng rng(4);
  const ModelParams p = ModelParams::homogeneous(40, 0.0);
  const SchoolState s = random_school(rng, 40, 500.0);
  const NeighborSets n = classify_neighbors(s, p);
  for (std::size_t i = 0; i < 40; ++i)
    EXPECT_LE(norm(orientation_force(s, n, i)), static_cast<double>(n.orientation_degree(i)) + 1e-12);
}

TEST(Forces, RejectsNonUnitStimulus) {
  const ModelParams p = ModelParams::homogeneous(1, 1.0);
  const auto s = make_state({{0, 0, 0}}, {{1, 0, 0}});
  const std::vector<Vec3> u{{0, 2, 0}};
  EXPECT_THROW((void)compute_forces(s, classify_neighbors(s, p), p, u), InvalidArgument);
}

TEST(Step, StraightLineWhenDesiredEqualsHeading) {
  const ModelParams p = ModelParams::homogeneous(1, 0.0);
  const auto s = make_state({{1, 2, 3}}, {{0, 0, 1}});
  const SchoolState n = step(s, p, Vec3{});
  EXPECT_EQ(n.V[0], s.V[0]);
  EXPECT_EQ(n.x[0], (Vec3{1, 2, 8}));
  EXPECT_EQ(n.k, 1);
}

TEST(Step, NonBindingCapLandsOnDesired) {
  const ModelParams p = ModelParams::homogeneous(1, 1.0);
  const double a = p.max_turn() / 2;
  const auto s = make_state({{0, 0, 0}}, {{1, 0, 0}});
  const UnitVec3 u = normalize({std::cos(a), std::sin(a), 0});
  const SchoolState n = step(s, p, u.vec());
  EXPECT_NEAR(norm(n.V[0].vec() - u.vec()), 0.0, 1e-12);
}

TEST(Step, BindingCapTurnsExactly) {
  const ModelParams p = ModelParams::homogeneous(1, 1.0);
  const auto s = make_state({{0, 0, 0}}, {{1, 0, 0}});
  const SchoolState n = step(s, p, Vec3{0, 1, 0});
  EXPECT_NEAR(angle_between(s.V[0], n.V[0]), 0.069, 1e-12);
  EXPECT_NEAR(n.V[0].x(), std::cos(0.069), 1e-12);
  EXPECT_NEAR(n.V[0].y(), std::sin(0.069), 1e-12);
}

TEST(Step, PositionsUsePreStepHeading) {
  const ModelParams p = ModelParams::homogeneous(1, 1.0);
  const auto s = make_state({{0, 0, 0}}, {{1, 0, 0}});
  const SchoolState n = step(s, p, Vec3{0, 1, 0});
  EXPECT_EQ(n.x[0], (Vec3{5, 0, 0}));
}

TEST(Step, InvariantsOverNoisyRun) {
  Rng rng(8);
  ModelParams p = ModelParams::homogeneous(30, 10.0);
  p.noise_scale = 10.0;
  SchoolState s = random_school(rng, 30, 500.0);
  AngularNoise noise(42, p);
  for (int k = 0; k < 200; ++k) {
    const std::vector<Vec3> u(30, Vec3{0, 0, 1});
    const SchoolState capped = step(s, p, u);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_LE(angle_between(s.V[i], capped.V[i]), p.max_turn() + 1e-9);
    s = step(s, p, u, &noise);
    for (const auto& v : s.V) ASSERT_NEAR(norm(v.vec()), 1.0, 1e-9);
  }
}

TEST(Step, ZeroNoiseEqualsNoNoise) {
  Rng rng(10);
  const ModelParams p = ModelParams::homogeneous(25, 10.0);  // noise_scale 0
  SchoolState a = random_school(rng, 25, 500.0);
  SchoolState b = a;
  AngularNoise zero(3, p);
  for (int k = 0; k < 50; ++k) {
    a = step(a, p, Vec3{1, 0, 0});
    b = step(b, p, Vec3{1, 0, 0}, &zero);
  }
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(a.x[i], b.x[i]);
    EXPECT_EQ(a.V[i], b.V[i]);
  }
}

TEST(Step, DeterministicPerSeed) {
  Rng rng(12);
  ModelParams p = ModelParams::homogeneous(20, 10.0);
  p.noise_scale = 10.0;
  const SchoolState init = random_school(rng, 20, 500.0);
  auto run = [&](std::uint64_t seed) {
    AngularNoise noise(seed, p);
    SchoolState s = init;
    for (int k = 0; k < 100; ++k) s = step(s, p, Vec3{0, 1, 0}, &noise);
    return s;
  };
  const SchoolState a = run(5), b = run(5), c = run(6);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(a.x[i], b.x[i]);
    EXPECT_EQ(a.V[i], b.V[i]);
  }
  EXPECT_NE(a.x[0], c.x[0]);
}

TEST(Noise, AxisStatistics) {
  ModelParams p = ModelParams::homogeneous(1, 0.0);
  p.noise_scale = 10.0;
  AngularNoise noise(77, p);
  const int m = 20000;
  Vec3 mean;
  double angle_sum = 0.0;
  for (int t = 0; t < m; ++t) {
    const auto [axis, angle] = noise.draw();
    mean += axis.vec() / m;
    EXPECT_GE(angle, 0.0);
    angle_sum += angle;
  }
  // each axis component has variance 1/3
  const double tol = 4.0 * std::sqrt(1.0 / 3.0 / m);
  EXPECT_LT(std::abs(mean.x), tol);
  EXPECT_LT(std::abs(mean.y), tol);
  EXPECT_LT(std::abs(mean.z), tol);
  // E|z| = sqrt(2/pi)
  const double expected = noise.angle_scale() * std::sqrt(2.0 / pi);
  EXPECT_NEAR(angle_sum / m, expected, 0.02 * expected);
}

TEST(Aggregates, MassCenterAndMeanDirection) {
  const auto s = make_state({{0, 0, 0}, {2, 0, 0}}, {{1, 0, 0}, {0, 1, 0}});
  EXPECT_EQ(mass_center(s), (Vec3{1, 0, 0}));
  EXPECT_EQ(mean_direction(s), (Vec3{0.5, 0.5, 0}));
  EXPECT_NEAR(polarization(s), std::sqrt(0.5), 1e-15);

  Rng rng(2);
  const SchoolState r = random_school(rng, 100, 300.0);
  double sx = 0, sy = 0, sz = 0;
  for (const auto& x : r.x) sx += x.x, sy += x.y, sz += x.z;
  const Vec3 c = mass_center(r);
  EXPECT_NEAR(c.x, sx / 100, 1e-12);
  EXPECT_NEAR(c.y, sy / 100, 1e-12);
  EXPECT_NEAR(c.z, sz / 100, 1e-12);
  const auto same = make_state({{3, 3, 3}, {3, 3, 3}}, {{1, 0, 0}, {1, 0, 0}});
  EXPECT_EQ(mass_center(same), (Vec3{3, 3, 3}));
}

TEST(Emergence, NoiseFreeSchoolsAlign) {
  const ModelParams p = ModelParams::homogeneous(20, 0.0);
  int aligned = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(derive_seed(99, static_cast<std::uint64_t>(seed)));
    SchoolState s = random_school(rng, 20, p.r_attraction / 2);
    bool ok = false;
    for (int k = 0; k < 500 && !ok; ++k) {
      s = step(s, p, Vec3{});
      ok = polarization(s) > 0.9;
    }
    aligned += ok ? 1 : 0;
  }
  EXPECT_GE(aligned, 18);
}
