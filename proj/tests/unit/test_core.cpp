#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "keba/core.hpp"
#include "oracle_values.hpp"

namespace keba {
namespace {

constexpr double kExact = 1e-12;

KebaParams unit_params() {
  KebaParams p;
  p.activation_potential = 2.0;
  p.persistence = 1.0;
  p.stability_speed = 0.05;
  return p;
}

SensorVector constant_vector(double value) {
  SensorVector v;
  v.fill(value);
  return v;
}

// Drives the hierarchy with a fixed input until level 0 is fully stable.
void settle(Hierarchy& h, const SensorVector& input, int ticks = 200) {
  for (int i = 0; i < ticks; ++i) h.ingest_protokoncepts(input);
}

// ---- membership ----

TEST(Membership, InnerBallIsOne) { EXPECT_DOUBLE_EQ(membership(0.05, 0.1, 0.2), 1.0); }

TEST(Membership, OutsideOuterBallIsZero) { EXPECT_DOUBLE_EQ(membership(0.25, 0.1, 0.2), 0.0); }

TEST(Membership, MidpointOfRampIsHalf) { EXPECT_NEAR(membership(0.15, 0.1, 0.2), 0.5, kExact); }

TEST(Membership, RejectsInvalidRadii) {
  EXPECT_THROW(membership(0.1, 0.2, 0.2), std::invalid_argument);
  EXPECT_THROW(membership(0.1, 0.3, 0.2), std::invalid_argument);
  EXPECT_THROW(membership(-0.1, 0.1, 0.2), std::invalid_argument);
}

TEST(MembershipProperty, BoundedNonIncreasingAndContinuous) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double r1 = 0.001 + u(rng);
    const double r2 = r1 + 0.001 + u(rng);
    const double d1 = 2.5 * u(rng);
    const double d2 = d1 + 0.5 * u(rng);
    const double m1 = membership(d1, r1, r2);
    const double m2 = membership(d2, r1, r2);
    ASSERT_GE(m1, 0.0);
    ASSERT_LE(m1, 1.0);
    ASSERT_GE(m1, m2);
    // Lipschitz with constant 1/(r2-r1): no jumps.
    ASSERT_LE(m1 - m2, (d2 - d1) / (r2 - r1) + 1e-12);
  }
}

// ---- activation ----

TEST(Activation, RiseAtLevelZero) {
  EXPECT_NEAR(update_activation(1.0, 0.0, 0, unit_params()), oracle::kActivationRise, kExact);
}

TEST(Activation, SlowerDecayAtLevelTwo) {
  EXPECT_NEAR(update_activation(0.0, 1.0, 2, unit_params()), oracle::kActivationDecayLevel2, kExact);
}

TEST(Activation, FixedPoint) {
  KebaParams p = unit_params();
  p.persistence = 3.7;
  for (int n = 0; n < 4; ++n) EXPECT_NEAR(update_activation(0.42, 0.42, n, p), 0.42, kExact);
}

TEST(ActivationProperty, ConvexAndLevelMonotone) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KebaParams p = unit_params();
  for (int trial = 0; trial < 2000; ++trial) {
    p.activation_potential = 1.0 + 3.0 * u(rng);
    p.persistence = 0.01 + 4.0 * u(rng);
    const double v = u(rng);
    const double a_prev = u(rng);
    double previous_gap = -1.0;
    for (int n = 0; n < 5; ++n) {
      const double a = update_activation(v, a_prev, n, p);
      ASSERT_GE(a, std::min(v, a_prev) - 1e-15);
      ASSERT_LE(a, std::max(v, a_prev) + 1e-15);
      const double gap = std::abs(a - v);
      ASSERT_GE(gap, previous_gap - 1e-15);
      previous_gap = gap;
    }
  }
}

// ---- stability ----

TEST(Stability, ClampsAtUpperBound) { EXPECT_DOUBLE_EQ(update_stability(1.0, 0.3, 0.3, 0.05), 1.0); }

TEST(Stability, Step) { EXPECT_NEAR(update_stability(0.5, 0.6, 0.3, 0.05), oracle::kStabilityStep, kExact); }

TEST(Stability, ClampsAtLowerBound) { EXPECT_DOUBLE_EQ(update_stability(0.1, 0.95, 0.05, 0.05), 0.0); }

TEST(StabilityProperty, BoundedAndReachesOneUnderConstantActivation) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double s = update_stability(u(rng), u(rng), u(rng), u(rng));
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
  }
  for (double kappa : {0.05, 0.1, 0.3, 0.07}) {
    double s = 0.0;
    const int ticks = static_cast<int>(std::ceil(1.0 / kappa));
    for (int i = 0; i < ticks; ++i) s = update_stability(s, 0.4, 0.4, kappa);
    EXPECT_DOUBLE_EQ(s, 1.0) << "kappa " << kappa;
  }
}

// ---- protokoncepts ----

TEST(Ingest, DirectMapping) {
  Hierarchy h(unit_params(), 1);
  SensorVector v{};
  v[3] = 0.9;
  h.ingest_protokoncepts(v);
  for (std::size_t i = 0; i < kProtokonceptCount; ++i) EXPECT_DOUBLE_EQ(h.level(0)[i].v, i == 3 ? 0.9 : 0.0);
}

TEST(Ingest, RejectsWrongDimension) {
  Hierarchy h(unit_params(), 1);
  std::vector<double> short_vector(14, 0.0);
  EXPECT_THROW(h.ingest_protokoncepts(short_vector), std::invalid_argument);
}

TEST(Ingest, ConstantZeroInputStabilizes) {
  Hierarchy h(unit_params(), 1);
  settle(h, constant_vector(0.0), 30);
  for (const auto& k : h.level(0)) {
    EXPECT_DOUBLE_EQ(k.a, 0.0);
    EXPECT_DOUBLE_EQ(k.s, 1.0);
  }
}

TEST(Ingest, AlternatingChannelKeepsStabilityPinned) {
  Hierarchy h(unit_params(), 1);
  double max_s = 0.0;
  for (int t = 0; t < 200; ++t) {
    SensorVector v{};
    v[0] = (t % 2 == 0) ? 1.0 : 0.0;
    h.ingest_protokoncepts(v);
    max_s = std::max(max_s, h.level(0)[0].s);
  }
  EXPECT_NEAR(max_s, oracle::kAlternatingMaxStability, kExact);
}

// ---- center and radii ----

Koncept two_parent_koncept(double r1 = 0.1, double r2 = 0.2) {
  Koncept k;
  k.level = 1;
  k.parents = {KonceptId{0}, KonceptId{1}};
  k.center = {0.5, 0.5};
  k.r1 = r1;
  k.r2 = r2;
  k.v = 1.0;
  return k;
}

TEST(AdaptCenter, Step) {
  KebaParams p = unit_params();
  p.center_rate = 0.1;
  Koncept k = two_parent_koncept();
  const std::vector<double> target{0.7, 0.5};
  adapt_center(k, target, p);
  EXPECT_NEAR(k.center[0], oracle::kCenterX, kExact);
  EXPECT_NEAR(k.center[1], oracle::kCenterY, kExact);
}

TEST(AdaptCenter, ZeroValueLeavesCenter) {
  Koncept k = two_parent_koncept();
  k.v = 0.0;
  const std::vector<double> target{0.9, 0.1};
  adapt_center(k, target, unit_params());
  EXPECT_EQ(k.center, (std::vector<double>{0.5, 0.5}));
}

TEST(AdaptCenter, FullStepJumpsToTarget) {
  KebaParams p = unit_params();
  p.center_rate = 1.0;
  Koncept k = two_parent_koncept();
  const std::vector<double> target{0.9, 0.1};
  adapt_center(k, target, p);
  EXPECT_NEAR(k.center[0], 0.9, kExact);
  EXPECT_NEAR(k.center[1], 0.1, kExact);
}

TEST(AdaptCenterProperty, StrictContraction) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KebaParams p = unit_params();
  for (int trial = 0; trial < 2000; ++trial) {
    Koncept k = two_parent_koncept();
    k.center = {u(rng), u(rng)};
    std::vector<double> target{u(rng), u(rng)};
    if (target == k.center) continue;
    k.v = 0.01 + 0.99 * u(rng);
    p.center_rate = 0.01 + 0.99 * u(rng);
    const double before = euclidean_distance(target, k.center);
    adapt_center(k, target, p);
    ASSERT_LT(euclidean_distance(target, k.center), before);
  }
}

TEST(AdaptRadii, ShrinksInnerWhenDeepInside) {
  KebaParams p = unit_params();
  p.radius_rate = 0.01;
  Koncept k = two_parent_koncept();
  adapt_radii(k, 0.02, p);
  EXPECT_NEAR(k.r1, 0.09, kExact);
  EXPECT_DOUBLE_EQ(k.r2, 0.2);
}

TEST(AdaptRadii, GrowsInnerBetweenBalls) {
  KebaParams p = unit_params();
  p.radius_rate = 0.01;
  Koncept k = two_parent_koncept();
  adapt_radii(k, 0.14, p);
  EXPECT_NEAR(k.r1, 0.11, kExact);
  EXPECT_DOUBLE_EQ(k.r2, 0.2);
}

TEST(AdaptRadii, IgnoresDistancesWithinNoise) {
  KebaParams p = unit_params();
  p.noise_floor = 0.05;
  Koncept k = two_parent_koncept();
  adapt_radii(k, 0.04, p);
  EXPECT_DOUBLE_EQ(k.r1, 0.1);
  EXPECT_DOUBLE_EQ(k.r2, 0.2);
}

TEST(AdaptRadiiProperty, OrderingSurvivesAnySequence) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KebaParams p = unit_params();
  for (int trial = 0; trial < 200; ++trial) {
    p.radius_rate = 0.001 + 0.2 * u(rng);
    Koncept k = two_parent_koncept(0.01 + 0.3 * u(rng), 0.5);
    for (int i = 0; i < 200; ++i) {
      adapt_radii(k, 0.6 * u(rng), p);
      ASSERT_GT(k.r1, 0.0);
      ASSERT_LT(k.r1, k.r2);
    }
  }
}

// ---- links ----

TEST(InitLinks, LevelZeroIsMedium) {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 200; ++i) {
    for (double l : init_links(0, {}, rng)) {
      EXPECT_GE(l, 0.4);
      EXPECT_LE(l, 0.6);
    }
  }
}

TEST(InitLinks, ChildOfSaturatedParents) {
  std::mt19937_64 rng(17);
  const std::vector<ActionLinks> parents{{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  for (int i = 0; i < 200; ++i) {
    for (double l : init_links(1, parents, rng)) {
      EXPECT_GE(l, oracle::kChildLinkLow - kExact);
      EXPECT_LE(l, oracle::kChildLinkHigh + kExact);
    }
  }
}

// ---- reinforcement and vote ----

Hierarchy hierarchy_with_links(const std::vector<ActionLinks>& active_links, double a = 0.8) {
  KebaParams p = unit_params();
  std::vector<std::vector<Koncept>> levels(1);
  std::uint32_t id = 0;
  for (std::size_t i = 0; i < kProtokonceptCount; ++i) {
    Koncept k;
    k.id = KonceptId{id++};
    k.links = {0.5, 0.5, 0.5};
    levels[0].push_back(k);
  }
  levels.emplace_back();
  for (const auto& links : active_links) {
    Koncept k;
    k.id = KonceptId{id++};
    k.level = 1;
    k.parents = {KonceptId{0}, KonceptId{1}};
    k.center = {0.5, 0.5};
    k.r1 = 0.1;
    k.r2 = 0.25;
    k.v = a;
    k.a = a;
    k.links = links;
    levels[1].push_back(k);
  }
  return Hierarchy::restore(p, levels, id, std::mt19937_64(1), 0);
}

TEST(Reinforce, RewardedMatchSetsOne) {
  auto h = hierarchy_with_links({{0.6, 0.5, 0.4}});
  h.reinforce(Action::eat, StimulusSignal::positive(0.1));
  EXPECT_DOUBLE_EQ(h.level(1)[0].links[0], 1.0);
}

TEST(Reinforce, PunishedMatchSetsZero) {
  auto h = hierarchy_with_links({{0.6, 0.5, 0.4}});
  h.reinforce(Action::eat, StimulusSignal::negative(0.05));
  EXPECT_DOUBLE_EQ(h.level(1)[0].links[0], 0.0);
}

TEST(Reinforce, PunishedMismatchSetsOne) {
  auto h = hierarchy_with_links({{0.6, 0.5, 0.4}});
  h.reinforce(Action::drink, StimulusSignal::negative(0.05));
  EXPECT_DOUBLE_EQ(h.level(1)[0].links[0], 1.0);
  EXPECT_DOUBLE_EQ(h.level(1)[0].links[1], 0.5);
}

TEST(Reinforce, InactiveKonceptsUntouched) {
  auto h = hierarchy_with_links({{0.6, 0.5, 0.4}});
  h.reinforce(Action::eat, StimulusSignal::positive(0.1));
  for (const auto& k : h.level(0)) EXPECT_EQ(k.links, (ActionLinks{0.5, 0.5, 0.5}));
}

TEST(Reinforce, ToyHierarchyLearnsToEat) {
  auto h = hierarchy_with_links({{0.55, 0.5, 0.45}, {0.5, 0.45, 0.55}});
  for (int i = 0; i < 3; ++i) h.reinforce(Action::eat, StimulusSignal::positive(0.1));
  const auto& k0 = h.level(1)[0].links;
  const auto& k1 = h.level(1)[1].links;
  EXPECT_NEAR(k0[0], oracle::kToyK0LinkEat, kExact);
  EXPECT_NEAR(k0[1], oracle::kToyK0LinkDrink, kExact);
  EXPECT_NEAR(k0[2], oracle::kToyK0LinkNone, kExact);
  EXPECT_NEAR(k1[0], oracle::kToyK1LinkEat, kExact);
  EXPECT_NEAR(k1[1], oracle::kToyK1LinkDrink, kExact);
  EXPECT_NEAR(k1[2], oracle::kToyK1LinkNone, kExact);
  const auto vote = h.vote_and_select();
  EXPECT_NEAR(vote.scores[0], oracle::kToyVoteEat, kExact);
  EXPECT_EQ(static_cast<double>(index_of(vote.action)), oracle::kToyAction);
  // Further rewarded meals keep the food context on eating.
  for (int i = 0; i < 10; ++i) h.reinforce(Action::eat, StimulusSignal::positive(0.1));
  EXPECT_EQ(h.vote_and_select().action, Action::eat);
}

TEST(Vote, SingleKoncept) {
  auto h = hierarchy_with_links({{1.0, 0.0, 0.0}});
  const auto vote = h.vote_and_select();
  EXPECT_NEAR(vote.scores[0], oracle::kVoteEat, kExact);
  EXPECT_EQ(vote.action, Action::eat);
}

TEST(Vote, NothingActiveMeansNone) {
  Hierarchy h(unit_params(), 1);
  const auto vote = h.vote_and_select();
  EXPECT_EQ(vote.action, Action::none);
  EXPECT_EQ(vote.scores, (ActionLinks{0.0, 0.0, 0.0}));
}

TEST(Vote, TiesGoToLowestIndex) {
  auto h = hierarchy_with_links({{0.5, 0.5, 0.5}});
  EXPECT_EQ(h.vote_and_select().action, Action::eat);
}

TEST(VoteProperty, ArgmaxInvariantUnderPositiveScaling) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ActionLinks> links(3);
    for (auto& l : links) l = {u(rng), u(rng), u(rng)};
    const double v = 0.05 + 0.45 * u(rng);
    const double c = 0.1 + 1.9 * u(rng);
    const auto base = hierarchy_with_links(links, v).vote_and_select();
    const auto scaled = hierarchy_with_links(links, std::min(1.0, v * c)).vote_and_select();
    ASSERT_EQ(base.action, scaled.action);
  }
}

// ---- propagation ----

SensorVector two_active_channels() {
  SensorVector v{};
  v[0] = 0.8;
  v[1] = 0.6;
  return v;
}

TEST(Propagate, CreatesKonceptFromStableActiveLevel) {
  Hierarchy h(unit_params(), 1);
  settle(h, two_active_channels());
  const auto report = h.propagate_level(0);
  ASSERT_TRUE(report.gate_passed);
  ASSERT_TRUE(report.created.has_value());
  ASSERT_EQ(h.level_count(), 2u);
  const Koncept& k = h.level(1)[0];
  EXPECT_DOUBLE_EQ(k.v, 1.0);
  EXPECT_EQ(k.parents.size(), 2u);
  EXPECT_NEAR(k.center[0], 0.8, 1e-9);
  EXPECT_NEAR(k.center[1], 0.6, 1e-9);
}

TEST(Propagate, ClosedGateLeavesUpperLevel) {
  Hierarchy h(unit_params(), 1);
  h.ingest_protokoncepts(two_active_channels());
  const auto report = h.propagate_level(0);
  EXPECT_FALSE(report.gate_passed);
  EXPECT_FALSE(report.created.has_value());
  EXPECT_EQ(h.level_count(), 1u);
}

TEST(Propagate, ExactMatchDoesNotCreate) {
  Hierarchy h(unit_params(), 1);
  settle(h, two_active_channels());
  h.propagate_level(0);
  const auto report = h.propagate_level(0);
  EXPECT_FALSE(report.created.has_value());
  ASSERT_EQ(report.matched.size(), 1u);
  EXPECT_DOUBLE_EQ(h.level(1)[0].v, 1.0);
}

TEST(Propagate, CapacityRefusalIsCounted) {
  KebaParams p = unit_params();
  p.max_koncepts_per_level = 1;
  Hierarchy h(p, 1);
  settle(h, two_active_channels());
  h.propagate_level(0);
  SensorVector other{};
  other[2] = 0.9;
  other[3] = 0.9;
  settle(h, other);
  const auto report = h.propagate_level(0);
  EXPECT_TRUE(report.capacity_refused);
  EXPECT_EQ(h.capacity_refusals(), 1u);
  EXPECT_EQ(h.level(1).size(), 1u);
}

// Random piecewise-constant inputs that settle long enough for the gates to open.
std::vector<SensorVector> random_episodes(std::uint64_t seed, int episodes, int ticks_per_episode) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SensorVector> out;
  for (int e = 0; e < episodes; ++e) {
    SensorVector v{};
    for (auto& x : v) x = u(rng) < 0.3 ? u(rng) : 0.0;
    for (int t = 0; t < ticks_per_episode; ++t) out.push_back(v);
  }
  return out;
}

TEST(PropagateProperty, AtMostOneCreationPerLevelPerTick) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    KebaParams p = unit_params();
    p.stability_speed = 0.2;
    Hierarchy h(p, seed);
    for (const auto& input : random_episodes(seed, 40, 12)) {
      const auto before = h.level_counts();
      h.step(input);
      const auto after = h.level_counts();
      for (std::size_t n = 0; n < after.size(); ++n) {
        const std::size_t prior = n < before.size() ? before[n] : 0;
        ASSERT_LE(after[n], prior + 1);
        for (std::size_t i = prior; i < after[n]; ++i) {
          ASSERT_DOUBLE_EQ(h.level(n)[i].v, 1.0);
          ASSERT_GE(h.level(n)[i].parents.size(), 2u);
        }
      }
    }
    EXPECT_GT(h.koncept_count(), kProtokonceptCount) << "seed " << seed;
  }
}

TEST(PropagateProperty, FrozenLevelsAreBitIdentical) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    KebaParams p = unit_params();
    p.stability_speed = 0.2;
    Hierarchy h(p, seed);
    std::size_t frozen_checks = 0;
    for (const auto& input : random_episodes(seed + 100, 40, 12)) {
      const Hierarchy before = h;
      const std::size_t top = h.step(input);
      for (std::size_t n = top + 1; n < before.level_count(); ++n) {
        ASSERT_TRUE(std::equal(before.level(n).begin(), before.level(n).end(), h.level(n).begin(),
                               h.level(n).end()))
            << "level " << n << " changed while frozen";
        ++frozen_checks;
      }
    }
    EXPECT_GT(frozen_checks, 0u);
  }
}

TEST(PropagateProperty, RadiiStayOrderedInLongRuns) {
  KebaParams p = unit_params();
  p.stability_speed = 0.2;
  p.radius_rate = 0.05;
  Hierarchy h(p, 3);
  for (const auto& input : random_episodes(3, 80, 10)) {
    h.step(input);
    for (std::size_t n = 1; n < h.level_count(); ++n) {
      for (const auto& k : h.level(n)) {
        ASSERT_GT(k.r1, 0.0);
        ASSERT_LT(k.r1, k.r2);
      }
    }
  }
}

TEST(HierarchyProperty, DeterministicForSameSeedAndInputs) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    KebaParams p = unit_params();
    p.stability_speed = 0.2;
    Hierarchy a(p, seed), b(p, seed);
    for (const auto& input : random_episodes(seed, 30, 12)) {
      a.step(input);
      b.step(input);
    }
    EXPECT_TRUE(a == b);
    EXPECT_EQ(a.vote_and_select().scores, b.vote_and_select().scores);
  }
}

TEST(HierarchyRestore, RejectsInvertedRadii) {
  auto levels = hierarchy_with_links({{0.5, 0.5, 0.5}}).levels();
  auto bad = levels;
  bad[1][0].r1 = 0.3;
  bad[1][0].r2 = 0.2;
  EXPECT_THROW(Hierarchy::restore(unit_params(), bad, 16, std::mt19937_64(1), 0), std::invalid_argument);
}

TEST(Params, ValidateRejectsBadValues) {
  KebaParams p;
  EXPECT_NO_THROW(p.validate());
  p.initial_r1 = p.initial_r2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = KebaParams{};
  p.stability_speed = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace keba
