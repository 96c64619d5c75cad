#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "keba/world.hpp"
#include "oracle_values.hpp"

namespace keba {
namespace {

constexpr double kExact = 1e-12;

WorldState quiet_world() {
  WorldState w;
  w.params.spawn_rate = 0.0;
  return w;
}

void step(WorldState& w, std::mt19937_64& spawner) {
  std::vector<std::mt19937_64> loco(w.animats.size(), std::mt19937_64(5));
  step_world(w, spawner, loco);
}

// ---- geometry ----

TEST(Toroidal, Identity) { EXPECT_DOUBLE_EQ(toroidal_distance({3, 4}, {3, 4}, 100, 100), 0.0); }

TEST(Toroidal, WrapsAroundTheSeam) { EXPECT_NEAR(toroidal_distance({1, 0}, {99, 0}, 100, 100), 2.0, kExact); }

TEST(Toroidal, FarCorner) {
  EXPECT_NEAR(toroidal_distance({0, 0}, {50, 50}, 100, 100), oracle::kDistanceCorner, kExact);
}

// ---- step_world ----

TEST(StepWorld, LightningBecomesRainAtTen) {
  WorldState w = quiet_world();
  w.spawn(PhenomenonKind::lightning, {10, 10});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 9; ++i) step(w, rng);
  EXPECT_EQ(w.phenomena[0].kind, PhenomenonKind::lightning);
  step(w, rng);
  EXPECT_EQ(w.phenomena[0].kind, PhenomenonKind::rain);
  EXPECT_EQ(w.phenomena[0].age, 0u);
}

TEST(StepWorld, RainBecomesFoodAtFifty) {
  WorldState w = quiet_world();
  w.spawn(PhenomenonKind::rain, {10, 10});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 49; ++i) step(w, rng);
  EXPECT_EQ(w.phenomena[0].kind, PhenomenonKind::rain);
  step(w, rng);
  EXPECT_EQ(w.phenomena[0].kind, PhenomenonKind::food);
  EXPECT_EQ(w.phenomena[0].qualia, w.params.food.qualia);
}

TEST(StepWorld, StaticAnimatStaysPut) {
  WorldState w = quiet_world();
  w.add_animat({20, 30}, 1.0, Locomotion::stationary);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) step(w, rng);
  EXPECT_EQ(w.animats[0].position, (Vec2{20, 30}));
}

TEST(StepWorld, CircularAnimatTurnsByFixedAngle) {
  WorldState w = quiet_world();
  w.add_animat({20, 30}, 0.0, Locomotion::circular);
  std::mt19937_64 rng(1);
  step(w, rng);
  EXPECT_NEAR(w.animats[0].heading, w.params.circle_turn, kExact);
}

TEST(StepWorld, RequiresOneLocomotionStreamPerAnimat) {
  WorldState w = quiet_world();
  w.add_animat({20, 30}, 0.0, Locomotion::wander);
  std::mt19937_64 rng(1);
  std::vector<std::mt19937_64> none;
  EXPECT_THROW(step_world(w, rng, none), std::invalid_argument);
}

TEST(StepWorldProperty, PositionsStayInBoundsAndKindsOnlyAdvance) {
  WorldState w;
  w.params.spawn_rate = 0.2;
  w.params.speed = 3.7;
  for (int i = 0; i < 5; ++i) w.add_animat({i * 19.0, 99.9}, i, static_cast<Locomotion>(i % 3));
  std::mt19937_64 spawner(2);
  std::vector<std::mt19937_64> loco;
  for (int i = 0; i < 5; ++i) loco.emplace_back(100 + i);
  const std::map<PhenomenonKind, int> rank{{PhenomenonKind::lightning, 0}, {PhenomenonKind::rain, 1},
                                           {PhenomenonKind::food, 2}};
  std::map<std::uint64_t, PhenomenonKind> last_kind;
  for (int t = 0; t < 2000; ++t) {
    step_world(w, spawner, loco);
    for (const auto& a : w.animats) {
      ASSERT_GE(a.position.x, 0.0);
      ASSERT_LT(a.position.x, w.params.width);
      ASSERT_GE(a.position.y, 0.0);
      ASSERT_LT(a.position.y, w.params.height);
    }
    for (const auto& p : w.phenomena) {
      auto it = last_kind.find(p.id);
      if (it != last_kind.end()) {
        ASSERT_GE(rank.at(p.kind), rank.at(it->second));
        ASSERT_LE(rank.at(p.kind) - rank.at(it->second), 1);
      }
      last_kind[p.id] = p.kind;
    }
  }
  EXPECT_FALSE(last_kind.empty());
}

// ---- perception ----

TEST(Perceive, EmptyWorldFreshAnimat) {
  WorldState w = quiet_world();
  auto& a = w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  std::mt19937_64 rng(1);
  const SensorVector v = perceive(w, a, rng);
  const SensorVector expected{0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  EXPECT_EQ(v, expected);
}

TEST(Perceive, ContactChannelPassesThrough) {
  WorldState w = quiet_world();
  auto& a = w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  const double touch = a.size + w.params.food.size;
  w.spawn(PhenomenonKind::food, {50 + touch, 50});
  const SensorVector v = sense(w, w.animats[0]);
  EXPECT_DOUBLE_EQ(v[6], w.params.food.qualia.flavour_plus);
  EXPECT_DOUBLE_EQ(v[8], w.params.food.qualia.hardness);
}

TEST(Perceive, LinearAttenuationAtHalfRadius) {
  WorldState w = quiet_world();
  w.params.lightning.qualia = Qualia{.redness = 1.0};
  w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  w.spawn(PhenomenonKind::lightning, {50 + w.animats[0].perception_radius / 2, 50});
  EXPECT_NEAR(sense(w, w.animats[0])[0], oracle::kPerceptionHalfRadius, kExact);
}

TEST(PerceiveProperty, PureWithoutNoiseAndBoundedWithNoise) {
  WorldState w = quiet_world();
  w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  std::mt19937_64 place(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 40; ++i) w.spawn(static_cast<PhenomenonKind>(i % 4), {u(place), u(place)});
  std::mt19937_64 r1(1), r2(99);
  EXPECT_EQ(perceive(w, w.animats[0], r1), perceive(w, w.animats[0], r2));
  w.params.noise_amplitude = 0.5;
  for (int i = 0; i < 200; ++i) {
    for (double c : perceive(w, w.animats[0], r1)) {
      ASSERT_GE(c, 0.0);
      ASSERT_LE(c, 1.0);
    }
  }
}

// ---- actions ----

struct Contact {
  WorldState w = quiet_world();
  AnimatBody* animat = nullptr;
  explicit Contact(PhenomenonKind kind) {
    w.add_animat({50, 50}, 0.0, Locomotion::stationary);
    w.spawn(kind, {50.5, 50});
    animat = &w.animats[0];
    animat->physiology.hunger = 0.5;
    animat->physiology.thirst = 0.5;
  }
};

TEST(ApplyAction, EatingFoodRelievesHunger) {
  Contact c(PhenomenonKind::food);
  const auto s = apply_action(c.w, *c.animat, Action::eat);
  EXPECT_EQ(s.sign, StimulusSign::positive);
  EXPECT_NEAR(c.animat->physiology.hunger, 0.4, kExact);
  EXPECT_NEAR(c.w.phenomena[0].size, 0.9, kExact);
}

TEST(ApplyAction, EatingRockIsPunished) {
  Contact c(PhenomenonKind::rock);
  const auto s = apply_action(c.w, *c.animat, Action::eat);
  EXPECT_EQ(s.sign, StimulusSign::negative);
  EXPECT_NEAR(c.animat->physiology.hunger, 0.55, kExact);
}

TEST(ApplyAction, DrinkingRainRelievesThirst) {
  Contact c(PhenomenonKind::rain);
  EXPECT_EQ(apply_action(c.w, *c.animat, Action::drink).sign, StimulusSign::positive);
  EXPECT_NEAR(c.animat->physiology.thirst, 0.4, kExact);
}

TEST(ApplyAction, NoneChangesNothing) {
  Contact c(PhenomenonKind::food);
  const Physiology before = c.animat->physiology;
  EXPECT_EQ(apply_action(c.w, *c.animat, Action::none).sign, StimulusSign::none);
  EXPECT_EQ(c.animat->physiology, before);
}

TEST(ApplyAction, NothingTouchedGivesNoStimulus) {
  WorldState w = quiet_world();
  auto& a = w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  EXPECT_EQ(apply_action(w, a, Action::eat).sign, StimulusSign::none);
}

TEST(ApplyAction, FoodVanishesAfterTenMeals) {
  Contact c(PhenomenonKind::food);
  for (int i = 0; i < 10; ++i) apply_action(c.w, *c.animat, Action::eat);
  EXPECT_TRUE(c.w.phenomena.empty());
}

TEST(ApplyAction, PredationDrainsVictim) {
  WorldState w = quiet_world();
  w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  w.add_animat({50.5, 50}, 0.0, Locomotion::stationary);
  EXPECT_EQ(apply_action(w, w.animats[0], Action::eat).sign, StimulusSign::positive);
  EXPECT_NEAR(w.animats[1].physiology.energy, 1.0 - w.params.predation_drain, kExact);
}

// ---- physiology ----

TEST(Physiology, LinearRampToHalfAt500) {
  WorldState w = quiet_world();
  auto& a = w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  for (int i = 0; i < 500; ++i) physiology_step(a, w.params);
  EXPECT_NEAR(a.physiology.hunger, oracle::kHungerAt500, kExact);
  EXPECT_NEAR(a.physiology.thirst, oracle::kHungerAt500, kExact);
}

TEST(Physiology, NoActionDeathTick) {
  WorldState w = quiet_world();
  auto& a = w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  int tick = 0;
  while (a.physiology.alive) {
    ++tick;
    physiology_step(a, w.params);
    ASSERT_LT(tick, 100000);
  }
  EXPECT_EQ(tick, static_cast<int>(oracle::kDeathBruteForce));
  EXPECT_LE(std::abs(tick - oracle::kDeathClosedForm), 0.05 * oracle::kDeathClosedForm);
}

TEST(Physiology, RecoveryBelowLowThreshold) {
  WorldState w = quiet_world();
  auto& a = w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  a.physiology = Physiology{.energy = 0.5, .hunger = 0.1, .thirst = 0.1};
  physiology_step(a, w.params);
  EXPECT_NEAR(a.physiology.energy, 0.5 + w.params.energy_gain, kExact);
}

TEST(PhysiologyProperty, StaysInUnitIntervalUnderAnyActions) {
  WorldState w = quiet_world();
  w.add_animat({50, 50}, 0.0, Locomotion::stationary);
  w.spawn(PhenomenonKind::rock, {50.5, 50});
  w.spawn(PhenomenonKind::rain, {49.5, 50});
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(0, 2);
  auto& a = w.animats[0];
  for (int t = 0; t < 6000 && a.physiology.alive; ++t) {
    apply_action(w, a, kAllActions[static_cast<std::size_t>(pick(rng))]);
    physiology_step(a, w.params);
    for (double x : {a.physiology.energy, a.physiology.hunger, a.physiology.thirst}) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0);
    }
  }
}

TEST(WorldParams, ValidateRejectsBadValues) {
  WorldParams p;
  EXPECT_NO_THROW(p.validate());
  p.width = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = WorldParams{};
  p.noise_amplitude = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace keba
