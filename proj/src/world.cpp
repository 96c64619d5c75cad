#include "keba/world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace keba {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double wrap_axis(double v, double extent) {
  double w = std::fmod(v, extent);
  if (w < 0.0) w += extent;
  // fmod of a tiny negative value can round up to exactly `extent`.
  if (w >= extent) w = 0.0;
  return w;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

std::array<double, kQualiaChannels> Qualia::channels() const {
  return {redness, greenness, blueness, odour_plus, odour_minus, loudness, flavour_plus, flavour_minus, hardness};
}

Qualia Qualia::from_channels(std::span<const double> values) {
  if (values.size() != kQualiaChannels) throw std::invalid_argument("qualia: expected 9 channels");
  return Qualia{values[0], values[1], values[2], values[3], values[4], values[5], values[6], values[7], values[8]};
}

std::string_view to_string(PhenomenonKind kind) {
  switch (kind) {
    case PhenomenonKind::food: return "food";
    case PhenomenonKind::rock: return "rock";
    case PhenomenonKind::lightning: return "lightning";
    case PhenomenonKind::rain: return "rain";
    case PhenomenonKind::animat: return "animat";
  }
  return "unknown";
}

std::optional<PhenomenonKind> parse_phenomenon_kind(std::string_view name) {
  for (auto kind : {PhenomenonKind::food, PhenomenonKind::rock, PhenomenonKind::lightning, PhenomenonKind::rain,
                    PhenomenonKind::animat}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(Locomotion mode) {
  switch (mode) {
    case Locomotion::wander: return "wander";
    case Locomotion::circular: return "circular";
    case Locomotion::stationary: return "static";
  }
  return "unknown";
}

std::optional<Locomotion> parse_locomotion(std::string_view name) {
  if (name == "wander") return Locomotion::wander;
  if (name == "circular") return Locomotion::circular;
  if (name == "static") return Locomotion::stationary;
  return std::nullopt;
}

const KindDefaults& WorldParams::defaults_for(PhenomenonKind kind) const {
  switch (kind) {
    case PhenomenonKind::food: return food;
    case PhenomenonKind::rock: return rock;
    case PhenomenonKind::lightning: return lightning;
    case PhenomenonKind::rain: return rain;
    case PhenomenonKind::animat: break;
  }
  throw std::invalid_argument("animats are not plain phenomena");
}

void WorldParams::validate() const {
  require(width > 0.0 && height > 0.0, "world.width and world.height must be positive");
  require(noise_amplitude >= 0.0 && noise_amplitude <= 1.0, "world.noise_amplitude must lie in [0,1]");
  require(0.0 < low_threshold && low_threshold < high_threshold && high_threshold < 1.0,
          "world thresholds must satisfy 0 < low_threshold < high_threshold < 1");
  for (double rate : {hunger_rate, thirst_rate, energy_drain, energy_gain, eat_relief, drink_relief, penalty,
                      food_shrink, predation_drain, wander_sigma, circle_turn, speed}) {
    require(rate >= 0.0, "world rates must be non-negative");
  }
  require(spawn_rate >= 0.0 && spawn_rate <= 1.0, "world.spawn_rate must lie in [0,1]");
  require(lightning_ttl == 10, "world.lightning_ttl is fixed at 10 ticks");
  require(rain_ttl == 50, "world.rain_ttl is fixed at 50 ticks");
  require(perception_radius > 0.0, "world.perception_radius must be positive");
  require(animat_size > 0.0, "world.animat_size must be positive");
  for (const KindDefaults* d : {&food, &rock, &lightning, &rain}) {
    require(d->size > 0.0, "phenomenon sizes must be positive");
    for (double c : d->qualia.channels()) require(c >= 0.0 && c <= 1.0, "qualia must lie in [0,1]");
  }
  for (double c : animat_qualia.channels()) require(c >= 0.0 && c <= 1.0, "qualia must lie in [0,1]");
}

double toroidal_distance(Vec2 p, Vec2 q, double width, double height) {
  double dx = std::abs(p.x - q.x);
  double dy = std::abs(p.y - q.y);
  dx = std::min(dx, width - dx);
  dy = std::min(dy, height - dy);
  return std::hypot(dx, dy);
}

Vec2 wrap(Vec2 p, double width, double height) { return {wrap_axis(p.x, width), wrap_axis(p.y, height)}; }

Phenomenon& WorldState::spawn(PhenomenonKind kind, Vec2 position) {
  const auto& defaults = params.defaults_for(kind);
  Phenomenon p;
  p.id = next_id++;
  p.kind = kind;
  p.position = wrap(position, params.width, params.height);
  p.size = defaults.size;
  p.qualia = defaults.qualia;
  phenomena.push_back(p);
  return phenomena.back();
}

AnimatBody& WorldState::add_animat(Vec2 position, double heading, Locomotion mode) {
  AnimatBody body;
  body.id = next_id++;
  body.position = wrap(position, params.width, params.height);
  body.heading = heading;
  body.locomotion = mode;
  body.perception_radius = params.perception_radius;
  body.size = params.animat_size;
  body.qualia = params.animat_qualia;
  animats.push_back(body);
  return animats.back();
}

bool WorldState::remove_phenomenon(std::uint64_t id) {
  auto it = std::find_if(phenomena.begin(), phenomena.end(), [id](const Phenomenon& p) { return p.id == id; });
  if (it == phenomena.end()) return false;
  phenomena.erase(it);
  return true;
}

Phenomenon* WorldState::find_phenomenon(std::uint64_t id) {
  auto it = std::find_if(phenomena.begin(), phenomena.end(), [id](const Phenomenon& p) { return p.id == id; });
  return it == phenomena.end() ? nullptr : &*it;
}

AnimatBody* WorldState::find_animat(std::uint64_t id) {
  auto it = std::find_if(animats.begin(), animats.end(), [id](const AnimatBody& a) { return a.id == id; });
  return it == animats.end() ? nullptr : &*it;
}

const AnimatBody* WorldState::find_animat(std::uint64_t id) const {
  auto it = std::find_if(animats.begin(), animats.end(), [id](const AnimatBody& a) { return a.id == id; });
  return it == animats.end() ? nullptr : &*it;
}

void step_world(WorldState& world, std::mt19937_64& spawner_rng, std::span<std::mt19937_64> locomotion_rngs) {
  const auto& params = world.params;
  for (auto& p : world.phenomena) {
    ++p.age;
    if (p.kind == PhenomenonKind::lightning && p.age >= params.lightning_ttl) {
      p.kind = PhenomenonKind::rain;
      p.age = 0;
      p.size = params.rain.size;
      p.qualia = params.rain.qualia;
    } else if (p.kind == PhenomenonKind::rain && p.age >= params.rain_ttl) {
      p.kind = PhenomenonKind::food;
      p.age = 0;
      p.size = params.food.size;
      p.qualia = params.food.qualia;
    }
  }
  std::erase_if(world.phenomena, [](const Phenomenon& p) { return p.kind == PhenomenonKind::food && p.size <= 0.0; });

  // Both draws are taken every tick so the spawner stream advances independently of outcomes.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double roll = unit(spawner_rng);
  const Vec2 where{unit(spawner_rng) * params.width, unit(spawner_rng) * params.height};
  if (roll < params.spawn_rate) world.spawn(PhenomenonKind::lightning, where);

  if (locomotion_rngs.size() != world.animats.size()) {
    throw std::invalid_argument("step_world: one locomotion stream per animat required");
  }
  for (std::size_t i = 0; i < world.animats.size(); ++i) {
    auto& body = world.animats[i];
    if (!body.physiology.alive) continue;
    switch (body.locomotion) {
      case Locomotion::wander: {
        std::uniform_real_distribution<double> turn(-params.wander_sigma, params.wander_sigma);
        body.heading += turn(locomotion_rngs[i]);
        break;
      }
      case Locomotion::circular:
        body.heading += params.circle_turn;
        break;
      case Locomotion::stationary:
        continue;
    }
    body.heading = std::remainder(body.heading, 2.0 * std::numbers::pi);
    body.position = wrap({body.position.x + params.speed * std::cos(body.heading),
                          body.position.y + params.speed * std::sin(body.heading)},
                         params.width, params.height);
  }
}

bool touching(const WorldParams& params, const AnimatBody& animat, Vec2 other_position, double other_size) {
  return toroidal_distance(animat.position, other_position, params.width, params.height) <= animat.size + other_size;
}

SensorVector sense(const WorldState& world, const AnimatBody& animat) {
  const auto& params = world.params;
  SensorVector out{};
  auto absorb = [&](Vec2 position, double size, const Qualia& qualia) {
    const double d = toroidal_distance(animat.position, position, params.width, params.height);
    const auto channels = qualia.channels();
    if (d < animat.perception_radius) {
      const double gain = 1.0 - d / animat.perception_radius;
      for (std::size_t c = 0; c < kDistalChannels; ++c) out[c] = std::max(out[c], channels[c] * gain);
    }
    if (d <= animat.size + size) {
      for (std::size_t c = kDistalChannels; c < kQualiaChannels; ++c) out[c] = std::max(out[c], channels[c]);
    }
  };
  for (const auto& p : world.phenomena) absorb(p.position, p.size, p.qualia);
  for (const auto& other : world.animats) {
    if (other.id == animat.id || !other.physiology.alive) continue;
    absorb(other.position, other.size, other.qualia);
  }
  out[kEnergySlot] = animat.physiology.energy;
  out[kHungerSlot] = animat.physiology.hunger;
  out[kThirstSlot] = animat.physiology.thirst;
  out[kActionSlot + index_of(animat.current_action)] = 1.0;
  return out;
}

SensorVector perceive(const WorldState& world, const AnimatBody& animat, std::mt19937_64& noise_rng) {
  SensorVector out = sense(world, animat);
  const double amplitude = world.params.noise_amplitude;
  std::uniform_real_distribution<double> noise(-amplitude, amplitude);
  for (auto& channel : out) {
    // The draw happens even at zero amplitude so the stream position is noise-independent.
    const double n = noise(noise_rng);
    channel = clamp01(channel + (amplitude > 0.0 ? n : 0.0));
  }
  return out;
}

namespace {

struct Touched {
  Phenomenon* food = nullptr;
  Phenomenon* rain = nullptr;
  AnimatBody* prey = nullptr;
  bool anything = false;
};

Touched find_touched(WorldState& world, const AnimatBody& animat) {
  Touched t;
  double food_d = 0.0;
  double rain_d = 0.0;
  double prey_d = 0.0;
  const auto& params = world.params;
  for (auto& p : world.phenomena) {
    if (!touching(params, animat, p.position, p.size)) continue;
    t.anything = true;
    const double d = toroidal_distance(animat.position, p.position, params.width, params.height);
    if (p.kind == PhenomenonKind::food && (t.food == nullptr || d < food_d)) {
      t.food = &p;
      food_d = d;
    } else if (p.kind == PhenomenonKind::rain && (t.rain == nullptr || d < rain_d)) {
      t.rain = &p;
      rain_d = d;
    }
  }
  for (auto& other : world.animats) {
    if (other.id == animat.id || !other.physiology.alive) continue;
    if (!touching(params, animat, other.position, other.size)) continue;
    t.anything = true;
    const double d = toroidal_distance(animat.position, other.position, params.width, params.height);
    if (t.prey == nullptr || d < prey_d) {
      t.prey = &other;
      prey_d = d;
    }
  }
  return t;
}

}  // namespace

StimulusSignal apply_action(WorldState& world, AnimatBody& animat, Action action) {
  animat.current_action = action;
  if (action == Action::none) return StimulusSignal::none();

  const auto& params = world.params;
  auto& phys = animat.physiology;
  Touched touched = find_touched(world, animat);
  if (!touched.anything) return StimulusSignal::none();

  if (action == Action::eat) {
    if (touched.food != nullptr) {
      phys.hunger = clamp01(phys.hunger - params.eat_relief);
      touched.food->size -= params.food_shrink;
      if (touched.food->size <= 1e-12) world.remove_phenomenon(touched.food->id);
      return StimulusSignal::positive(params.eat_relief);
    }
    if (touched.prey != nullptr) {
      phys.hunger = clamp01(phys.hunger - params.eat_relief);
      auto& victim = touched.prey->physiology;
      victim.energy = clamp01(victim.energy - params.predation_drain);
      if (victim.energy <= 0.0) victim.alive = false;
      return StimulusSignal::positive(params.eat_relief);
    }
    phys.hunger = clamp01(phys.hunger + params.penalty);
    return StimulusSignal::negative(params.penalty);
  }

  if (touched.rain != nullptr) {
    phys.thirst = clamp01(phys.thirst - params.drink_relief);
    return StimulusSignal::positive(params.drink_relief);
  }
  phys.thirst = clamp01(phys.thirst + params.penalty);
  return StimulusSignal::negative(params.penalty);
}

void physiology_step(AnimatBody& animat, const WorldParams& params) {
  auto& phys = animat.physiology;
  if (!phys.alive) return;
  phys.hunger = clamp01(phys.hunger + params.hunger_rate);
  phys.thirst = clamp01(phys.thirst + params.thirst_rate);
  if (phys.hunger > params.high_threshold) phys.energy -= params.energy_drain;
  if (phys.thirst > params.high_threshold) phys.energy -= params.energy_drain;
  if (phys.hunger < params.low_threshold && phys.thirst < params.low_threshold) phys.energy += params.energy_gain;
  phys.energy = clamp01(phys.energy);
  if (phys.energy <= 0.0) phys.alive = false;
}

}  // namespace keba
