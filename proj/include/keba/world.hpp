#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "keba/core.hpp"

namespace keba {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

/// Channel order matches the protokoncept slots 0..8.
struct Qualia {
  double redness = 0.0;
  double greenness = 0.0;
  double blueness = 0.0;
  double odour_plus = 0.0;
  double odour_minus = 0.0;
  double loudness = 0.0;
  double flavour_plus = 0.0;
  double flavour_minus = 0.0;
  double hardness = 0.0;

  std::array<double, kQualiaChannels> channels() const;
  static Qualia from_channels(std::span<const double> values);
  bool operator==(const Qualia&) const = default;
};

inline constexpr std::array<std::string_view, kQualiaChannels> kQualiaNames{
    "redness", "greenness", "blueness", "odour_plus", "odour_minus",
    "loudness", "flavour_plus", "flavour_minus", "hardness"};
inline constexpr std::size_t kDistalChannels = 6;

enum class PhenomenonKind : std::uint8_t { food, rock, lightning, rain, animat };

std::string_view to_string(PhenomenonKind kind);
std::optional<PhenomenonKind> parse_phenomenon_kind(std::string_view name);

struct Phenomenon {
  std::uint64_t id = 0;
  PhenomenonKind kind = PhenomenonKind::rock;
  Vec2 position;
  double size = 1.0;
  std::uint64_t age = 0;
  Qualia qualia;

  bool operator==(const Phenomenon&) const = default;
};

// `stationary` is spelled "static" in documents and commands.
enum class Locomotion : std::uint8_t { wander, circular, stationary };

std::string_view to_string(Locomotion mode);
std::optional<Locomotion> parse_locomotion(std::string_view name);

struct Physiology {
  double energy = 1.0;
  double hunger = 0.0;
  double thirst = 0.0;
  bool alive = true;
  bool operator==(const Physiology&) const = default;
};

struct AnimatBody {
  std::uint64_t id = 0;
  Vec2 position;
  double heading = 0.0;
  Locomotion locomotion = Locomotion::wander;
  Physiology physiology;
  double perception_radius = 10.0;
  double size = 1.0;
  Action current_action = Action::none;
  Qualia qualia;

  bool operator==(const AnimatBody&) const = default;
};

/// Size and qualia a phenomenon of a given kind receives when created or transformed.
struct KindDefaults {
  double size = 1.0;
  Qualia qualia;
  bool operator==(const KindDefaults&) const = default;
};

struct WorldParams {
  double width = 100.0;
  double height = 100.0;
  double noise_amplitude = 0.0;
  double hunger_rate = 1.0 / 1000.0;
  double thirst_rate = 1.0 / 1000.0;
  double high_threshold = 0.5;
  double low_threshold = 0.2;
  double energy_drain = 1.0 / 8000.0;
  double energy_gain = 1.0 / 8000.0;
  double eat_relief = 0.1;
  double drink_relief = 0.1;
  double penalty = 0.05;
  double food_shrink = 0.1;
  double predation_drain = 0.05;
  std::uint64_t lightning_ttl = 10;
  std::uint64_t rain_ttl = 50;
  double spawn_rate = 0.01;
  double wander_sigma = 0.3;
  double circle_turn = 0.1;
  double speed = 0.5;
  double perception_radius = 10.0;
  double animat_size = 1.0;

  KindDefaults food{1.0, Qualia{.greenness = 0.8, .odour_plus = 0.9, .flavour_plus = 0.9, .hardness = 0.2}};
  KindDefaults rock{1.0, Qualia{.redness = 0.5, .greenness = 0.5, .blueness = 0.5, .hardness = 1.0}};
  KindDefaults lightning{1.0, Qualia{.redness = 1.0, .greenness = 1.0, .blueness = 1.0, .loudness = 1.0}};
  KindDefaults rain{1.0, Qualia{.blueness = 0.9, .loudness = 0.4}};
  Qualia animat_qualia{.redness = 0.6, .odour_minus = 0.5, .loudness = 0.2, .flavour_plus = 0.5, .hardness = 0.5};

  const KindDefaults& defaults_for(PhenomenonKind kind) const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const WorldParams&) const = default;
};

double toroidal_distance(Vec2 p, Vec2 q, double width, double height);
Vec2 wrap(Vec2 p, double width, double height);

/// Environment state: phenomena plus animat bodies (kept in ascending id order).
struct WorldState {
  WorldParams params;
  std::vector<Phenomenon> phenomena;
  std::vector<AnimatBody> animats;
  std::uint64_t next_id = 1;

  Phenomenon& spawn(PhenomenonKind kind, Vec2 position);
  AnimatBody& add_animat(Vec2 position, double heading, Locomotion mode);
  bool remove_phenomenon(std::uint64_t id);

  Phenomenon* find_phenomenon(std::uint64_t id);
  AnimatBody* find_animat(std::uint64_t id);
  const AnimatBody* find_animat(std::uint64_t id) const;

  bool operator==(const WorldState&) const = default;
};

/// Ages and transforms phenomena, runs the random spawner, moves the animats.
/// `locomotion_rngs` is indexed like `world.animats`.
void step_world(WorldState& world, std::mt19937_64& spawner_rng, std::span<std::mt19937_64> locomotion_rngs);

/// Noise-free sensor reading; see `perceive` for the noisy version.
SensorVector sense(const WorldState& world, const AnimatBody& animat);

/// Sensor reading with additive uniform noise, clamped to [0,1].
SensorVector perceive(const WorldState& world, const AnimatBody& animat, std::mt19937_64& noise_rng);

/// Resolves the action against touched phenomena and returns the resulting stimulus.
StimulusSignal apply_action(WorldState& world, AnimatBody& animat, Action action);

void physiology_step(AnimatBody& animat, const WorldParams& params);

bool touching(const WorldParams& params, const AnimatBody& animat, Vec2 other_position, double other_size);

}  // namespace keba
