#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "keba/core.hpp"
#include "keba/world.hpp"

namespace keba {

enum class ControllerKind : std::uint8_t { keba, random, none };

std::string_view to_string(ControllerKind kind);
std::optional<ControllerKind> parse_controller_kind(std::string_view name);

struct Controller {
  ControllerKind kind = ControllerKind::none;
  std::optional<Hierarchy> hierarchy;  // engaged iff kind == keba
  std::mt19937_64 policy_rng;          // random actions and keba exploration
  double exploration_rate = 0.0;       // keba only: chance of replacing the vote with a uniform action

  static Controller make(ControllerKind kind, const KebaParams& params, std::uint64_t link_seed,
                         std::uint64_t policy_seed, double exploration_rate = 0.0);

  bool operator==(const Controller&) const = default;
};

/// Per-animat random streams owned by the simulation.
struct AnimatStreams {
  std::mt19937_64 noise;
  std::mt19937_64 locomotion;
  bool operator==(const AnimatStreams&) const = default;
};

struct TickTrace {
  std::uint64_t tick = 0;
  std::uint64_t animat_id = 0;
  bool acted = false;  // false when the animat was already dead
  Action action = Action::none;
  StimulusSignal stimulus;
  Physiology physiology;  // after the tick
  std::vector<std::size_t> koncept_counts;
  std::optional<KonceptId> created;  // first koncept created this tick, if any
  std::uint64_t capacity_refusals = 0;

  bool operator==(const TickTrace&) const = default;
};

std::string to_json_line(const TickTrace& trace);

/// One tick for one animat: perceive, decide, act, physiology, reinforce.
TickTrace tick_animat(WorldState& world, AnimatBody& animat, Controller& controller, std::mt19937_64& noise_rng,
                      std::uint64_t tick);

/// Deterministic seed for a named stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name);

struct ScheduledEvent {
  std::uint64_t at_tick = 0;
  PhenomenonKind kind = PhenomenonKind::food;
  Vec2 position;
  bool operator==(const ScheduledEvent&) const = default;
};

struct AnimatSpec {
  ControllerKind controller = ControllerKind::keba;
  Locomotion locomotion = Locomotion::wander;
  std::optional<Vec2> position;      // random when absent
  std::optional<double> heading;     // random when absent
  KebaParams keba;
  double exploration_rate = 0.0;
  bool operator==(const AnimatSpec&) const = default;
};

/// World, controllers, and every random stream of one run. The fixed per-tick order is:
/// scheduled events, step_world, then each living animat in ascending id order.
class Simulation {
 public:
  Simulation(WorldParams params, std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t tick() const { return tick_; }
  const WorldState& world() const { return world_; }
  WorldState& world() { return world_; }
  const std::vector<Controller>& controllers() const { return controllers_; }
  const std::vector<AnimatStreams>& streams() const { return streams_; }
  const std::mt19937_64& spawner_rng() const { return spawner_rng_; }
  std::mt19937_64& placement_rng() { return placement_rng_; }
  const std::mt19937_64& placement_rng() const { return placement_rng_; }
  const std::vector<ScheduledEvent>& schedule() const { return schedule_; }

  /// Adds an animat; its random streams derive from the run seed and the new animat id.
  std::uint64_t add_animat(const AnimatSpec& spec);

  void schedule_event(ScheduledEvent event);

  /// Spawns at a random position drawn from the placement stream.
  Phenomenon& spawn_random(PhenomenonKind kind);

  /// Advances one tick; returns one trace per animat (dead animats included, acted=false).
  std::vector<TickTrace> step();

  bool all_dead() const;

  /// Rebuilds from persisted parts; used by the persistence module.
  static Simulation restore(WorldState world, std::vector<Controller> controllers, std::vector<AnimatStreams> streams,
                            std::mt19937_64 spawner_rng, std::mt19937_64 placement_rng,
                            std::vector<ScheduledEvent> schedule, std::uint64_t seed, std::uint64_t tick);

  bool operator==(const Simulation&) const = default;

 private:
  Simulation() = default;

  WorldState world_;
  std::vector<Controller> controllers_;  // parallel to world_.animats
  std::vector<AnimatStreams> streams_;   // parallel to world_.animats
  std::mt19937_64 spawner_rng_;
  std::mt19937_64 placement_rng_;
  std::vector<ScheduledEvent> schedule_;
  std::uint64_t seed_ = 0;
  std::uint64_t tick_ = 0;
};

}  // namespace keba
