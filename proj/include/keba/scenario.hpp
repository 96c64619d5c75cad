#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "keba/agent.hpp"

namespace keba {

/// `count` phenomena of `kind` placed uniformly at random before the first tick.
struct Placement {
  PhenomenonKind kind = PhenomenonKind::rock;
  std::size_t count = 0;
  bool operator==(const Placement&) const = default;
};

inline constexpr std::array<std::string_view, 5> kMetricNames{"hunger", "thirst", "energy", "koncepts", "action"};

/// Declarative description of one run. Together with the code version it fully determines the run.
struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::uint64_t ticks = 20000;
  WorldParams world;
  std::vector<AnimatSpec> animats;
  std::vector<Placement> placements;     // random placements, applied in order before animats
  std::vector<ScheduledEvent> events;    // deterministic spawns
  std::vector<std::string> metrics{kMetricNames.begin(), kMetricNames.end()};
  std::optional<std::string> csv_path;
  std::optional<std::string> jsonl_path;
  bool stop_when_all_dead = true;

  /// Every problem found, one diagnostic each; empty when the config is valid.
  std::vector<std::string> diagnostics() const;
  /// Throws std::invalid_argument listing all diagnostics.
  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Builds the initial simulation: placements first, then animats, then the event schedule.
Simulation build_simulation(const ScenarioConfig& config);

/// Calibrated laboratory setup used by the experiments: 60 rocks, no initial food, rain and
/// lightning footprint 5, one animat with the given controller.
ScenarioConfig lab_scenario(ControllerKind controller, std::uint64_t seed, double noise);

/// KEBA parameters used by `lab_scenario`.
KebaParams lab_keba_params();
inline constexpr double kLabExplorationRate = 0.1;

}  // namespace keba
