#include "keba/scenario.hpp"

#include <algorithm>
#include <stdexcept>

namespace keba {

std::vector<std::string> ScenarioConfig::diagnostics() const {
  std::vector<std::string> out;
  try {
    world.validate();
  } catch (const std::invalid_argument& e) {
    out.emplace_back(std::string("world: ") + e.what());
  }
  if (ticks == 0) out.emplace_back("ticks: must be at least 1");
  if (animats.empty()) out.emplace_back("animats: at least one animat is required");
  for (std::size_t i = 0; i < animats.size(); ++i) {
    const auto& a = animats[i];
    const std::string where = "animats[" + std::to_string(i) + "]";
    try {
      a.keba.validate();
    } catch (const std::invalid_argument& e) {
      out.emplace_back(where + ".keba: " + e.what());
    }
    if (!(a.exploration_rate >= 0.0 && a.exploration_rate <= 1.0)) {
      out.emplace_back(where + ".exploration_rate: must lie in [0, 1]");
    }
    if (a.position && !(a.position->x >= 0.0 && a.position->x < world.width && a.position->y >= 0.0 &&
                        a.position->y < world.height)) {
      out.emplace_back(where + ".position: outside the world");
    }
  }
  for (std::size_t i = 0; i < placements.size(); ++i) {
    if (placements[i].kind == PhenomenonKind::animat) {
      out.emplace_back("placements[" + std::to_string(i) + "].kind: animats are declared under animats");
    }
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::string where = "events[" + std::to_string(i) + "]";
    if (e.kind == PhenomenonKind::animat) out.emplace_back(where + ".kind: animats cannot be scheduled");
    if (!(e.position.x >= 0.0 && e.position.x < world.width && e.position.y >= 0.0 && e.position.y < world.height)) {
      out.emplace_back(where + ".position: outside the world");
    }
  }
  for (const auto& m : metrics) {
    if (std::find(kMetricNames.begin(), kMetricNames.end(), m) == kMetricNames.end()) {
      out.emplace_back("metrics: unknown metric '" + m + "'");
    }
  }
  return out;
}

void ScenarioConfig::validate() const {
  const auto problems = diagnostics();
  if (problems.empty()) return;
  std::string message = "invalid scenario '" + name + "':";
  for (const auto& p : problems) message += "\n  " + p;
  throw std::invalid_argument(message);
}

Simulation build_simulation(const ScenarioConfig& config) {
  config.validate();
  Simulation sim(config.world, config.seed);
  for (const auto& p : config.placements) {
    for (std::size_t i = 0; i < p.count; ++i) sim.spawn_random(p.kind);
  }
  for (const auto& spec : config.animats) sim.add_animat(spec);
  for (const auto& e : config.events) sim.schedule_event(e);
  return sim;
}

KebaParams lab_keba_params() {
  KebaParams k;
  k.persistence = 2.0;
  k.stability_speed = 0.1;
  k.noise_floor = 0.0;
  return k;
}

ScenarioConfig lab_scenario(ControllerKind controller, std::uint64_t seed, double noise) {
  ScenarioConfig c;
  c.name = "lab";
  c.seed = seed;
  c.ticks = 20000;
  c.world.noise_amplitude = noise;
  c.world.rain.size = 5.0;
  c.world.lightning.size = 5.0;
  c.placements.push_back({PhenomenonKind::rock, 60});
  AnimatSpec spec;
  spec.controller = controller;
  spec.keba = lab_keba_params();
  spec.exploration_rate = kLabExplorationRate;
  c.animats.push_back(spec);
  return c;
}

}  // namespace keba
