#include "keba/agent.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace keba {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::keba: return "keba";
    case ControllerKind::random: return "random";
    case ControllerKind::none: return "none";
  }
  return "unknown";
}

std::optional<ControllerKind> parse_controller_kind(std::string_view name) {
  if (name == "keba") return ControllerKind::keba;
  if (name == "random") return ControllerKind::random;
  if (name == "none") return ControllerKind::none;
  return std::nullopt;
}

Controller Controller::make(ControllerKind kind, const KebaParams& params, std::uint64_t link_seed,
                            std::uint64_t policy_seed, double exploration_rate) {
  if (!(exploration_rate >= 0.0 && exploration_rate <= 1.0)) {
    throw std::invalid_argument("controller: exploration_rate must lie in [0, 1]");
  }
  Controller c;
  c.exploration_rate = kind == ControllerKind::keba ? exploration_rate : 0.0;
  c.kind = kind;
  c.policy_rng.seed(policy_seed);
  if (kind == ControllerKind::keba) c.hierarchy.emplace(params, link_seed);
  return c;
}

std::string to_json_line(const TickTrace& trace) {
  nlohmann::ordered_json j;
  j["tick"] = trace.tick;
  j["animat"] = trace.animat_id;
  j["acted"] = trace.acted;
  j["action"] = to_string(trace.action);
  j["stimulus"] = to_string(trace.stimulus.sign);
  j["magnitude"] = trace.stimulus.magnitude;
  j["energy"] = trace.physiology.energy;
  j["hunger"] = trace.physiology.hunger;
  j["thirst"] = trace.physiology.thirst;
  j["alive"] = trace.physiology.alive;
  j["koncepts"] = trace.koncept_counts;
  if (trace.created) j["created"] = trace.created->value;
  return j.dump();
}

TickTrace tick_animat(WorldState& world, AnimatBody& animat, Controller& controller, std::mt19937_64& noise_rng,
                      std::uint64_t tick) {
  TickTrace trace;
  trace.tick = tick;
  trace.animat_id = animat.id;
  trace.physiology = animat.physiology;
  if (controller.hierarchy) trace.koncept_counts = controller.hierarchy->level_counts();
  if (!animat.physiology.alive) return trace;

  const SensorVector sensors = perceive(world, animat, noise_rng);

  Action action = Action::none;
  switch (controller.kind) {
    case ControllerKind::keba: {
      auto& h = *controller.hierarchy;
      const auto before = h.next_id();
      h.step(sensors);
      if (h.next_id() != before) trace.created = KonceptId{before};
      action = h.vote_and_select().action;
      if (controller.exploration_rate > 0.0) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (unit(controller.policy_rng) < controller.exploration_rate) {
          std::uniform_int_distribution<std::size_t> pick(0, kActionCount - 1);
          action = kAllActions[pick(controller.policy_rng)];
        }
      }
      break;
    }
    case ControllerKind::random: {
      std::uniform_int_distribution<std::size_t> pick(0, kActionCount - 1);
      action = kAllActions[pick(controller.policy_rng)];
      break;
    }
    case ControllerKind::none:
      break;
  }

  const StimulusSignal stimulus = apply_action(world, animat, action);
  physiology_step(animat, world.params);
  if (controller.hierarchy && stimulus.sign != StimulusSign::none) controller.hierarchy->reinforce(action, stimulus);

  trace.acted = true;
  trace.action = action;
  trace.stimulus = stimulus;
  trace.physiology = animat.physiology;
  if (controller.hierarchy) {
    trace.koncept_counts = controller.hierarchy->level_counts();
    trace.capacity_refusals = controller.hierarchy->capacity_refusals();
  }
  return trace;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name) {
  // FNV-1a over the name, mixed with the run seed through seed_seq.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : stream_name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Simulation::Simulation(WorldParams params, std::uint64_t seed)
    : spawner_rng_(derive_seed(seed, "world/spawner")),
      placement_rng_(derive_seed(seed, "world/placement")),
      seed_(seed) {
  params.validate();
  world_.params = params;
}

std::uint64_t Simulation::add_animat(const AnimatSpec& spec) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec2 position = spec.position.value_or(
      Vec2{unit(placement_rng_) * world_.params.width, unit(placement_rng_) * world_.params.height});
  const double heading = spec.heading.value_or(unit(placement_rng_) * 2.0 * std::numbers::pi);

  auto& body = world_.add_animat(position, heading, spec.locomotion);
  const std::string prefix = "animat/" + std::to_string(body.id) + "/";
  KebaParams params = spec.keba;
  controllers_.push_back(Controller::make(spec.controller, params, derive_seed(seed_, prefix + "links"),
                                          derive_seed(seed_, prefix + "policy"), spec.exploration_rate));
  AnimatStreams streams;
  streams.noise.seed(derive_seed(seed_, prefix + "noise"));
  streams.locomotion.seed(derive_seed(seed_, prefix + "locomotion"));
  streams_.push_back(std::move(streams));
  return body.id;
}

void Simulation::schedule_event(ScheduledEvent event) {
  if (event.kind == PhenomenonKind::animat) throw std::invalid_argument("schedule_event: use add_animat for animats");
  auto it = std::upper_bound(schedule_.begin(), schedule_.end(), event.at_tick,
                             [](std::uint64_t t, const ScheduledEvent& e) { return t < e.at_tick; });
  schedule_.insert(it, event);
}

Phenomenon& Simulation::spawn_random(PhenomenonKind kind) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec2 position{unit(placement_rng_) * world_.params.width, unit(placement_rng_) * world_.params.height};
  return world_.spawn(kind, position);
}

std::vector<TickTrace> Simulation::step() {
  while (!schedule_.empty() && schedule_.front().at_tick <= tick_) {
    const auto event = schedule_.front();
    schedule_.erase(schedule_.begin());
    world_.spawn(event.kind, event.position);
  }

  std::vector<std::mt19937_64> locomotion;
  locomotion.reserve(streams_.size());
  for (auto& s : streams_) locomotion.push_back(s.locomotion);
  step_world(world_, spawner_rng_, locomotion);
  for (std::size_t i = 0; i < streams_.size(); ++i) streams_[i].locomotion = locomotion[i];

  ++tick_;
  std::vector<TickTrace> traces;
  traces.reserve(world_.animats.size());
  for (std::size_t i = 0; i < world_.animats.size(); ++i) {
    traces.push_back(tick_animat(world_, world_.animats[i], controllers_[i], streams_[i].noise, tick_));
  }
  return traces;
}

bool Simulation::all_dead() const {
  return std::none_of(world_.animats.begin(), world_.animats.end(),
                      [](const AnimatBody& a) { return a.physiology.alive; });
}

Simulation Simulation::restore(WorldState world, std::vector<Controller> controllers, std::vector<AnimatStreams> streams,
                               std::mt19937_64 spawner_rng, std::mt19937_64 placement_rng,
                               std::vector<ScheduledEvent> schedule, std::uint64_t seed, std::uint64_t tick) {
  world.params.validate();
  if (controllers.size() != world.animats.size() || streams.size() != world.animats.size()) {
    throw std::invalid_argument("simulation: controllers and streams must match the animat list");
  }
  for (std::size_t i = 1; i < world.animats.size(); ++i) {
    if (world.animats[i - 1].id >= world.animats[i].id) {
      throw std::invalid_argument("simulation: animats must be stored in ascending id order");
    }
  }
  for (const auto& c : controllers) {
    if (c.hierarchy.has_value() != (c.kind == ControllerKind::keba)) {
      throw std::invalid_argument("simulation: hierarchy present iff controller kind is keba");
    }
  }
  if (!std::is_sorted(schedule.begin(), schedule.end(),
                      [](const ScheduledEvent& a, const ScheduledEvent& b) { return a.at_tick < b.at_tick; })) {
    throw std::invalid_argument("simulation: schedule must be sorted by tick");
  }
  Simulation sim;
  sim.world_ = std::move(world);
  sim.controllers_ = std::move(controllers);
  sim.streams_ = std::move(streams);
  sim.spawner_rng_ = spawner_rng;
  sim.placement_rng_ = placement_rng;
  sim.schedule_ = std::move(schedule);
  sim.seed_ = seed;
  sim.tick_ = tick;
  return sim;
}

}  // namespace keba
