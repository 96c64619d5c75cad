#include "keba/lab_session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "keba/persistence.hpp"

namespace keba::lab {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr std::array<std::string_view, 4> kChannelNames{"world", "animats", "koncepts", "traces"};
constexpr std::size_t kRecentTraces = 32;
constexpr std::uint64_t kMaxStep = 1'000'000;
constexpr double kMaxSpeed = 1000.0;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const json& require(const json& message, std::string_view key) {
  auto it = message.find(key);
  if (it == message.end()) throw ProtocolError("missing field '" + std::string(key) + "'");
  return *it;
}

std::uint64_t require_id(const json& message, std::string_view key) {
  const json& v = require(message, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ProtocolError("field '" + std::string(key) + "' must be a non-negative integer");
}

double require_number(const json& message, std::string_view key) {
  const json& v = require(message, key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    throw ProtocolError("field '" + std::string(key) + "' must be a finite number");
  }
  return v.get<double>();
}

std::string require_string(const json& message, std::string_view key) {
  const json& v = require(message, key);
  if (!v.is_string()) throw ProtocolError("field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

bool inside(const WorldParams& p, Vec2 v) { return v.x >= 0.0 && v.x < p.width && v.y >= 0.0 && v.y < p.height; }

ojson trace_json(const TickTrace& t) { return ojson::parse(to_json_line(t)); }

std::size_t animat_index(const Simulation& sim, std::uint64_t id) {
  const auto& animats = sim.world().animats;
  for (std::size_t i = 0; i < animats.size(); ++i) {
    if (animats[i].id == id) return i;
  }
  return animats.size();
}

}  // namespace

std::string_view to_string(Channel channel) { return kChannelNames[static_cast<std::size_t>(channel)]; }

std::optional<Channel> parse_channel(std::string_view name) {
  for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
    if (kChannelNames[i] == name) return static_cast<Channel>(i);
  }
  return std::nullopt;
}

std::string_view command_name(const Command& command) {
  return std::visit(Overloaded{
                        [](const SpawnPhenomenon&) { return std::string_view("spawn_phenomenon"); },
                        [](const DeletePhenomenon&) { return std::string_view("delete_phenomenon"); },
                        [](const SetLocomotion&) { return std::string_view("set_locomotion"); },
                        [](const SetNoise&) { return std::string_view("set_noise"); },
                        [](const Pause&) { return std::string_view("pause"); },
                        [](const Resume&) { return std::string_view("resume"); },
                        [](const Step&) { return std::string_view("step"); },
                        [](const SetSpeed&) { return std::string_view("set_speed"); },
                        [](const Save&) { return std::string_view("save"); },
                        [](const Load&) { return std::string_view("load"); },
                        [](const Subscribe&) { return std::string_view("subscribe"); },
                        [](const RequestKoncepts&) { return std::string_view("request_koncepts"); },
                        [](const RequestSnapshot&) { return std::string_view("snapshot"); },
                    },
                    command);
}

Command parse_command(const json& message) {
  if (!message.is_object()) throw ProtocolError("message must be a JSON object");
  const std::string name = require_string(message, "command");
  if (name == "spawn_phenomenon") {
    SpawnPhenomenon c;
    auto kind = parse_phenomenon_kind(require_string(message, "kind"));
    if (!kind || *kind == PhenomenonKind::animat) {
      throw ProtocolError("field 'kind' must be one of food, rock, lightning, rain");
    }
    c.kind = *kind;
    auto pos = message.find("position");
    if (pos != message.end() && !(pos->is_string() && pos->get<std::string>() == "random")) {
      if (!pos->is_object()) throw ProtocolError("field 'position' must be \"random\" or {\"x\":..,\"y\":..}");
      c.position = Vec2{require_number(*pos, "x"), require_number(*pos, "y")};
    }
    return c;
  }
  if (name == "delete_phenomenon") return DeletePhenomenon{require_id(message, "phenomenon_id")};
  if (name == "set_locomotion") {
    auto mode = parse_locomotion(require_string(message, "mode"));
    if (!mode) throw ProtocolError("field 'mode' must be one of wander, circular, static");
    return SetLocomotion{require_id(message, "animat_id"), *mode};
  }
  if (name == "set_noise") return SetNoise{require_number(message, "amplitude")};
  if (name == "pause") return Pause{};
  if (name == "resume") return Resume{};
  if (name == "step") {
    Step s;
    if (message.contains("count")) s.count = require_id(message, "count");
    return s;
  }
  if (name == "set_speed") return SetSpeed{require_number(message, "ticks_per_second")};
  if (name == "save") return Save{require_string(message, "path")};
  if (name == "load") return Load{require_string(message, "path")};
  if (name == "subscribe") {
    const json& list = require(message, "channels");
    if (!list.is_array()) throw ProtocolError("field 'channels' must be an array");
    Subscribe s;
    for (const auto& c : list) {
      auto ch = c.is_string() ? parse_channel(c.get<std::string>()) : std::nullopt;
      if (!ch) throw ProtocolError("unknown channel " + c.dump() + " (expected world, animats, koncepts, traces)");
      s.channels.insert(*ch);
    }
    return s;
  }
  if (name == "request_koncepts") return RequestKoncepts{require_id(message, "animat_id")};
  if (name == "snapshot") return RequestSnapshot{};
  throw ProtocolError("unknown command '" + name + "'");
}

ojson command_to_json(const Command& command) {
  ojson j;
  j["command"] = command_name(command);
  std::visit(Overloaded{
                 [&](const SpawnPhenomenon& c) {
                   j["kind"] = to_string(c.kind);
                   if (c.position) {
                     j["position"] = ojson{{"x", c.position->x}, {"y", c.position->y}};
                   } else {
                     j["position"] = "random";
                   }
                 },
                 [&](const DeletePhenomenon& c) { j["phenomenon_id"] = c.phenomenon_id; },
                 [&](const SetLocomotion& c) {
                   j["animat_id"] = c.animat_id;
                   j["mode"] = to_string(c.mode);
                 },
                 [&](const SetNoise& c) { j["amplitude"] = c.amplitude; },
                 [&](const Step& c) { j["count"] = c.count; },
                 [&](const SetSpeed& c) { j["ticks_per_second"] = c.ticks_per_second; },
                 [&](const Save& c) { j["path"] = c.path; },
                 [&](const Load& c) { j["path"] = c.path; },
                 [&](const Subscribe& c) {
                   auto list = ojson::array();
                   for (auto ch : c.channels) list.push_back(to_string(ch));
                   j["channels"] = list;
                 },
                 [&](const RequestKoncepts& c) { j["animat_id"] = c.animat_id; },
                 [](const auto&) {},
             },
             command);
  return j;
}

ojson apply_to_simulation(Simulation& sim, const Command& command) {
  ojson extra = ojson::object();
  std::visit(Overloaded{
                 [&](const SpawnPhenomenon& c) {
                   const Phenomenon& p = c.position ? sim.world().spawn(c.kind, *c.position) : sim.spawn_random(c.kind);
                   extra["phenomenon_id"] = p.id;
                 },
                 [&](const DeletePhenomenon& c) {
                   if (!sim.world().remove_phenomenon(c.phenomenon_id)) {
                     throw std::invalid_argument("unknown phenomenon id " + std::to_string(c.phenomenon_id));
                   }
                 },
                 [&](const SetLocomotion& c) {
                   AnimatBody* a = sim.world().find_animat(c.animat_id);
                   if (a == nullptr) throw std::invalid_argument("unknown animat id " + std::to_string(c.animat_id));
                   a->locomotion = c.mode;
                 },
                 [&](const SetNoise& c) {
                   WorldParams params = sim.world().params;
                   params.noise_amplitude = c.amplitude;
                   params.validate();
                   sim.world().params = params;
                 },
                 [&](const Load& c) { sim = load_state_file(c.path); },
                 [](const auto&) {},
             },
             command);
  return extra;
}

Session::Session(Simulation sim, std::optional<ScenarioConfig> scenario)
    : sim_(std::move(sim)), scenario_(std::move(scenario)) {
  initial_state_ = save_state(sim_, scenario_ ? &*scenario_ : nullptr);
}

void Session::validate(const Command& command) const {
  const WorldState& world = sim_.world();
  std::visit(Overloaded{
                 [&](const SpawnPhenomenon& c) {
                   if (c.position && !inside(world.params, *c.position)) {
                     throw std::invalid_argument("position outside the world");
                   }
                 },
                 [&](const DeletePhenomenon& c) {
                   if (std::none_of(world.phenomena.begin(), world.phenomena.end(),
                                    [&](const Phenomenon& p) { return p.id == c.phenomenon_id; })) {
                     throw std::invalid_argument("unknown phenomenon id " + std::to_string(c.phenomenon_id));
                   }
                 },
                 [&](const SetLocomotion& c) {
                   if (world.find_animat(c.animat_id) == nullptr) {
                     throw std::invalid_argument("unknown animat id " + std::to_string(c.animat_id));
                   }
                 },
                 [&](const SetNoise& c) {
                   if (!(c.amplitude >= 0.0 && c.amplitude <= 1.0)) {
                     throw std::invalid_argument("amplitude must lie in [0, 1]");
                   }
                 },
                 [&](const Step& c) {
                   if (c.count == 0 || c.count > kMaxStep) {
                     throw std::invalid_argument("count must lie in [1, " + std::to_string(kMaxStep) + "]");
                   }
                 },
                 [&](const SetSpeed& c) {
                   if (!(c.ticks_per_second > 0.0 && c.ticks_per_second <= kMaxSpeed)) {
                     throw std::invalid_argument("ticks_per_second must lie in (0, 1000]");
                   }
                 },
                 [&](const Save& c) {
                   if (c.path.empty()) throw std::invalid_argument("path must not be empty");
                 },
                 [&](const Load& c) {
                   if (c.path.empty()) throw std::invalid_argument("path must not be empty");
                 },
                 [&](const RequestKoncepts& c) {
                   const auto i = animat_index(sim_, c.animat_id);
                   if (i == world.animats.size()) {
                     throw std::invalid_argument("unknown animat id " + std::to_string(c.animat_id));
                   }
                   if (!sim_.controllers()[i].hierarchy) {
                     throw std::invalid_argument("animat " + std::to_string(c.animat_id) + " has no koncept hierarchy");
                   }
                 },
                 [](const auto&) {},
             },
             command);
}

std::optional<ojson> Session::submit(const json& message) {
  json request_id = nullptr;
  if (message.is_object() && message.contains("id")) request_id = message["id"];
  auto error = [&](std::string_view kind, const std::string& reason) {
    return ojson{{"type", "error"}, {"id", request_id}, {"error", kind}, {"reason", reason}, {"tick", sim_.tick()}};
  };
  try {
    if (message.is_object() && message.contains("type") && message["type"] != "command") {
      throw ProtocolError("unsupported message type " + message["type"].dump());
    }
    Command command = parse_command(message);
    validate(command);
    queue_.push_back(QueuedCommand{request_id, std::move(command)});
    return std::nullopt;
  } catch (const ProtocolError& e) {
    return error("protocol", e.what());
  } catch (const std::invalid_argument& e) {
    return error("rejected", e.what());
  }
}

ojson Session::apply(const QueuedCommand& queued) {
  const std::uint64_t tick = sim_.tick();
  ojson ack{{"type", "ack"}, {"id", queued.request_id}, {"command", command_name(queued.command)}, {"tick", tick}};
  try {
    validate(queued.command);
    std::visit(Overloaded{
                   [&](const Pause&) { running_ = false; },
                   [&](const Resume&) { running_ = true; },
                   [&](const Step& c) { pending_steps_ += c.count; },
                   [&](const SetSpeed& c) { ticks_per_second_ = c.ticks_per_second; },
                   [&](const Save& c) { save_state_file(c.path, sim_, scenario_ ? &*scenario_ : nullptr); },
                   [&](const Subscribe& c) { channels_ = c.channels; },
                   [&](const RequestKoncepts& c) { koncept_requests_.insert(c.animat_id); },
                   [&](const Load&) {
                     ack.update(apply_to_simulation(sim_, queued.command));
                     died_last_tick_.clear();
                     recent_traces_.clear();
                     koncept_requests_.clear();
                     ack["tick"] = sim_.tick();
                   },
                   [&](const auto&) { ack.update(apply_to_simulation(sim_, queued.command)); },
               },
               queued.command);
  } catch (const std::exception& e) {
    return ojson{{"type", "error"}, {"id", queued.request_id}, {"error", "rejected"}, {"reason", e.what()},
                 {"tick", tick}};
  }
  log_.push_back(LogEntry{tick, queued.command});
  snapshot_due_ = true;
  return ack;
}

std::vector<ojson> Session::apply_pending() {
  std::vector<ojson> out;
  while (!queue_.empty()) {
    QueuedCommand next = std::move(queue_.front());
    queue_.pop_front();
    out.push_back(apply(next));
  }
  return out;
}

void Session::tick() {
  const auto traces = sim_.step();
  if (pending_steps_ > 0) --pending_steps_;
  died_last_tick_.clear();
  for (const auto& t : traces) {
    if (!t.acted) continue;
    if (!t.physiology.alive) died_last_tick_.push_back(t.animat_id);
    recent_traces_.push_back(t);
    if (recent_traces_.size() > kRecentTraces) recent_traces_.pop_front();
  }
  snapshot_due_ = true;
}

ojson Session::snapshot() {
  snapshot_due_ = false;
  const WorldState& world = sim_.world();
  ojson s;
  s["type"] = "snapshot";
  s["protocol_version"] = kProtocolVersion;
  s["tick"] = sim_.tick();
  s["running"] = running_;
  s["pending_steps"] = pending_steps_;
  s["ticks_per_second"] = ticks_per_second_;
  s["noise"] = world.params.noise_amplitude;
  auto channels = ojson::array();
  for (auto c : channels_) channels.push_back(to_string(c));
  s["channels"] = channels;

  // Living animats, plus those that died in the last tick (listed once, then dropped).
  auto listed = [&](const AnimatBody& a) {
    return a.physiology.alive ||
           std::find(died_last_tick_.begin(), died_last_tick_.end(), a.id) != died_last_tick_.end();
  };

  if (channels_.count(Channel::world)) {
    ojson w;
    w["width"] = world.params.width;
    w["height"] = world.params.height;
    auto phenomena = ojson::array();
    for (const auto& p : world.phenomena) {
      phenomena.push_back(ojson{{"id", p.id},
                                {"kind", to_string(p.kind)},
                                {"x", p.position.x},
                                {"y", p.position.y},
                                {"size", p.size},
                                {"age", p.age},
                                {"rgb", {p.qualia.redness, p.qualia.greenness, p.qualia.blueness}}});
    }
    w["phenomena"] = phenomena;
    s["world"] = w;
  }
  if (channels_.count(Channel::animats)) {
    auto animats = ojson::array();
    for (std::size_t i = 0; i < world.animats.size(); ++i) {
      const AnimatBody& a = world.animats[i];
      if (!listed(a)) continue;
      animats.push_back(ojson{{"id", a.id},
                              {"x", a.position.x},
                              {"y", a.position.y},
                              {"heading", a.heading},
                              {"locomotion", to_string(a.locomotion)},
                              {"controller", to_string(sim_.controllers()[i].kind)},
                              {"perception_radius", a.perception_radius},
                              {"energy", a.physiology.energy},
                              {"hunger", a.physiology.hunger},
                              {"thirst", a.physiology.thirst},
                              {"alive", a.physiology.alive},
                              {"action", to_string(a.current_action)}});
    }
    s["animats"] = animats;
  }
  if (channels_.count(Channel::koncepts)) {
    auto summary = ojson::array();
    auto dumps = ojson::array();
    for (std::size_t i = 0; i < world.animats.size(); ++i) {
      const AnimatBody& a = world.animats[i];
      const auto& h = sim_.controllers()[i].hierarchy;
      if (!h || !listed(a)) continue;
      summary.push_back(ojson{{"animat", a.id}, {"level_counts", h->level_counts()}});
      if (koncept_requests_.count(a.id)) {
        dumps.push_back(ojson{{"animat", a.id}, {"hierarchy", hierarchy_to_json(*h, false)}});
      }
    }
    koncept_requests_.clear();
    s["koncepts"] = ojson{{"summary", summary}, {"dumps", dumps}};
  }
  if (channels_.count(Channel::traces)) {
    auto traces = ojson::array();
    for (const auto& t : recent_traces_) traces.push_back(trace_json(t));
    s["traces"] = traces;
  }
  return s;
}

ojson Session::log_header() const {
  return ojson{{"type", "session"}, {"protocol_version", kProtocolVersion}, {"initial_state", initial_state_}};
}

ojson Session::log_line(const LogEntry& entry) {
  return ojson{{"type", "command"}, {"tick", entry.tick}, {"command", command_to_json(entry.command)}};
}

Simulation Session::replay(const json& header, const std::vector<LogEntry>& entries, std::uint64_t end_tick) {
  if (!header.is_object() || !header.contains("initial_state")) {
    throw std::invalid_argument("replay: header lacks initial_state");
  }
  Simulation sim = load_state(header["initial_state"]);
  std::size_t i = 0;
  for (;;) {
    while (i < entries.size() && entries[i].tick == sim.tick()) {
      const Command& c = entries[i++].command;
      if (!std::holds_alternative<Save>(c)) apply_to_simulation(sim, c);
    }
    if (i < entries.size() && entries[i].tick < sim.tick()) {
      throw std::invalid_argument("replay: log entry at tick " + std::to_string(entries[i].tick) +
                                  " precedes the simulation tick " + std::to_string(sim.tick()));
    }
    if (i >= entries.size() && sim.tick() >= end_tick) break;
    sim.step();
  }
  return sim;
}

Simulation Session::replay_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("replay: cannot open " + path);
  std::string line;
  json header;
  std::vector<LogEntry> entries;
  std::optional<std::uint64_t> end_tick;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("replay: line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "session") {
      header = j;
    } else if (type == "command") {
      entries.push_back(LogEntry{j.at("tick").get<std::uint64_t>(), parse_command(j.at("command"))});
    } else if (type == "end") {
      end_tick = j.at("tick").get<std::uint64_t>();
    } else {
      throw std::invalid_argument("replay: line " + std::to_string(line_no) + ": unknown record type");
    }
  }
  if (header.is_null()) throw std::invalid_argument("replay: missing session header");
  const std::uint64_t end = end_tick.value_or(entries.empty() ? 0 : entries.back().tick);
  return replay(header, entries, end);
}

}  // namespace keba::lab
