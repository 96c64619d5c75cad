#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "keba/agent.hpp"
#include "keba/scenario.hpp"

namespace keba::lab {

inline constexpr int kProtocolVersion = 1;

enum class Channel : std::uint8_t { world, animats, koncepts, traces };

std::string_view to_string(Channel channel);
std::optional<Channel> parse_channel(std::string_view name);

struct SpawnPhenomenon {
  PhenomenonKind kind = PhenomenonKind::food;
  std::optional<Vec2> position;  // random when absent
  bool operator==(const SpawnPhenomenon&) const = default;
};
struct DeletePhenomenon {
  std::uint64_t phenomenon_id = 0;
  bool operator==(const DeletePhenomenon&) const = default;
};
struct SetLocomotion {
  std::uint64_t animat_id = 0;
  Locomotion mode = Locomotion::wander;
  bool operator==(const SetLocomotion&) const = default;
};
struct SetNoise {
  double amplitude = 0.0;
  bool operator==(const SetNoise&) const = default;
};
struct Pause {
  bool operator==(const Pause&) const = default;
};
struct Resume {
  bool operator==(const Resume&) const = default;
};
struct Step {
  std::uint64_t count = 1;
  bool operator==(const Step&) const = default;
};
struct SetSpeed {
  double ticks_per_second = 10.0;
  bool operator==(const SetSpeed&) const = default;
};
struct Save {
  std::string path;
  bool operator==(const Save&) const = default;
};
struct Load {
  std::string path;
  bool operator==(const Load&) const = default;
};
struct Subscribe {
  std::set<Channel> channels;
  bool operator==(const Subscribe&) const = default;
};
struct RequestKoncepts {
  std::uint64_t animat_id = 0;
  bool operator==(const RequestKoncepts&) const = default;
};
struct RequestSnapshot {
  bool operator==(const RequestSnapshot&) const = default;
};

using Command = std::variant<SpawnPhenomenon, DeletePhenomenon, SetLocomotion, SetNoise, Pause, Resume, Step,
                             SetSpeed, Save, Load, Subscribe, RequestKoncepts, RequestSnapshot>;

std::string_view command_name(const Command& command);

/// Malformed message; `reason` is sent back to the client.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the payload of a `{"type":"command", ...}` message. Throws ProtocolError.
Command parse_command(const nlohmann::json& message);
nlohmann::ordered_json command_to_json(const Command& command);

struct QueuedCommand {
  nlohmann::json request_id;  // echoed in the ack, null when absent
  Command command;
};

/// One line of a recorded session: the tick boundary at which a command took effect.
struct LogEntry {
  std::uint64_t tick = 0;
  Command command;
  bool operator==(const LogEntry&) const = default;
};

/// Simulation plus steering state. Pure: no I/O besides explicit save/load commands,
/// and no clock. Commands are validated on submission and applied at the next tick boundary.
class Session {
 public:
  explicit Session(Simulation sim, std::optional<ScenarioConfig> scenario = std::nullopt);

  /// Parses and validates. Returns an error message to send back immediately, or nothing when queued.
  std::optional<nlohmann::ordered_json> submit(const nlohmann::json& message);

  /// Applies every queued command in arrival order; returns one ack or error per command.
  std::vector<nlohmann::ordered_json> apply_pending();

  /// Whether the loop should advance a tick now (running, or a pending step request).
  bool wants_tick() const { return running_ || pending_steps_ > 0; }

  /// Advances exactly one tick.
  void tick();

  /// Post-tick state restricted to the subscribed channels. Requested koncept dumps are consumed.
  nlohmann::ordered_json snapshot();

  /// True once after a tick or an on-demand request; the loop emits a snapshot when set.
  bool snapshot_due() const { return snapshot_due_; }

  const Simulation& simulation() const { return sim_; }
  bool running() const { return running_; }
  double ticks_per_second() const { return ticks_per_second_; }
  std::uint64_t pending_steps() const { return pending_steps_; }
  const std::set<Channel>& channels() const { return channels_; }
  const std::vector<LogEntry>& log() const { return log_; }
  const nlohmann::ordered_json& initial_state() const { return initial_state_; }

  /// Header line plus one line per applied command, as JSON objects.
  nlohmann::ordered_json log_header() const;
  static nlohmann::ordered_json log_line(const LogEntry& entry);

  /// Rebuilds the final simulation from a recorded log (header, entries, end tick).
  static Simulation replay(const nlohmann::json& header, const std::vector<LogEntry>& entries,
                           std::uint64_t end_tick);
  /// Reads a JSON-lines log file and replays it.
  static Simulation replay_file(const std::string& path);

 private:
  void validate(const Command& command) const;
  nlohmann::ordered_json apply(const QueuedCommand& queued);

  Simulation sim_;
  std::optional<ScenarioConfig> scenario_;
  nlohmann::ordered_json initial_state_;
  std::deque<QueuedCommand> queue_;
  std::vector<LogEntry> log_;
  bool running_ = false;
  std::uint64_t pending_steps_ = 0;
  double ticks_per_second_ = 10.0;
  std::set<Channel> channels_{Channel::world, Channel::animats};
  std::set<std::uint64_t> koncept_requests_;
  std::vector<std::uint64_t> died_last_tick_;
  std::deque<TickTrace> recent_traces_;
  bool snapshot_due_ = true;
};

/// Applies a command's effect on the simulation alone; shared by the session and replay.
/// Returns extra ack fields (e.g. the id of a spawned phenomenon).
nlohmann::ordered_json apply_to_simulation(Simulation& sim, const Command& command);

}  // namespace keba::lab
