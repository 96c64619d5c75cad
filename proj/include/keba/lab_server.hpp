#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "keba/lab_session.hpp"

namespace keba::lab {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;               // 0 picks a free port
  std::optional<std::string> record_path;  // command log, JSON lines
  std::uint64_t snapshot_every = 1;        // ticks between snapshots while running
  std::size_t max_queued_messages = 256;   // per client; surplus snapshots are dropped
};

/// WebSocket front end of a Session. Network I/O runs on its own thread; the simulation
/// advances only inside `run`, on the caller's thread.
class LabServer {
 public:
  LabServer(Session& session, ServerOptions options);
  ~LabServer();
  LabServer(const LabServer&) = delete;
  LabServer& operator=(const LabServer&) = delete;

  /// Binds and starts accepting connections. Returns the bound port.
  std::uint16_t start();

  /// Runs the tick loop until `stop` becomes true. Finalizes the command log on exit.
  void run(const std::atomic<bool>& stop);

  struct Impl;  // opaque; defined with the transport

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace keba::lab
