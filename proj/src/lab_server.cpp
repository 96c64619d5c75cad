#include "keba/lab_server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace keba::lab {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {

struct Outgoing {
  std::shared_ptr<const std::string> text;
  bool droppable = false;
};

}  // namespace

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, LabServer::Impl& server, std::uint64_t id)
      : ws_(std::move(socket)), server_(server), id_(id) {}

  void start();
  void send(Outgoing message);
  std::uint64_t id() const { return id_; }

 private:
  void read();
  void write();
  void close();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  bool writing_ = false;
  bool open_ = false;
  LabServer::Impl& server_;
  std::uint64_t id_;
};

struct LabServer::Impl {
  Impl(Session& s, ServerOptions o) : session(s), options(std::move(o)), acceptor(ioc) {}

  Session& session;
  ServerOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::thread io_thread;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;

  // Owned by the io thread.
  std::map<std::uint64_t, std::shared_ptr<Connection>> connections;
  std::uint64_t next_connection = 1;

  // Shared between the io thread and the loop thread.
  std::mutex mutex;
  std::condition_variable wake;
  std::deque<std::pair<std::uint64_t, std::string>> inbound;

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      auto c = std::make_shared<Connection>(std::move(socket), *this, next_connection++);
      connections[c->id()] = c;
      c->start();
      accept();
    });
  }

  void received(std::uint64_t client, std::string text) {
    {
      std::lock_guard lock(mutex);
      inbound.emplace_back(client, std::move(text));
    }
    wake.notify_one();
  }

  void dropped(std::uint64_t client) { connections.erase(client); }

  // Callable from the loop thread; hops onto the io thread.
  void send_to(std::optional<std::uint64_t> client, const nlohmann::ordered_json& message, bool droppable) {
    auto text = std::make_shared<const std::string>(message.dump());
    net::post(ioc, [this, client, text, droppable] {
      for (auto& [id, c] : connections) {
        if (!client || *client == id) c->send(Outgoing{text, droppable});
      }
    });
  }
};

void Connection::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) {
      self->close();
      return;
    }
    self->open_ = true;
    self->write();
    self->read();
  });
}

void Connection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->close();
      return;
    }
    self->server_.received(self->id_, beast::buffers_to_string(self->buffer_.data()));
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

void Connection::send(Outgoing message) {
  if (queue_.size() >= server_.options.max_queued_messages) {
    if (message.droppable) return;
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
      if (it->droppable && (it != queue_.begin() || !writing_)) {
        queue_.erase(it);
        break;
      }
    }
  }
  queue_.push_back(std::move(message));
  write();
}

void Connection::write() {
  if (!open_ || writing_ || queue_.empty()) return;
  writing_ = true;
  ws_.text(true);
  ws_.async_write(net::buffer(*queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->writing_ = false;
    if (ec) {
      self->close();
      return;
    }
    self->queue_.pop_front();
    self->write();
  });
}

void Connection::close() {
  open_ = false;
  queue_.clear();
  server_.dropped(id_);
}

LabServer::LabServer(Session& session, ServerOptions options)
    : impl_(std::make_unique<Impl>(session, std::move(options))) {}

LabServer::~LabServer() {
  if (impl_->io_thread.joinable()) {
    net::post(impl_->ioc, [this] {
      beast::error_code ignored;
      impl_->acceptor.close(ignored);
      impl_->connections.clear();
    });
    impl_->work.reset();
    impl_->ioc.stop();
    impl_->io_thread.join();
  }
}

std::uint16_t LabServer::start() {
  const tcp::endpoint endpoint(net::ip::make_address(impl_->options.address), impl_->options.port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
  const auto port = impl_->acceptor.local_endpoint().port();
  impl_->work.emplace(net::make_work_guard(impl_->ioc));
  impl_->accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
  return port;
}

void LabServer::run(const std::atomic<bool>& stop) {
  Impl& s = *impl_;
  Session& session = s.session;

  std::ofstream record;
  std::size_t logged = 0;
  if (s.options.record_path) {
    record.open(*s.options.record_path, std::ios::trunc);
    if (!record) throw std::runtime_error("cannot open command log " + *s.options.record_path);
    record << session.log_header().dump() << '\n' << std::flush;
  }

  auto now_ms = [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
  auto next_tick = Clock::now();
  std::uint64_t ticks_since_snapshot = 0;

  while (!stop.load()) {
    std::deque<std::pair<std::uint64_t, std::string>> batch;
    {
      std::lock_guard lock(s.mutex);
      batch.swap(s.inbound);
    }
    for (auto& [client, text] : batch) {
      nlohmann::json message;
      try {
        message = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        s.send_to(client,
                  nlohmann::ordered_json{{"type", "error"}, {"id", nullptr}, {"error", "protocol"},
                                         {"reason", std::string("invalid JSON: ") + e.what()},
                                         {"tick", session.simulation().tick()}},
                  false);
        continue;
      }
      if (auto error = session.submit(message)) s.send_to(client, *error, false);
    }

    // Tick boundary: commands first, then at most one tick.
    const auto acks = session.apply_pending();
    const bool forced = !acks.empty();
    for (const auto& a : acks) s.send_to(std::nullopt, a, false);
    if (record.is_open()) {
      for (; logged < session.log().size(); ++logged) record << Session::log_line(session.log()[logged]).dump() << '\n';
      record.flush();
    }

    bool ticked = false;
    const auto now = Clock::now();
    if (session.pending_steps() > 0) {
      session.tick();
      ticked = true;
    } else if (session.running() && now >= next_tick) {
      session.tick();
      ticked = true;
      const auto period = std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(1.0 / session.ticks_per_second()));
      next_tick = (now - next_tick > std::chrono::seconds(1)) ? now + period : next_tick + period;
    }
    if (ticked) ++ticks_since_snapshot;

    const bool cadence = ticks_since_snapshot >= s.options.snapshot_every || !session.running();
    if (session.snapshot_due() && (forced || cadence)) {
      auto snap = session.snapshot();
      snap["sent_at_ms"] = now_ms();
      s.send_to(std::nullopt, snap, true);
      ticks_since_snapshot = 0;
    }

    if (!ticked) {
      std::unique_lock lock(s.mutex);
      const auto deadline = session.running() ? std::min(next_tick, Clock::now() + std::chrono::milliseconds(20))
                                              : Clock::now() + std::chrono::milliseconds(20);
      s.wake.wait_until(lock, deadline, [&] { return !s.inbound.empty() || stop.load(); });
    }
  }

  if (record.is_open()) {
    for (; logged < session.log().size(); ++logged) record << Session::log_line(session.log()[logged]).dump() << '\n';
    record << nlohmann::ordered_json{{"type", "end"}, {"tick", session.simulation().tick()}}.dump() << '\n';
    record.flush();
  }
}

}  // namespace keba::lab
