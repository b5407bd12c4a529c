#pragma once

// WebSocket bridge between a LiveSession and operator clients. One io thread
// serves the sockets; a separate stepping thread drives the session and hands
// encoded messages to each client's strand. Slow clients lose frames instead
// of slowing the simulation down.

#include "sflc/live_session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sflc::bridge {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace ws = beast::websocket;
using tcp = net::ip::tcp;
using namespace sflc::live;

class PortInUse : public std::runtime_error {
 public:
  explicit PortInUse(unsigned short port)
      : std::runtime_error("port " + std::to_string(port) + " is already in use"), port_(port) {}
  unsigned short port() const { return port_; }

 private:
  unsigned short port_;
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;  // 0 picks an ephemeral port
  std::size_t max_client_queue = 64;
  std::chrono::microseconds tick{std::chrono::milliseconds(4)};
};

namespace detail {

class ClientSession : public std::enable_shared_from_this<ClientSession> {
 public:
  using CommandSink = std::function<void(OperatorCommand)>;

  ClientSession(tcp::socket&& socket, std::size_t max_queue, CommandSink sink, std::atomic<std::size_t>& dropped)
      : ws_(std::move(socket)), max_queue_(max_queue), sink_(std::move(sink)), dropped_(dropped) {}

  template <class Request>
  void accept(Request req) {
    ws_.set_option(ws::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&ClientSession::on_accept, shared_from_this()));
  }

  /// Callable from any thread.
  void send(std::shared_ptr<const std::string> msg) {
    net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)] {
      if (self->closed_) return;
      if (self->outbox_.size() >= self->max_queue_) {
        ++self->dropped_;
        return;
      }
      self->outbox_.push_back(msg);
      if (self->outbox_.size() == 1 && self->open_) self->write_next();
    });
  }

  bool closed() const { return closed_; }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) {
      closed_ = true;
      return;
    }
    open_ = true;
    ws_.text(true);
    if (!outbox_.empty()) write_next();
    read_next();
  }

  void read_next() {
    ws_.async_read(buffer_, beast::bind_front_handler(&ClientSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      sink_(decode_command(text));
    } catch (const MalformedMessage& e) {
      outbox_.push_back(std::make_shared<const std::string>(encode_error(e.what())));
      if (outbox_.size() == 1) write_next();
    }
    read_next();
  }

  void write_next() {
    ws_.async_write(net::buffer(*outbox_.front()),
                    beast::bind_front_handler(&ClientSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      outbox_.clear();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) write_next();
  }

  ws::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  std::size_t max_queue_;
  CommandSink sink_;
  std::atomic<std::size_t>& dropped_;
  std::atomic<bool> closed_{false};
  bool open_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  using Upgrade = std::function<void(tcp::socket&&, http::request<http::string_body>)>;
  using Health = std::function<std::string()>;

  HttpSession(tcp::socket&& socket, Upgrade upgrade, Health health)
      : stream_(std::move(socket)), upgrade_(std::move(upgrade)), health_(std::move(health)) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

 private:
  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (ws::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        upgrade_(stream_.release_socket(), std::move(req_));
        return;
      }
      respond(http::status::not_found, "text/plain", "unknown websocket path\n");
      return;
    }
    if (req_.method() == http::verb::get && req_.target() == "/health") {
      respond(http::status::ok, "application/json", health_());
      return;
    }
    respond(http::status::not_found, "text/plain", "not found\n");
  }

  void respond(http::status status, const char* type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, type);
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Upgrade upgrade_;
  Health health_;
};

}  // namespace detail

class BridgeServer {
 public:
  BridgeServer(SessionConfig cfg, ServerOptions opts) : session_(std::move(cfg)), opts_(std::move(opts)) {}

  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;
  ~BridgeServer() { stop(); }

  /// Binds and starts the io and stepping threads. Throws PortInUse.
  void start() {
    const tcp::endpoint ep(net::ip::make_address(opts_.address), opts_.port);
    beast::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    // still refuses a port another socket is listening on
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (ec == net::error::address_in_use || ec == net::error::access_denied) throw PortInUse(opts_.port);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw std::runtime_error("cannot listen on " + opts_.address + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
    running_ = true;
    accept_next();
    io_thread_ = std::thread([this] { io_.run(); });
    step_thread_ = std::thread([this] { step_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    if (step_thread_.joinable()) step_thread_.join();
    net::post(io_, [this] {
      beast::error_code ignored;
      acceptor_.close(ignored);
    });
    work_.reset();
    io_.stop();
    if (io_thread_.joinable()) io_thread_.join();
  }

  unsigned short port() const { return port_; }
  std::size_t dropped_frames() const { return dropped_; }
  std::size_t client_count() {
    std::lock_guard lock(clients_mutex_);
    prune();
    return clients_.size();
  }

  /// Same JSON served at /health.
  std::string health() const {
    return nlohmann::json{{"v", kWireVersion},
                          {"status", "ok"},
                          {"t", sim_time_.load()},
                          {"state", to_string(static_cast<RunState>(run_state_.load()))},
                          {"clients", client_estimate_.load()}}
        .dump();
  }

 private:
  void accept_next() {
    acceptor_.async_accept(net::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<detail::HttpSession>(
          std::move(socket),
          [this](tcp::socket&& s, http::request<http::string_body> req) { add_client(std::move(s), std::move(req)); },
          [this] { return health(); })
          ->run();
      accept_next();
    });
  }

  void add_client(tcp::socket&& socket, http::request<http::string_body> req) {
    auto client = std::make_shared<detail::ClientSession>(
        std::move(socket), opts_.max_client_queue, [this](OperatorCommand c) { session_.enqueue(std::move(c)); },
        dropped_);
    {
      std::lock_guard lock(clients_mutex_);
      prune();
      clients_.push_back(client);
      client_estimate_ = clients_.size();
    }
    client->accept(std::move(req));
  }

  void prune() {
    std::erase_if(clients_, [](const std::weak_ptr<detail::ClientSession>& w) {
      const auto c = w.lock();
      return !c || c->closed();
    });
  }

  void broadcast(std::string text) {
    const auto msg = std::make_shared<const std::string>(std::move(text));
    std::lock_guard lock(clients_mutex_);
    prune();
    client_estimate_ = clients_.size();
    for (const auto& w : clients_) {
      if (auto c = w.lock()) c->send(msg);
    }
  }

  void step_loop() {
    using clock = std::chrono::steady_clock;
    auto last = clock::now();
    while (running_) {
      std::this_thread::sleep_for(opts_.tick);
      const auto now = clock::now();
      const double wall_dt = std::chrono::duration<double>(now - last).count();
      last = now;
      const StepOutput out = session_.step(wall_dt);
      sim_time_ = session_.time();
      run_state_ = static_cast<int>(session_.run_state());
      for (const auto& n : out.notices) broadcast(encode_notice(n));
      for (const auto& f : out.frames) broadcast(encode_frame(f));
    }
  }

  LiveSession session_;
  ServerOptions opts_;
  net::io_context io_;
  net::executor_work_guard<net::io_context::executor_type> work_{io_.get_executor()};
  tcp::acceptor acceptor_{io_};
  unsigned short port_ = 0;
  std::atomic<bool> running_{false};
  std::thread io_thread_;
  std::thread step_thread_;

  std::mutex clients_mutex_;
  std::vector<std::weak_ptr<detail::ClientSession>> clients_;
  std::atomic<std::size_t> dropped_{0};
  std::atomic<std::size_t> client_estimate_{0};
  std::atomic<double> sim_time_{0.0};
  std::atomic<int> run_state_{0};
};

}  // namespace sflc::bridge
