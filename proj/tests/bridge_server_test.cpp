#include "sflc/bridge_server.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace sflc;
using namespace sflc::bridge;

namespace {

// Minimal synchronous client used by the tests.
class Client {
 public:
  explicit Client(unsigned short port, const std::string& target = "/ws") : ws_(io_) {
    tcp::resolver resolver(io_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", target);
  }

  nlohmann::json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return nlohmann::json::parse(beast::buffers_to_string(buf.data()));
  }

  // Reads until a message of the given type arrives.
  nlohmann::json read_type(const std::string& type, int limit = 500) {
    for (int i = 0; i < limit; ++i) {
      auto j = read();
      if (j["type"] == type) return j;
    }
    ADD_FAILURE() << "no " << type << " message within " << limit << " reads";
    return {};
  }

  void write(const std::string& text) { ws_.write(net::buffer(text)); }

  void close() { ws_.close(ws::close_code::normal); }

 private:
  net::io_context io_;
  ws::stream<tcp::socket> ws_;
};

http::response<http::string_body> http_get(unsigned short port, const std::string& target) {
  net::io_context io;
  tcp::resolver resolver(io);
  beast::tcp_stream stream(io);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  beast::error_code ignored;
  stream.socket().shutdown(tcp::socket::shutdown_both, ignored);
  return res;
}

SessionConfig fast_session() {
  SessionConfig c;
  c.broadcast_hz = 50.0;
  return c;
}

}  // namespace

TEST(BridgeServer, HealthEndpoint) {
  BridgeServer server(fast_session(), {});
  server.start();
  ASSERT_NE(server.port(), 0);
  const auto res = http_get(server.port(), "/health");
  EXPECT_EQ(res.result(), http::status::ok);
  const auto j = nlohmann::json::parse(res.body());
  EXPECT_EQ(j["v"], live::kWireVersion);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_TRUE(j.contains("t"));
  EXPECT_EQ(j["state"], "running");
}

TEST(BridgeServer, UnknownPathIs404) {
  BridgeServer server(fast_session(), {});
  server.start();
  EXPECT_EQ(http_get(server.port(), "/nope").result(), http::status::not_found);
}

TEST(BridgeServer, StreamsVersionedTelemetry) {
  BridgeServer server(fast_session(), {});
  server.start();
  Client c(server.port());
  double last_t = -1.0;
  for (int i = 0; i < 5; ++i) {
    const auto j = c.read_type("telemetry");
    EXPECT_EQ(j["v"], live::kWireVersion);
    const auto f = live::decode_frame(j.dump());
    EXPECT_GT(f.t, last_t);
    last_t = f.t;
  }
  c.close();
}

TEST(BridgeServer, ClientsSeeIdenticalFrames) {
  BridgeServer server(fast_session(), {});
  server.start();
  Client a(server.port()), b(server.port());
  std::map<double, std::string> seen_a;
  for (int i = 0; i < 10; ++i) {
    const auto j = a.read_type("telemetry");
    seen_a[j["t"].get<double>()] = j.dump();
  }
  int matched = 0;
  for (int i = 0; i < 10; ++i) {
    const auto j = b.read_type("telemetry");
    if (auto it = seen_a.find(j["t"].get<double>()); it != seen_a.end()) {
      EXPECT_EQ(it->second, j.dump());
      ++matched;
    }
  }
  EXPECT_GT(matched, 0);
}

TEST(BridgeServer, MalformedCommandGetsErrorAndKeepsConnection) {
  BridgeServer server(fast_session(), {});
  server.start();
  Client c(server.port());
  c.write("{not json");
  const auto err = c.read_type("error");
  EXPECT_EQ(err["v"], live::kWireVersion);
  EXPECT_FALSE(err["message"].get<std::string>().empty());
  c.write(R"({"v": 1, "type": "launch"})");
  c.read_type("error");
  // still connected
  c.read_type("telemetry");
}

TEST(BridgeServer, SetSigmaIsAcknowledgedAndApplied) {
  BridgeServer server(fast_session(), {});
  server.start();
  Client c(server.port());
  c.read_type("telemetry");
  c.write(live::encode_command(live::OperatorCommand::set_sigma(SwitchSignal::energy_saving())));
  const auto ack = c.read_type("ack");
  EXPECT_EQ(ack["command"], "set_sigma");
  EXPECT_EQ(ack["accepted"], true);
  const auto f = c.read_type("telemetry");
  EXPECT_EQ(f["sigma"], 0);
}

TEST(BridgeServer, PauseIsVisibleInHealth) {
  BridgeServer server(fast_session(), {});
  server.start();
  Client c(server.port());
  c.write(live::encode_command(live::OperatorCommand::pause()));
  c.read_type("ack");
  const auto f = c.read_type("telemetry");
  EXPECT_EQ(f["state"], "paused");
  const auto j = nlohmann::json::parse(http_get(server.port(), "/health").body());
  EXPECT_EQ(j["state"], "paused");
  EXPECT_EQ(j["clients"], 1);
}

TEST(BridgeServer, OccupiedPortThrowsPortInUse) {
  BridgeServer first(fast_session(), {});
  first.start();
  ServerOptions opts;
  opts.port = first.port();
  BridgeServer second(fast_session(), opts);
  EXPECT_THROW(second.start(), PortInUse);
}

TEST(BridgeServer, StopIsIdempotentAndClientsDisconnect) {
  auto server = std::make_unique<BridgeServer>(fast_session(), ServerOptions{});
  server->start();
  const auto port = server->port();
  {
    Client c(port);
    c.read_type("telemetry");
    EXPECT_EQ(server->client_count(), 1u);
  }
  server->stop();
  server->stop();
  server.reset();
  net::io_context io;
  tcp::socket s(io);
  beast::error_code ec;
  s.connect({net::ip::make_address("127.0.0.1"), port}, ec);
  EXPECT_TRUE(ec);
}
