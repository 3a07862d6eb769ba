#include "doctest.h"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "helper/emu/server.hpp"
#include "helper/emu/world.hpp"

using namespace helper;
using namespace helper::emu;

namespace {

sim::Scenario grid(double duration = 600.0) {
  sim::Scenario sc = sim::canonical_grid();
  sc.duration_s = duration;
  return sc;
}

std::vector<json> frames_with(const std::vector<json>& frames, const std::string& op) {
  std::vector<json> out;
  for (const auto& f : frames) {
    if (f.at("op") == op) out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_CASE("snapshot of a fresh world") {
  World w(grid());
  const json s = w.snapshot();
  CHECK(s.at("op") == "snapshot");
  CHECK(s.at("tick") == 1);
  const auto& body = s.at("body");
  CHECK(body.at("nodes").size() == 6);
  CHECK(body.at("resources").empty());
  CHECK(body.at("pending").empty());
  CHECK(body.at("erc") == 5);
  for (const auto& n : body.at("nodes")) {
    CHECK(n.at("alive") == true);
    CHECK(n.at("residual_j").get<double>() <= 25.0);
    CHECK(n.contains("position"));
  }
}

TEST_CASE("metrics ticks arrive once per emulated second with increasing ticks") {
  World w(grid());
  const auto frames = w.advance_to(5.5);
  const auto ticks = frames_with(frames, "metrics_tick");
  REQUIRE(ticks.size() == 5);
  for (std::size_t i = 0; i < ticks.size(); ++i) {
    CHECK(ticks[i].at("t").get<double>() == doctest::Approx(1.0 + static_cast<double>(i)));
  }
  std::uint64_t last = 0;
  for (const auto& f : frames) {
    CHECK(f.at("tick").get<std::uint64_t>() > last);
    last = f.at("tick").get<std::uint64_t>();
  }
  CHECK(w.now() == doctest::Approx(5.5));
}

TEST_CASE("network discovery from the operator marks every node discovered") {
  World w(grid());
  w.advance_to(2.0);
  const Outbound out = w.handle(R"({"op":"nd","id":7})");
  CHECK(out.reply.at("op") == "nd");
  CHECK(out.reply.at("body").at("ok") == true);
  CHECK(out.reply.at("id") == 7);
  CHECK(out.reply.at("body").at("originated").size() == 1);
  const auto frames = w.advance_to(120.0);
  CHECK(frames_with(frames, "node_event").size() >= 5);
  CHECK(w.snapshot_body().at("discovered").size() == 5);
}

TEST_CASE("a HELP at A reaches the ERC client with A's location") {
  World w(grid());
  w.advance_to(30.0);
  const Outbound out = w.handle(R"({"op":"send","node":"A","body":{"type":"HELP","text":"trapped"}})");
  REQUIRE(out.reply.at("op") == "send");
  const auto frames = w.advance_to(200.0);
  bool seen = false;
  for (const auto& f : frames_with(frames, "receive")) {
    const auto& body = f.at("body");
    if (f.at("node") == 5 && body.at("event") == "distress") {
      seen = true;
      CHECK(body.at("origin") == 0);
      CHECK(body.at("message").at("location").at("x") == 0.0);
      CHECK(body.at("message").at("location").at("y") == 0.0);
      CHECK(body.at("message").at("text") == "trapped");
    }
  }
  CHECK(seen);
}

TEST_CASE("malformed and invalid requests get structured errors") {
  sim::Scenario sc = grid();
  sim::Injection drain;
  drain.at = 1.0;
  drain.op = sim::Injection::Op::kDrain;
  drain.node = *sc.by_label("B");
  sc.injections = {drain};
  World w(sc);
  w.advance_to(3.0);
  auto code_of = [&](const char* text) {
    const Outbound out = w.handle(text);
    CHECK(out.reply.at("op") == "error");
    return out.reply.at("body").at("code").get<std::string>();
  };
  CHECK(code_of("{not json") == "bad_json");
  CHECK(code_of("[1,2]") == "bad_request");
  CHECK(code_of(R"({"op":"dance"})") == "unknown_op");
  CHECK(code_of(R"({"op":"receive"})") == "unknown_op");
  CHECK(code_of(R"({"op":"send","node":"Q","body":{"type":"LOCAL"}})") == "unknown_node");
  CHECK(code_of(R"({"op":"send","body":{"type":"LOCAL"}})") == "bad_request");
  CHECK(code_of(R"({"op":"send","node":"B","body":{"type":"NEIGHBORHOOD","text":"hi"}})") ==
        "dead_node");
  CHECK(code_of(R"({"op":"nd","node":"A"})") == "rejected");
  CHECK(code_of(R"({"op":"approve","body":{}})") == "bad_request");
  // The world keeps serving after errors.
  const Outbound ok = w.handle(R"({"op":"snapshot"})");
  CHECK(ok.reply.at("op") == "snapshot");
  for (const auto& n : ok.reply.at("body").at("nodes")) {
    if (n.at("label") == "B") {
      CHECK(n.at("alive") == false);
      CHECK(n.at("residual_j") == 0.0);
    }
  }
  CHECK(w.recorded().empty());
}

TEST_CASE("resource approval flow updates the snapshot") {
  World w(grid());
  w.advance_to(20.0);
  w.handle(R"({"op":"send","node":"A","body":{"type":"RESOURCE","resource":"WATER","text":"tank","location":{"x":10,"y":20}}})");
  const auto frames = w.advance_to(200.0);
  std::uint32_t pending = 0;
  for (const auto& f : frames_with(frames, "node_event")) {
    if (f.at("body").at("event") == "pending_resource") pending = f.at("body").at("pending");
  }
  REQUIRE(pending != 0);
  CHECK(w.snapshot_body().at("pending").size() == 1);
  const Outbound out =
      w.handle(R"({"op":"approve","body":{"pending":)" + std::to_string(pending) + "}}");
  CHECK(out.reply.at("op") == "approve");
  const json snap = w.snapshot_body();
  const auto& res = snap.at("resources");
  REQUIRE(res.size() == 1);
  CHECK(res[0].at("resource") == "WATER");
  CHECK(w.snapshot_body().at("pending").empty());
}

TEST_CASE("replaying a recorded session reproduces its deliveries") {
  sim::Scenario sc = grid(400.0);
  auto all = sim::canonical_sessions();
  sc.sessions = {all[0]};
  sc.sessions[0].count = 30;
  sc.sessions[0].interval_s = 2.0;
  World w(sc);
  w.advance_to(12.3);
  w.handle(R"({"op":"nd"})");
  w.advance_to(40.0);
  w.handle(R"({"op":"send","node":"C","body":{"type":"HELP","text":"help"}})");
  w.advance_to(41.7);
  w.handle(R"({"op":"alert","body":{"text":"storm"}})");
  w.advance_to(150.0);
  REQUIRE(w.recorded().size() == 3);

  sim::Simulator replay(w.replay_scenario());
  replay.set_stop_when_idle(false);
  const sim::MetricsLog log = replay.run();
  const auto& live = w.simulator().log();
  REQUIRE(log.deliveries.size() == live.deliveries.size());
  for (std::size_t i = 0; i < log.deliveries.size(); ++i) {
    CHECK(log.deliveries[i].t == live.deliveries[i].t);
    CHECK(log.deliveries[i].node == live.deliveries[i].node);
    CHECK(log.deliveries[i].origin == live.deliveries[i].origin);
    CHECK(log.deliveries[i].seq == live.deliveries[i].seq);
  }
  CHECK(log.tx.size() == live.tx.size());
}

namespace {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct Client {
  net::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};

  explicit Client(unsigned short port) {
    tcp::resolver resolver(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/");
  }
  json read() {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  void write(const std::string& text) { ws.write(net::buffer(text)); }
};

bool is_broadcast(const json& f) {
  const auto op = f.at("op").get<std::string>();
  return op == "metrics_tick" || op == "receive" || op == "node_event";
}

}  // namespace

TEST_CASE("websocket clients get a snapshot, errors and identical broadcasts") {
  ServeOptions opt;
  opt.port = 0;
  opt.time_scale = 40.0;
  EmuServer server(grid(3600.0), opt);
  const unsigned short port = server.start();
  REQUIRE(port != 0);

  Client a(port);
  const json snap_a = a.read();
  CHECK(snap_a.at("op") == "snapshot");
  Client b(port);
  json snap_b;
  // b's first frame is its own snapshot.
  snap_b = b.read();
  CHECK(snap_b.at("op") == "snapshot");
  const auto joined = std::max(snap_a.at("tick").get<std::uint64_t>(), snap_b.at("tick").get<std::uint64_t>());

  a.write("{oops");
  a.write(R"({"op":"nd"})");
  std::vector<json> seen_a, seen_b;
  bool got_error = false, got_nd = false;
  while (frames_with(seen_a, "metrics_tick").size() < 8) {
    json f = a.read();
    if (f.at("op") == "error") got_error = f.at("body").at("code") == "bad_json";
    if (f.at("op") == "nd") got_nd = true;
    if (is_broadcast(f)) seen_a.push_back(f);
  }
  while (frames_with(seen_b, "metrics_tick").size() < 6) {
    json f = b.read();
    if (is_broadcast(f)) seen_b.push_back(f);
  }
  CHECK(got_error);
  CHECK(got_nd);
  const auto last_b = seen_b.back().at("tick").get<std::uint64_t>();
  std::vector<std::string> common_a, common_b;
  for (const auto& f : seen_a) {
    const auto t = f.at("tick").get<std::uint64_t>();
    if (t > joined && t <= last_b) common_a.push_back(f.dump());
  }
  for (const auto& f : seen_b) {
    if (f.at("tick").get<std::uint64_t>() > joined) common_b.push_back(f.dump());
  }
  CHECK_FALSE(common_b.empty());
  CHECK(common_a == common_b);

  const sim::Scenario replay = server.replay_scenario();
  CHECK(replay.injections.size() == 1);
  server.stop();
}
