#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "helper/sim/battery.hpp"
#include "helper/sim/metrics.hpp"
#include "helper/sim/plot.hpp"
#include "helper/sim/simulator.hpp"

using namespace helper;
using namespace helper::sim;
namespace fs = std::filesystem;

namespace {

Scenario pair_scenario(double separation = 1000.0) {
  Scenario sc;
  sc.name = "pair";
  sc.nodes = {NodeSpec{node_id(0), "S", {0.0, 0.0}, 25.0},
              NodeSpec{node_id(1), "R", {separation, 0.0}, 25.0}};
  sc.erc = node_id(1);
  sc.link.range_m = 1500.0;
  sc.duration_s = 600.0;
  sc.mac = mac_config_for(sc.link);
  return sc;
}

Scenario quiet_grid(double duration = 300.0) {
  Scenario sc = canonical_grid();
  sc.duration_s = duration;
  return sc;
}

Injection at(double t, Injection::Op op, NodeId node) {
  Injection inj;
  inj.at = t;
  inj.op = op;
  inj.node = node;
  return inj;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("helper_test_sim_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("two nodes on an ideal channel deliver everything sent") {
  Scenario sc = pair_scenario();
  Session s;
  s.src = node_id(0);
  s.dst = node_id(1);
  s.count = 20;
  s.interval_s = 0.5;
  sc.sessions = {s};
  Simulator sim(sc);
  const MetricsLog log = sim.run();
  REQUIRE(log.sessions.size() == 1);
  CHECK(log.sessions[0].sent == 20);
  CHECK(log.sessions[0].delivered == 20);
  CHECK(log.sessions[0].dropped == 0);
  CHECK(log.deaths.empty());
  // The run stops once every session has finished.
  CHECK(log.end_time < sc.duration_s);
  for (double l : log.sessions[0].latencies) CHECK(l > 0.0);
}

TEST_CASE("same scenario and seed give byte-identical CSVs") {
  Scenario sc = quiet_grid(400.0);
  auto all = canonical_sessions();
  sc.sessions.assign(all.begin(), all.begin() + 2);
  sc.injections = {at(50.0, Injection::Op::kNd, sc.erc)};
  const auto a = scratch_dir("det_a");
  const auto b = scratch_dir("det_b");
  const auto c = scratch_dir("det_c");
  const auto files = write_run_csvs(Simulator(sc).run(), a.string(), 1000.0);
  write_run_csvs(Simulator(sc).run(), b.string(), 1000.0);
  sc.rng_seed = 2;
  write_run_csvs(Simulator(sc).run(), c.string(), 1000.0);
  bool any_differs = false;
  for (const auto& f : files) {
    const auto name = fs::path(f).filename();
    CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name.string());
    any_differs = any_differs || slurp(a / name) != slurp(c / name);
  }
  CHECK(any_differs);
}

TEST_CASE("minimum residual energy over time") {
  Scenario sc = quiet_grid(300.0);
  sc.injections = {at(200.0, Injection::Op::kDrain, *sc.by_label("C"))};
  const MetricsLog log = Simulator(sc).run();
  CHECK(min_residual(log, 0.0) == doctest::Approx(25.0));
  REQUIRE_FALSE(log.tx.empty());
  // The setup flood from the ERC is the first transmission in the network.
  const auto& first = log.tx.front();
  CHECK(first.node == sc.erc);
  CHECK(min_residual(log, first.t) == doctest::Approx(25.0 - first.cost.joules()));
  CHECK(min_residual(log, 200.0) == 0.0);
  CHECK(min_residual(log, 250.0) == 0.0);
  double prev = min_residual(log, 0.0);
  for (double t = 0.0; t <= 300.0; t += 5.0) {
    const double v = min_residual(log, t);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("network lifetime") {
  SUBCASE("no deaths means the run duration") {
    const MetricsLog log = Simulator(quiet_grid(120.0)).run();
    CHECK(log.deaths.empty());
    CHECK(network_lifetime(log) == doctest::Approx(120.0));
  }
  SUBCASE("a scripted drain sets the lifetime") {
    Scenario sc = quiet_grid(1200.0);
    sc.injections = {at(900.0, Injection::Op::kDrain, *sc.by_label("C"))};
    const MetricsLog log = Simulator(sc).run();
    REQUIRE(log.deaths.size() == 1);
    CHECK(log.deaths[0].cause == "drain");
    CHECK(network_lifetime(log) == doctest::Approx(900.0));
  }
  SUBCASE("stop_on_first_death ends the run at the death") {
    Scenario sc = quiet_grid(1200.0);
    sc.stop_on_first_death = true;
    sc.injections = {at(100.0, Injection::Op::kDrain, *sc.by_label("B"))};
    const MetricsLog log = Simulator(sc).run();
    CHECK(log.end_time == doctest::Approx(100.0));
  }
}

TEST_CASE("normalized throughput against a point-to-point calibration") {
  Scenario sc = pair_scenario();
  Session s;
  s.src = node_id(0);
  s.dst = node_id(1);
  sc.sessions = {s};
  const double th_l = calibrate_link_throughput(sc);
  CHECK(th_l > 0.0);
  CHECK(th_l < 5000.0);

  SUBCASE("single hop normalizes to about one") {
    sc.rng_seed = 2;
    const double v = normalized_throughput(Simulator(sc).run(), th_l);
    CHECK(v == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("a two-hop relay chain stays under one half") {
    Scenario chain = sc;
    chain.nodes.push_back(NodeSpec{node_id(2), "T", {2000.0, 0.0}, 25.0});
    chain.erc = node_id(2);
    chain.sessions[0].dst = node_id(2);
    const double v = normalized_throughput(Simulator(chain).run(), th_l);
    CHECK(v > 0.0);
    CHECK(v <= 0.5);
  }
  SUBCASE("missing calibration is an error") {
    const MetricsLog log = Simulator(sc).run();
    CHECK_THROWS_AS(normalized_throughput(log, std::nullopt), MetricsError);
    CHECK_THROWS_AS(normalized_throughput(log, 0.0), MetricsError);
  }
}

TEST_CASE("energy is conserved exactly") {
  Scenario sc = quiet_grid(1500.0);
  auto all = canonical_sessions();
  sc.sessions.assign(all.begin(), all.end());
  sc.injections = {at(300.0, Injection::Op::kDrain, *sc.by_label("D"))};
  const MetricsLog log = Simulator(sc).run();
  CHECK_FALSE(log.deaths.empty());
  for (const auto& [node, init] : log.initial) {
    const Energy drained = log.drained.count(node) ? log.drained.at(node) : Energy{};
    CHECK((init - log.residual.at(node)).nanojoules() ==
          (tx_energy(log, node) + drained).nanojoules());
  }
}

TEST_CASE("network discovery reaches every field node once") {
  Scenario sc = quiet_grid(300.0);
  sc.injections = {at(20.0, Injection::Op::kNd, sc.erc)};
  Simulator sim(sc);
  const MetricsLog log = sim.run();
  const auto& found = sim.service(sc.erc).discovered();
  CHECK(found.size() == 5);
  for (const auto& n : sc.nodes) {
    if (n.id != sc.erc) CHECK(found.count(n.id) == 1);
  }
  // Each node answers the flood once however many copies it overhears.
  std::map<NodeId, int> replies;
  for (const auto& o : log.originated) {
    if (o.app == AppType::kHelperUpdate) ++replies[o.node];
  }
  CHECK(replies.size() == 5);
  for (const auto& [node, count] : replies) CHECK(count == 1);
}

TEST_CASE("an ALERT reaches each field node exactly once") {
  Scenario sc = quiet_grid(300.0);
  Injection alert = at(20.0, Injection::Op::kAlert, sc.erc);
  alert.message.text = "evacuate";
  sc.injections = {alert};
  const MetricsLog log = Simulator(sc).run();
  std::map<NodeId, int> got;
  for (const auto& e : log.service) {
    if (e.kind == message::ServiceEvent::Kind::kReceived && e.message.type == AppType::kAlert) {
      CHECK(e.message.text == "evacuate");
      ++got[e.node];
    }
  }
  CHECK(got.size() == 5);
  for (const auto& [node, count] : got) CHECK(count == 1);
}

TEST_CASE("a HELP yields one ERC unicast and one vicinity broadcast") {
  Scenario sc = quiet_grid(300.0);
  Injection help = at(30.0, Injection::Op::kSend, *sc.by_label("A"));
  help.message.type = AppType::kHelp;
  help.message.text = "trapped";
  help.message.location = GeoPosition{5.0, 5.0};
  sc.injections = {help};
  const MetricsLog log = Simulator(sc).run();
  int unicast = 0, broadcast = 0;
  for (const auto& o : log.originated) {
    if (o.injection != 0) continue;
    CHECK(o.app == AppType::kHelp);
    if (o.final_dst == sc.erc) ++unicast;
    if (o.final_dst == kBroadcast && o.htl == 2) ++broadcast;
  }
  CHECK(unicast == 1);
  CHECK(broadcast == 1);
  int distress = 0;
  for (const auto& e : log.service) {
    if (e.kind == message::ServiceEvent::Kind::kDistress) ++distress;
  }
  CHECK(distress == 1);
}

TEST_CASE("operations on a dead node are refused") {
  Simulator sim(quiet_grid(100.0));
  const NodeId b = *sim.scenario().by_label("B");
  CHECK(sim.apply(at(0.0, Injection::Op::kDrain, b)).ok);
  sim.run_until(10.0);
  const auto res = sim.apply(at(10.0, Injection::Op::kNd, b));
  CHECK_FALSE(res.ok);
  CHECK(res.error.find("dead") != std::string::npos);
  CHECK_FALSE(sim.node(b)->alive);
  CHECK(sim.node(b)->residual_j == 0.0);
  CHECK(sim.log().errors.size() == 1);
}

TEST_CASE("incremental driving matches a single run") {
  Scenario sc = quiet_grid(200.0);
  auto all = canonical_sessions();
  sc.sessions.assign(all.begin(), all.begin() + 1);
  const MetricsLog whole = Simulator(sc).run();
  Simulator step(sc);
  for (double t = 0.0; t <= 200.0; t += 7.0) step.run_until(t);
  step.run_until(200.0);
  const MetricsLog parts = step.finish();
  CHECK(parts.tx.size() == whole.tx.size());
  CHECK(total_delivered(parts) == total_delivered(whole));
  CHECK(parts.residual == whole.residual);
}

TEST_CASE("battery emits one row per scenario, mode, seed and metric") {
  BatteryConfig cfg;
  cfg.base.duration_s = 200.0;
  cfg.session_counts = {1, 2};
  cfg.seeds = 2;
  cfg.delay_count = 5;
  cfg.link_throughput_bps = 1000.0;
  const BatteryReport rep = run_battery(cfg);
  // 2 counts x 2 modes x 2 seeds x 5 lifetime metrics + the same runs for delay.
  CHECK(rep.rows.size() == 2 * 2 * 2 * 5 + 2 * 2 * 2 * 1);
  for (const auto& r : rep.rows) CHECK(r.error.empty());
  CHECK(rep.summary.size() == 2 * 2 * 6);
  CHECK(rep.mean(routing::Algorithm::kSeek, 1, kLifetimeMetric) == doctest::Approx(200.0));

  const auto dir = scratch_dir("battery");
  const auto csvs = write_battery_csvs(rep, dir.string());
  CHECK(slurp(csvs[0]).rfind("scenario,mode,sessions,seed,metric,value,error\r\n", 0) == 0);
  const auto plots = write_battery_plots(rep, dir.string());
  CHECK(plots.size() == 4);
  for (const auto& p : plots) CHECK(slurp(p).find("<svg") == 0);

  SUBCASE("failed runs are recorded per row and the battery continues") {
    cfg.link_throughput_bps = 0.0;
    cfg.delay_count = 0;
    cfg.session_counts = {1};
    cfg.seeds = 1;
    const BatteryReport bad = run_battery(cfg);
    CHECK(bad.rows.size() == 2 * 5);
    for (const auto& r : bad.rows) CHECK_FALSE(r.error.empty());
  }
}

TEST_CASE("svg rendering is deterministic and escapes text") {
  LinePlot p{"a < b & c", "x", "y", {Series{"s1", {1, 2, 3}, {3, 1, 2}, {0.5, 0.5, 0.5}}}, true};
  const std::string svg = render_svg(p);
  CHECK(svg == render_svg(p));
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("s1") != std::string::npos);
}
