#include "doctest.h"

#include <random>

#include "helper/routing/routing.hpp"

using namespace helper;
using namespace helper::routing;

namespace {

NeighborEntry neighbor(unsigned id, GeoPosition pos, std::uint32_t q, double er, double e0 = 25.0,
                       double goodput = 5000.0) {
  NeighborEntry e;
  e.node = node_id(id);
  e.position = pos;
  e.queue_backlog = q;
  e.residual_j = er;
  e.initial_j = e0;
  e.goodput_bps = goodput;
  e.probe_bitrate_bps = 5000.0;
  return e;
}

const GeoPosition kDest{1000.0, 0.0};
const NodeId kDestId = node_id(99);

}  // namespace

TEST_CASE("utility of a relay: worked example") {
  // G=5000, P=0.1 -> eta 50000; q 4 vs 2; d 1000 vs 500; half energy.
  LocalView i{node_id(1), {0, 0}, 4, {}};
  auto j = neighbor(2, {500, 0}, 2, 12.5);
  CHECK(utility(i, j, {5000.0, 0.1}, kDestId, kDest) == doctest::Approx(6250.0));
}

TEST_CASE("utility when the neighbor is the destination equals link efficiency") {
  LocalView i{node_id(1), {0, 0}, 1, {}};
  auto j = neighbor(99, kDest, 7, 25.0);
  CHECK(utility(i, j, {5000.0, 0.1}, kDestId, kDest) == doctest::Approx(50000.0));
  CHECK(link_efficiency(j, {5000.0, 0.1}) == doctest::Approx(50000.0));
}

TEST_CASE("backpressure and progress gates zero the utility") {
  LocalView i{node_id(1), {0, 0}, 4, {}};
  CHECK(utility(i, neighbor(2, {500, 0}, 4, 25), {}, kDestId, kDest) == 0.0);
  CHECK(utility(i, neighbor(2, {500, 0}, 9, 25), {}, kDestId, kDest) == 0.0);
  CHECK(utility(i, neighbor(2, {-500, 0}, 0, 25), {}, kDestId, kDest) == 0.0);
  CHECK(utility(i, neighbor(2, {0, 1000}, 0, 25), {}, kDestId, kDest) == 0.0);
}

TEST_CASE("seek picks the highest-scoring neighbor") {
  LocalView i{node_id(1), {0, 0}, 4, {}};
  i.neighbors.push_back(neighbor(2, {500, 0}, 2, 12.5));   // 6250
  i.neighbors.push_back(neighbor(3, {500, 0}, 2, 6.0));    // 3000
  auto hop = seek_next_hop(i, kDestId, kDest, {});
  REQUIRE(hop);
  CHECK(hop->node == node_id(2));
  CHECK(hop->utility == doctest::Approx(6250.0));
  CHECK(hop->u_norm == doctest::Approx(0.125));
}

TEST_CASE("seek holds when every neighbor is behind") {
  LocalView i{node_id(1), {0, 0}, 4, {}};
  i.neighbors.push_back(neighbor(2, {-500, 0}, 0, 25));
  i.neighbors.push_back(neighbor(3, {0, 1200}, 0, 25));
  CHECK_FALSE(seek_next_hop(i, kDestId, kDest, {}).has_value());
}

TEST_CASE("seek forwards straight to a destination neighbor") {
  LocalView i{node_id(1), {0, 0}, 1, {neighbor(99, kDest, 3, 25)}};
  auto hop = seek_next_hop(i, kDestId, kDest, {});
  REQUIRE(hop);
  CHECK(hop->node == kDestId);
}

TEST_CASE("seek skips links below the goodput floor and over capacity") {
  LocalView i{node_id(1), {0, 0}, 4, {neighbor(2, {500, 0}, 0, 25, 25, 1000.0)}};
  CHECK_FALSE(seek_next_hop(i, kDestId, kDest, {}).has_value());
  RoutingParams params;
  params.strategies = {{10000.0, 0.1}};
  params.capacity_bps = 5000.0;
  i.neighbors = {neighbor(2, {500, 0}, 0, 25)};
  CHECK_FALSE(seek_next_hop(i, kDestId, kDest, params).has_value());
}

TEST_CASE("ties break on residual energy, then node id, then strategy order") {
  LocalView i{node_id(1), {0, 0}, 4, {}};
  // Same utility: er/e0 equal but er differs.
  i.neighbors.push_back(neighbor(5, {500, 0}, 2, 10.0, 20.0));
  i.neighbors.push_back(neighbor(6, {500, 0}, 2, 12.5, 25.0));
  CHECK(seek_next_hop(i, kDestId, kDest, {})->node == node_id(6));
  i.neighbors = {neighbor(6, {500, 0}, 2, 12.5), neighbor(5, {500, 0}, 2, 12.5)};
  CHECK(seek_next_hop(i, kDestId, kDest, {})->node == node_id(5));
  RoutingParams params;
  params.strategies = {{5000.0, 0.1}, {2500.0, 0.05}};
  auto hop = seek_next_hop(i, kDestId, kDest, params);
  CHECK(hop->strategy == TransmissionStrategy{5000.0, 0.1});
}

TEST_CASE("utility is invariant to scaling energies and queues together") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int k = 0; k < 200; ++k) {
    LocalView i{node_id(1), {0, 0}, 10, {}};
    auto j = neighbor(2, {u(rng) * 900, u(rng) * 300}, 3, 25 * u(rng));
    const double base = utility(i, j, {}, kDestId, kDest);
    LocalView i2 = i;
    i2.queue_backlog = 20;
    auto j2 = j;
    j2.queue_backlog = 6;
    j2.residual_j *= 4;
    j2.initial_j *= 4;
    CHECK(utility(i2, j2, {}, kDestId, kDest) == doctest::Approx(base));
  }
}

TEST_CASE("greedy picks the neighbor closest to the destination") {
  LocalView i{node_id(1), {0, 0}, 1, {}};
  i.neighbors.push_back(neighbor(2, {500, 0}, 0, 25));   // d_js 500
  i.neighbors.push_back(neighbor(3, {200, 0}, 0, 25));   // d_js 800
  CHECK(greedy_next_hop(i, kDestId, kDest) == node_id(2));
  i.neighbors = {neighbor(3, {1000, 1000}, 0, 25)};       // d_js == d_is
  CHECK_FALSE(greedy_next_hop(i, kDestId, kDest).has_value());
}

TEST_CASE("greedy on the grid takes the diagonal toward F") {
  // A(0,0) with neighbors B(1000,0), D(0,1000), E(1000,1000); F at (2000,1000).
  LocalView a{node_id(0), {0, 0}, 1, {}};
  a.neighbors.push_back(neighbor(1, {1000, 0}, 0, 25));
  a.neighbors.push_back(neighbor(3, {0, 1000}, 0, 25));
  a.neighbors.push_back(neighbor(4, {1000, 1000}, 0, 25));
  CHECK(greedy_next_hop(a, node_id(5), {2000, 1000}) == node_id(4));
}

TEST_CASE("flood cache suppresses duplicates until the entry expires") {
  FloodCache c(10.0);
  CHECK(c.insert(node_id(1), 7, 0.0));
  CHECK_FALSE(c.insert(node_id(1), 7, 5.0));
  CHECK(c.insert(node_id(2), 7, 5.0));
  CHECK(c.insert(node_id(1), 7, 11.0));
}

namespace {

NetworkLayer layer(NodeId self, Algorithm a = Algorithm::kSeek) {
  return NetworkLayer(self, {0, 0}, a, {}, [](NodeId id) -> std::optional<GeoPosition> {
    if (id == kDestId) return kDest;
    return std::nullopt;
  });
}

HelperPacket flood(std::uint8_t htl) {
  HelperPacket p;
  p.origin = node_id(9);
  p.src = node_id(9);
  p.seq = 1;
  p.htl = htl;
  return p;
}

}  // namespace

TEST_CASE("broadcast handling: rebroadcast with decremented htl") {
  auto net = layer(node_id(1));
  CHECK(net.receive(flood(2), 0.0) == Inbound::kDeliverAndRebroadcast);
  REQUIRE(net.backlog() == 1);
  CHECK(net.queues().priority().size() + net.queues().best_effort().size() == 1);
  const auto& q = net.queues().best_effort().front().packet;
  CHECK(q.htl == 1);
  CHECK(q.src == node_id(1));
  CHECK(net.receive(flood(2), 1.0) == Inbound::kDuplicate);

  auto net2 = layer(node_id(1));
  CHECK(net2.receive(flood(0), 0.0) == Inbound::kDeliver);
  CHECK(net2.backlog() == 0);
}

TEST_CASE("unicast handling: deliver, forward or drop") {
  auto net = layer(node_id(1));
  HelperPacket p = flood(5);
  p.final_dst = node_id(1);
  p.next_hop = node_id(1);
  CHECK(net.receive(p, 0.0) == Inbound::kDeliver);
  p.seq = 2;
  p.final_dst = kDestId;
  CHECK(net.receive(p, 0.0) == Inbound::kForward);
  CHECK(net.queues().best_effort().back().packet.htl == 4);
  p.seq = 3;
  p.htl = 0;
  CHECK(net.receive(p, 0.0) == Inbound::kDropped);
}

TEST_CASE("MAC failure halves goodput, reroutes once, then drops") {
  auto net = layer(node_id(1));
  NeighborTable table(node_id(1));
  table.upsert(neighbor(2, {500, 0}, 0, 25));
  HelperPacket p;
  p.origin = node_id(1);
  p.final_dst = kDestId;
  p.next_hop = kDestId;
  p.seq = 4;
  net.originate(p, 0.0);
  auto frame = net.next_frame(table, {}, 0.0);
  REQUIRE(frame);
  CHECK(frame->packet.next_hop == node_id(2));
  CHECK(net.on_failed(frame->packet, table) == FailureOutcome::kRerouting);
  CHECK(table.find(node_id(2))->goodput_bps == doctest::Approx(2500.0));
  CHECK(net.backlog() == 1);
  CHECK(net.on_failed(frame->packet, table) == FailureOutcome::kDropped);
  CHECK(net.backlog() == 0);
}

TEST_CASE("forwarding decisions are recorded with their gate inputs") {
  auto net = layer(node_id(1));
  NeighborTable table(node_id(1));
  table.upsert(neighbor(2, {500, 0}, 0, 25));
  HelperPacket p;
  p.origin = node_id(1);
  p.final_dst = kDestId;
  p.next_hop = kDestId;
  net.originate(p, 0.0);
  REQUIRE(net.next_frame(table, {}, 0.0));
  auto recs = net.take_forward_records();
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].q_i == 1);
  CHECK(recs[0].q_j == 0);
  CHECK(recs[0].d_is == doctest::Approx(1000.0));
  CHECK(recs[0].d_js == doctest::Approx(500.0));
}

TEST_CASE("unroutable unicast heads are held") {
  auto net = layer(node_id(1));
  NeighborTable table(node_id(1));
  HelperPacket p;
  p.final_dst = kDestId;
  p.next_hop = kDestId;
  net.originate(p, 0.0);
  CHECK_FALSE(net.next_frame(table, {}, 0.0).has_value());
  CHECK(net.holding());
}
