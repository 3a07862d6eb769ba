#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "helper/core/neighbor_table.hpp"
#include "helper/core/packet.hpp"
#include "helper/mac/mac_fsm.hpp"

namespace helper::routing {

enum class Algorithm { kSeek, kGreedy };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);

/// What node i knows when making a forwarding decision.
struct LocalView {
  NodeId self{};
  GeoPosition position;
  /// q_i; counts the packet being routed, so it is at least 1.
  std::size_t queue_backlog = 1;
  std::vector<NeighborEntry> neighbors;
};

struct RoutingParams {
  std::vector<TransmissionStrategy> strategies{TransmissionStrategy{}};
  double capacity_bps = 5000.0;
  /// Neighbors whose measured delivery ratio falls below this are not used.
  double goodput_floor = 0.25;
};

/// eta_ij = G_ij / P_ij: bits delivered per joule on link (i, j) under `s`.
double link_efficiency(const NeighborEntry& j, const TransmissionStrategy& s);

/// U_ij = eta_ij * (max(q_i - q_j, 0) / q_i) * ((d_is - d_js) / d_is) * (E_r^j / E_0^j).
///
/// The progress factor is clamped at zero, so the score is never negative and
/// a score of zero marks j ineligible. When j is the destination its backlog
/// counts as zero and its progress factor is 1.
double utility(const LocalView& i, const NeighborEntry& j, const TransmissionStrategy& s,
               NodeId dest, const GeoPosition& dest_pos);

struct NextHop {
  NodeId node{};
  TransmissionStrategy strategy;
  double utility = 0.0;
  /// utility / eta_ij, clamped to [0, 1]; drives the MAC backoff.
  double u_norm = 0.5;
};

/// argmax of utility over neighbors x strategies. Ties go to the higher
/// residual energy, then the lower NodeId, then the earlier strategy.
/// Neighbors fail eligibility when the strategy exceeds link capacity, the
/// measured delivery ratio is below the goodput floor, or they report no
/// residual energy.
std::optional<NextHop> seek_next_hop(const LocalView& i, NodeId dest, const GeoPosition& dest_pos,
                                     const RoutingParams& params);

/// Neighbor closest to the destination among those that make progress;
/// ties go to the lower NodeId.
std::optional<NodeId> greedy_next_hop(const LocalView& i, NodeId dest, const GeoPosition& dest_pos);

/// Remembers (origin, seq) pairs for a bounded time.
class FloodCache {
 public:
  explicit FloodCache(double ttl = 600.0) : ttl_(ttl) {}

  /// True the first time a key is seen (and records it).
  bool insert(NodeId origin, std::uint16_t seq, double now);
  bool contains(NodeId origin, std::uint16_t seq) const;

 private:
  void evict(double now);

  double ttl_;
  std::map<std::pair<NodeId, std::uint16_t>, double> seen_;
  std::deque<std::pair<double, std::pair<NodeId, std::uint16_t>>> order_;
};

struct QueuedPacket {
  HelperPacket packet;
  double enqueue_time = 0.0;
  bool rerouted = false;
};

/// Priority (HELP/ALERT/ND) and best-effort FIFOs.
class RoutingQueues {
 public:
  static bool is_priority(AppType t);

  void push(QueuedPacket q);
  std::size_t backlog() const { return priority_.size() + best_effort_.size(); }
  bool empty() const { return backlog() == 0; }

  const std::deque<QueuedPacket>& priority() const { return priority_; }
  const std::deque<QueuedPacket>& best_effort() const { return best_effort_; }

  QueuedPacket* find(NodeId origin, std::uint16_t seq);
  std::optional<QueuedPacket> remove(NodeId origin, std::uint16_t seq);
  std::vector<QueuedPacket> drain();

 private:
  std::deque<QueuedPacket> priority_;
  std::deque<QueuedPacket> best_effort_;
};

/// One forwarding decision, kept for trace audits.
struct ForwardRecord {
  double time = 0.0;
  NodeId node{};
  NodeId origin{};
  std::uint16_t seq = 0;
  NodeId dest{};
  NodeId next_hop{};
  Algorithm algorithm = Algorithm::kSeek;
  std::size_t q_i = 0;
  std::uint32_t q_j = 0;
  double d_is = 0.0;
  double d_js = 0.0;
  double utility = 0.0;
};

/// Result of handing an inbound DATA packet to the network layer.
enum class Inbound { kDeliver, kDeliverAndRebroadcast, kForward, kDuplicate, kDropped };

/// Result of a MAC give-up.
enum class FailureOutcome { kRerouting, kDropped, kUnknown };

/// Per-node network layer: queues, flood suppression and next-hop selection.
class NetworkLayer {
 public:
  using Directory = std::function<std::optional<GeoPosition>(NodeId)>;

  NetworkLayer(NodeId self, GeoPosition position, Algorithm algorithm, RoutingParams params,
               Directory directory);

  Algorithm algorithm() const { return algorithm_; }
  std::size_t backlog() const { return queues_.backlog(); }
  const RoutingQueues& queues() const { return queues_; }

  /// Queues a locally originated DATA packet. Own broadcasts are marked seen.
  void originate(HelperPacket p, double now);

  /// Classifies an inbound DATA packet and queues whatever must travel on.
  Inbound receive(const HelperPacket& p, double now);

  /// Head-of-line frame with its next hop resolved, priority queue first.
  /// Unicast heads with no eligible neighbor stay queued (hold).
  std::optional<mac::OutboundFrame> next_frame(const NeighborTable& table, const Oai& local_oai,
                                               double now);

  /// True when the last next_frame() call found only unroutable unicast heads.
  bool holding() const { return holding_; }

  /// Removes the packet after a successful unicast or a finished broadcast.
  std::optional<QueuedPacket> on_sent(const HelperPacket& p);

  /// MAC gave up: halve the neighbor's goodput and re-route once; the second
  /// failure drops the packet.
  FailureOutcome on_failed(const HelperPacket& p, NeighborTable& table);

  /// Everything still queued (used when the node dies).
  std::vector<QueuedPacket> drain() { return queues_.drain(); }

  std::vector<ForwardRecord> take_forward_records();

 private:
  std::optional<mac::OutboundFrame> route_head(const QueuedPacket& q, const NeighborTable& table,
                                               const Oai& local_oai, double now);

  NodeId self_;
  GeoPosition position_;
  Algorithm algorithm_;
  RoutingParams params_;
  Directory directory_;
  RoutingQueues queues_;
  FloodCache floods_;
  FloodCache unicast_seen_;
  bool holding_ = false;
  std::vector<ForwardRecord> records_;
};

}  // namespace helper::routing
