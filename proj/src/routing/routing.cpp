#include "helper/routing/routing.hpp"

#include <algorithm>

namespace helper::routing {

std::string_view to_string(Algorithm a) { return a == Algorithm::kSeek ? "seek" : "greedy"; }

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  if (name == "seek") return Algorithm::kSeek;
  if (name == "greedy") return Algorithm::kGreedy;
  return std::nullopt;
}

double link_efficiency(const NeighborEntry& j, const TransmissionStrategy& s) {
  if (!(s.tx_power_w > 0.0)) return 0.0;
  return j.goodput_at(s.bitrate_bps) / s.tx_power_w;
}

namespace {

struct Terms {
  double backlog = 0.0;
  double progress = 0.0;
  std::uint32_t q_j = 0;
  double d_is = 0.0;
  double d_js = 0.0;
};

Terms terms(const LocalView& i, const NeighborEntry& j, NodeId dest, const GeoPosition& dest_pos) {
  Terms t;
  t.d_is = distance(i.position, dest_pos);
  const bool is_dest = j.node == dest;
  t.q_j = is_dest ? 0 : j.queue_backlog;
  t.d_js = is_dest ? 0.0 : j.dist_to(dest_pos);
  if (i.queue_backlog == 0 || !(t.d_is > 0.0)) return t;
  const double q_i = static_cast<double>(i.queue_backlog);
  t.backlog = std::max(q_i - static_cast<double>(t.q_j), 0.0) / q_i;
  t.progress = is_dest ? 1.0 : std::max((t.d_is - t.d_js) / t.d_is, 0.0);
  return t;
}

}  // namespace

double utility(const LocalView& i, const NeighborEntry& j, const TransmissionStrategy& s,
               NodeId dest, const GeoPosition& dest_pos) {
  const Terms t = terms(i, j, dest, dest_pos);
  return link_efficiency(j, s) * t.backlog * t.progress * j.energy_ratio();
}

std::optional<NextHop> seek_next_hop(const LocalView& i, NodeId dest, const GeoPosition& dest_pos,
                                     const RoutingParams& params) {
  std::optional<NextHop> best;
  double best_residual = 0.0;
  for (const auto& j : i.neighbors) {
    if (j.node == i.self || !(j.residual_j > 0.0)) continue;
    if (j.delivery_ratio() < params.goodput_floor) continue;
    for (const auto& s : params.strategies) {
      if (s.bitrate_bps > params.capacity_bps) continue;
      const double u = utility(i, j, s, dest, dest_pos);
      if (!(u > 0.0)) continue;
      bool better = !best || u > best->utility;
      if (best && u == best->utility) {
        better = j.residual_j > best_residual ||
                 (j.residual_j == best_residual && j.node < best->node);
      }
      if (better) {
        const double eta = link_efficiency(j, s);
        best = NextHop{j.node, s, u, eta > 0.0 ? std::clamp(u / eta, 0.0, 1.0) : 0.0};
        best_residual = j.residual_j;
      }
    }
  }
  return best;
}

std::optional<NodeId> greedy_next_hop(const LocalView& i, NodeId dest, const GeoPosition& dest_pos) {
  const double d_is = distance(i.position, dest_pos);
  std::optional<NodeId> best;
  double best_d = d_is;
  for (const auto& j : i.neighbors) {
    if (j.node == i.self) continue;
    const double d_js = j.node == dest ? 0.0 : j.dist_to(dest_pos);
    if (d_js < best_d || (best && d_js == best_d && j.node < *best)) {
      best = j.node;
      best_d = d_js;
    }
  }
  return best;
}

bool FloodCache::insert(NodeId origin, std::uint16_t seq, double now) {
  evict(now);
  const auto key = std::make_pair(origin, seq);
  if (seen_.contains(key)) return false;
  seen_.emplace(key, now);
  order_.emplace_back(now, key);
  return true;
}

bool FloodCache::contains(NodeId origin, std::uint16_t seq) const {
  return seen_.contains({origin, seq});
}

void FloodCache::evict(double now) {
  while (!order_.empty() && now - order_.front().first > ttl_) {
    auto it = seen_.find(order_.front().second);
    if (it != seen_.end() && it->second == order_.front().first) seen_.erase(it);
    order_.pop_front();
  }
}

bool RoutingQueues::is_priority(AppType t) {
  return t == AppType::kHelp || t == AppType::kAlert || t == AppType::kNd;
}

void RoutingQueues::push(QueuedPacket q) {
  (is_priority(q.packet.app_type) ? priority_ : best_effort_).push_back(std::move(q));
}

QueuedPacket* RoutingQueues::find(NodeId origin, std::uint16_t seq) {
  for (auto* dq : {&priority_, &best_effort_}) {
    for (auto& q : *dq) {
      if (q.packet.origin == origin && q.packet.seq == seq) return &q;
    }
  }
  return nullptr;
}

std::optional<QueuedPacket> RoutingQueues::remove(NodeId origin, std::uint16_t seq) {
  for (auto* dq : {&priority_, &best_effort_}) {
    auto it = std::find_if(dq->begin(), dq->end(), [&](const QueuedPacket& q) {
      return q.packet.origin == origin && q.packet.seq == seq;
    });
    if (it != dq->end()) {
      QueuedPacket out = std::move(*it);
      dq->erase(it);
      return out;
    }
  }
  return std::nullopt;
}

std::vector<QueuedPacket> RoutingQueues::drain() {
  std::vector<QueuedPacket> out(std::make_move_iterator(priority_.begin()),
                                std::make_move_iterator(priority_.end()));
  out.insert(out.end(), std::make_move_iterator(best_effort_.begin()),
             std::make_move_iterator(best_effort_.end()));
  priority_.clear();
  best_effort_.clear();
  return out;
}

NetworkLayer::NetworkLayer(NodeId self, GeoPosition position, Algorithm algorithm,
                           RoutingParams params, Directory directory)
    : self_(self),
      position_(position),
      algorithm_(algorithm),
      params_(std::move(params)),
      directory_(std::move(directory)) {}

void NetworkLayer::originate(HelperPacket p, double now) {
  if (p.is_broadcast()) {
    floods_.insert(p.origin, p.seq, now);
  } else {
    unicast_seen_.insert(p.origin, p.seq, now);
  }
  queues_.push(QueuedPacket{std::move(p), now, false});
}

Inbound NetworkLayer::receive(const HelperPacket& p, double now) {
  if (p.is_broadcast()) {
    if (!floods_.insert(p.origin, p.seq, now)) return Inbound::kDuplicate;
    if (p.htl == 0) return Inbound::kDeliver;
    HelperPacket copy = p;
    copy.htl = static_cast<std::uint8_t>(p.htl - 1);
    copy.src = self_;
    queues_.push(QueuedPacket{std::move(copy), now, false});
    return Inbound::kDeliverAndRebroadcast;
  }
  if (!unicast_seen_.insert(p.origin, p.seq, now)) return Inbound::kDuplicate;
  if (p.final_dst == self_) return Inbound::kDeliver;
  if (p.htl == 0) return Inbound::kDropped;
  HelperPacket copy = p;
  copy.htl = static_cast<std::uint8_t>(p.htl - 1);
  queues_.push(QueuedPacket{std::move(copy), now, false});
  return Inbound::kForward;
}

std::optional<mac::OutboundFrame> NetworkLayer::next_frame(const NeighborTable& table,
                                                           const Oai& local_oai, double now) {
  holding_ = false;
  bool held = false;
  for (const auto* dq : {&queues_.priority(), &queues_.best_effort()}) {
    if (dq->empty()) continue;
    if (auto f = route_head(dq->front(), table, local_oai, now)) return f;
    held = true;
  }
  holding_ = held;
  return std::nullopt;
}

std::optional<mac::OutboundFrame> NetworkLayer::route_head(const QueuedPacket& q,
                                                           const NeighborTable& table,
                                                           const Oai& local_oai, double now) {
  HelperPacket p = q.packet;
  p.src = self_;
  p.oai = local_oai;
  const TransmissionStrategy base =
      params_.strategies.empty() ? TransmissionStrategy{} : params_.strategies.front();
  if (p.is_broadcast()) return mac::OutboundFrame{std::move(p), base, 0.5};

  const auto dest_pos = directory_(p.final_dst);
  if (!dest_pos) return std::nullopt;

  LocalView view{self_, position_, queues_.backlog(), table.fresh(now)};
  std::erase_if(view.neighbors, [&](const NeighborEntry& e) {
    return e.delivery_ratio() < params_.goodput_floor;
  });

  ForwardRecord rec;
  rec.time = now;
  rec.node = self_;
  rec.origin = p.origin;
  rec.seq = p.seq;
  rec.dest = p.final_dst;
  rec.algorithm = algorithm_;
  rec.q_i = view.queue_backlog;
  rec.d_is = distance(position_, *dest_pos);

  mac::OutboundFrame frame{p, base, 0.5};
  if (algorithm_ == Algorithm::kSeek) {
    auto hop = seek_next_hop(view, p.final_dst, *dest_pos, params_);
    if (!hop) return std::nullopt;
    frame.packet.next_hop = hop->node;
    frame.strategy = hop->strategy;
    frame.u_norm = hop->u_norm;
    rec.utility = hop->utility;
  } else {
    auto hop = greedy_next_hop(view, p.final_dst, *dest_pos);
    if (!hop) return std::nullopt;
    frame.packet.next_hop = *hop;
    // Same MAC for both modes: the backoff follows the normalized utility of
    // the chosen link, so only the next-hop choice differs from SEEK.
    for (const auto& n : view.neighbors) {
      if (n.node != *hop) continue;
      const double eta = link_efficiency(n, base);
      const double u = utility(view, n, base, p.final_dst, *dest_pos);
      frame.u_norm = eta > 0.0 ? std::clamp(u / eta, 0.0, 1.0) : 0.0;
    }
  }
  rec.next_hop = frame.packet.next_hop;
  for (const auto& n : view.neighbors) {
    if (n.node != rec.next_hop) continue;
    rec.q_j = n.node == p.final_dst ? 0 : n.queue_backlog;
    rec.d_js = n.node == p.final_dst ? 0.0 : n.dist_to(*dest_pos);
  }
  records_.push_back(rec);
  return frame;
}

std::optional<QueuedPacket> NetworkLayer::on_sent(const HelperPacket& p) {
  return queues_.remove(p.origin, p.seq);
}

FailureOutcome NetworkLayer::on_failed(const HelperPacket& p, NeighborTable& table) {
  if (auto* row = table.find(p.next_hop)) row->goodput_bps /= 2.0;
  auto* q = queues_.find(p.origin, p.seq);
  if (!q) return FailureOutcome::kUnknown;
  if (!q->rerouted) {
    q->rerouted = true;
    return FailureOutcome::kRerouting;
  }
  queues_.remove(p.origin, p.seq);
  return FailureOutcome::kDropped;
}

std::vector<ForwardRecord> NetworkLayer::take_forward_records() {
  std::vector<ForwardRecord> out;
  out.swap(records_);
  return out;
}

}  // namespace helper::routing
