#include "helper/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace helper::sim {

using message::MessageError;

struct Simulator::Node final : mac::MacHost {
  Node(Simulator& sim, const NodeSpec& spec, bool is_erc)
      : sim(sim),
        spec(spec),
        is_erc(is_erc),
        energy{Energy::from_joules(spec.initial_energy_j), Energy::from_joules(spec.initial_energy_j)},
        table(spec.id),
        net(spec.id, spec.position, sim.sc_.routing,
            routing::RoutingParams{sim.sc_.link.strategies, sim.sc_.link.capacity_bps},
            [&sim](NodeId id) -> std::optional<GeoPosition> {
              auto it = sim.directory_.find(id);
              if (it == sim.directory_.end()) return std::nullopt;
              return it->second;
            }),
        mac(spec.id, sim.sc_.mac, make_stream(sim.sc_.rng_seed, spec.id, RngPurpose::kBackoff)),
        svc(spec.id, spec.position, is_erc),
        jitter(make_stream(sim.sc_.rng_seed, spec.id, RngPurpose::kJitter)) {}

  std::optional<mac::OutboundFrame> next_frame(double now) override {
    return net.next_frame(table, local_oai(), now);
  }
  Oai local_oai() const override { return make_oai(net.backlog(), energy, spec.position); }
  bool channel_busy(double now) const override { return sim.medium_.cad_busy(spec.id, now); }

  NodeId id() const { return spec.id; }

  Simulator& sim;
  NodeSpec spec;
  bool is_erc;
  EnergyState energy;
  bool alive = true;
  NeighborTable table;
  routing::NetworkLayer net;
  mac::MacFsm mac;
  message::ServiceLayer svc;
  message::SequenceCounter seq;
  Rng jitter;

  std::optional<radio::TxId> on_air;
  std::optional<mac::act::Transmit> on_air_frame;
};

struct Simulator::Event {
  enum class Kind { kSessionTick, kBeaconCheck, kMacTimer, kTxEnd, kInjection };
  Kind kind = Kind::kSessionTick;
  double at = 0.0;
  std::uint64_t seq = 0;
  NodeId node{};
  std::uint64_t arg = 0;
};

bool Simulator::EventOrder::operator()(const Event& a, const Event& b) const {
  if (a.at != b.at) return a.at > b.at;
  // External operations run after everything else due at the same instant,
  // which is exactly when a live operator's command lands after run_until(t).
  const bool a_ext = a.kind == Event::Kind::kInjection;
  const bool b_ext = b.kind == Event::Kind::kInjection;
  if (a_ext != b_ext) return a_ext;
  return a.seq > b.seq;
}

/// Tracks every traffic-session packet so that delivered + dropped +
/// outstanding == sent holds at every instant. A packet may exist at more
/// than one node after a lost ACK; it counts as dropped only once every copy
/// is gone without any reaching the destination.
struct Simulator::PacketLedger {
  struct Entry {
    std::size_t session = 0;
    double created = 0.0;
    int copies = 1;
    bool delivered = false;
    bool dropped = false;
    std::string reason = "lost";
  };
  std::map<std::pair<NodeId, std::uint16_t>, Entry> entries;

  Entry* find(const HelperPacket& p) {
    if (p.kind != PacketKind::kData || p.is_broadcast()) return nullptr;
    auto it = entries.find({p.origin, p.seq});
    return it == entries.end() ? nullptr : &it->second;
  }
};

namespace {

std::vector<radio::RadioMedium::Station> stations_of(const Scenario& sc) {
  std::vector<radio::RadioMedium::Station> out;
  for (const auto& n : sc.nodes) out.push_back({n.id, n.position});
  return out;
}

const Scenario& validated(const Scenario& sc) {
  validate(sc);
  return sc;
}

}  // namespace

Simulator::Simulator(Scenario sc)
    : sc_(validated(sc)),
      medium_(sc_.link, stations_of(sc_), sc_.rng_seed),
      ledger_(std::make_unique<PacketLedger>()) {
  for (const auto& spec : sc_.nodes) {
    directory_[spec.id] = spec.position;
    nodes_.push_back(std::make_unique<Node>(*this, spec, spec.id == sc_.erc));
    by_id_[spec.id] = nodes_.back().get();
  }
  log_.scenario = sc_.name;
  log_.routing = sc_.routing;
  log_.seed = sc_.rng_seed;
  for (const auto& s : sc_.sessions) {
    SessionStats st;
    st.src = s.src;
    st.dst = s.dst;
    log_.sessions.push_back(st);
  }
  session_generating_.assign(sc_.sessions.size(), true);
}

Simulator::~Simulator() = default;

Simulator::Node& Simulator::node_ref(NodeId id) {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range("unknown node " + to_string(id));
  return *it->second;
}

const Simulator::Node& Simulator::node_ref(NodeId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range("unknown node " + to_string(id));
  return *it->second;
}

void Simulator::schedule(double at, Event e) {
  e.at = at;
  e.seq = event_seq_++;
  queue_.push(e);
}

void Simulator::start() {
  if (started_) return;
  started_ = true;
  for (auto& n : nodes_) {
    log_.initial[n->id()] = n->energy.initial;
    log_.residual[n->id()] = n->energy.residual;
    log_.energy.push_back({0.0, n->id(), n->energy.residual});
  }
  // Desynchronize the first beacons; later ones keep their own phase.
  for (auto& n : nodes_) {
    const double period = sc_.mac.beacon_period;
    schedule(period + uniform(n->jitter, 0.0, period),
             Event{Event::Kind::kBeaconCheck, 0, 0, n->id(), 0});
  }
  for (std::size_t i = 0; i < sc_.sessions.size(); ++i) {
    schedule(sc_.sessions[i].start_s, Event{Event::Kind::kSessionTick, 0, 0, sc_.sessions[i].src, i});
  }
  for (std::size_t i = 0; i < sc_.injections.size(); ++i) {
    schedule(sc_.injections[i].at, Event{Event::Kind::kInjection, 0, 0, sc_.injections[i].node, i});
  }
  if (sc_.setup_flood) {
    auto& erc = node_ref(sc_.erc);
    originate(erc, erc.svc.setup_flood(erc.seq, 0.0), -1);
  }
}

MetricsLog Simulator::run() {
  start();
  run_until(sc_.duration_s);
  return finish();
}

MetricsLog Simulator::finish() {
  log_.end_time = now_;
  for (auto& n : nodes_) log_.residual[n->id()] = n->energy.residual;
  return log_;
}

void Simulator::run_until(double t) {
  start();
  const double limit = std::min(t, sc_.duration_s);
  while (!finished_ && !queue_.empty() && queue_.top().at <= limit) {
    Event e = queue_.top();
    queue_.pop();
    now_ = std::max(now_, e.at);
    dispatch(e);
    stop_if_done();
  }
  if (!finished_) {
    now_ = std::max(now_, limit);
    if (now_ >= sc_.duration_s) finished_ = true;
  }
}

void Simulator::stop_if_done() {
  if (finished_) return;
  if (sc_.stop_on_first_death && !log_.deaths.empty()) {
    finished_ = true;
    return;
  }
  if (!stop_when_idle_ || sc_.sessions.empty() || injections_fired_ < sc_.injections.size()) return;
  for (std::size_t i = 0; i < sc_.sessions.size(); ++i) {
    if (session_generating_[i] || log_.sessions[i].outstanding() > 0) return;
  }
  finished_ = true;
}

void Simulator::dispatch(const Event& e) {
  switch (e.kind) {
    case Event::Kind::kSessionTick:
      on_session_tick(e.arg);
      return;
    case Event::Kind::kBeaconCheck:
      on_beacon_check(node_ref(e.node));
      return;
    case Event::Kind::kMacTimer:
      on_mac_timer(node_ref(e.node), e.arg);
      return;
    case Event::Kind::kTxEnd:
      on_tx_end(node_ref(e.node), e.arg);
      return;
    case Event::Kind::kInjection:
      apply(sc_.injections[e.arg], static_cast<int>(e.arg));
      ++injections_fired_;
      return;
  }
}

void Simulator::on_session_tick(std::size_t i) {
  const Session& s = sc_.sessions[i];
  auto& stats = log_.sessions[i];
  Node& src = node_ref(s.src);
  const bool expired = s.duration_s && now_ >= s.start_s + *s.duration_s;
  if (!src.alive || expired || (s.count && stats.sent >= *s.count)) {
    session_generating_[i] = false;
    return;
  }
  HelperPacket p;
  p.kind = PacketKind::kData;
  p.app_type = AppType::kGeneric;
  p.src = s.src;
  p.origin = s.src;
  p.final_dst = s.dst;
  p.next_hop = s.dst;
  p.htl = kHtlMax;
  p.seq = src.seq.next();
  p.origin_ms = static_cast<std::uint32_t>(std::llround(now_ * 1000.0));
  p.payload.resize(s.payload_bytes);
  for (std::size_t b = 0; b < p.payload.size(); ++b) {
    p.payload[b] = static_cast<std::uint8_t>((p.seq + b) & 0xFF);
  }
  ledger_->entries[{p.origin, p.seq}] = PacketLedger::Entry{i, now_};
  ++stats.sent;
  if (s.count && stats.sent >= *s.count) session_generating_[i] = false;
  originate(src, std::move(p), -1);
  if (session_generating_[i]) {
    schedule(s.start_s + static_cast<double>(stats.sent) * s.interval_s,
             Event{Event::Kind::kSessionTick, 0, 0, s.src, i});
  }
}

void Simulator::on_beacon_check(Node& n) {
  if (!n.alive) return;
  n.mac.maybe_beacon(now_, n.local_oai());
  // Also retries heads that were held for lack of an eligible neighbor.
  step_mac(n, mac::ev::Kick{});
  double next = n.mac.next_beacon_check();
  if (next <= now_) next = now_ + sc_.mac.beacon_period;
  schedule(next, Event{Event::Kind::kBeaconCheck, 0, 0, n.id(), 0});
}

void Simulator::on_mac_timer(Node& n, std::uint64_t token) {
  if (!n.alive) return;
  step_mac(n, mac::ev::Timer{token});
}

void Simulator::step_mac(Node& n, const mac::MacEvent& e) {
  if (!n.alive) return;
  handle_actions(n, n.mac.step(n, now_, e));
}

void Simulator::handle_actions(Node& n, std::vector<mac::MacAction> actions) {
  for (auto& a : actions) {
    if (!n.alive) return;
    if (auto* t = std::get_if<mac::act::Transmit>(&a)) {
      transmit(n, *t);
    } else if (auto* st = std::get_if<mac::act::SetTimer>(&a)) {
      schedule(st->at, Event{Event::Kind::kMacTimer, 0, 0, n.id(), st->token});
    } else if (auto* up = std::get_if<mac::act::DeliverUp>(&a)) {
      deliver_up(n, up->packet);
    } else if (auto* sent = std::get_if<mac::act::FrameSent>(&a)) {
      n.net.on_sent(sent->packet);
      if (!sent->packet.is_broadcast()) release_copy(sent->packet, n.id());
    } else if (auto* failed = std::get_if<mac::act::FrameFailed>(&a)) {
      if (n.net.on_failed(failed->packet, n.table) == routing::FailureOutcome::kDropped) {
        drop(n, failed->packet, "link-failure");
      }
    }
  }
}

void Simulator::transmit(Node& n, const mac::act::Transmit& t) {
  auto records = n.net.take_forward_records();
  if (t.packet.kind == PacketKind::kRts && !records.empty()) {
    auto rec = records.back();
    rec.time = now_;
    log_.forwards.push_back(rec);
  }
  const radio::TxCharge charge = radio::charge_for(t.packet, t.strategy, n.energy.residual);
  n.energy.residual -= charge.cost;
  log_.tx.push_back(TxRecord{now_, n.id(), t.packet.kind, t.packet.app_type, t.packet.origin,
                             t.packet.seq, t.packet.next_hop, t.packet.htl, charge.airtime,
                             charge.cost, charge.truncated});
  record_energy(n);
  const radio::TxId id =
      medium_.begin(n.id(), t.packet, t.strategy, now_, charge.airtime, charge.truncated);
  n.on_air = id;
  n.on_air_frame = t;
  schedule(now_ + charge.airtime, Event{Event::Kind::kTxEnd, 0, 0, n.id(), id});
}

void Simulator::on_tx_end(Node& n, radio::TxId id) {
  auto receptions = medium_.finish(id);
  const bool sender_alive = n.alive;
  const auto frame = std::move(n.on_air_frame);
  n.on_air.reset();
  n.on_air_frame.reset();
  if (!sender_alive || !frame) return;  // cut off by a drain

  if (n.energy.depleted()) {
    kill(n, "energy");
  } else {
    step_mac(n, mac::ev::TxDone{});
  }

  const HelperPacket& p = frame->packet;
  for (const auto& r : receptions) {
    Node& m = node_ref(r.node);
    if (!m.alive || !r.decodable()) continue;
    if (p.kind == PacketKind::kRts || p.kind == PacketKind::kCts || p.kind == PacketKind::kBeacon) {
      mac::harvest_oai(m.table, p, r.probe_intact_bits, frame->strategy.bitrate_bps, now_,
                       sc_.mac.goodput_alpha);
    }
    if (p.kind == PacketKind::kData && !r.payload_ok) continue;
    step_mac(m, mac::ev::Received{p, frame->strategy});
    step_mac(m, mac::ev::Kick{});
  }
}

void Simulator::deliver_up(Node& n, const HelperPacket& p) {
  if (p.kind != PacketKind::kData) return;
  const routing::Inbound in = n.net.receive(p, now_);
  switch (in) {
    case routing::Inbound::kDuplicate:
      return;
    case routing::Inbound::kDropped:
      // The sender still releases its copy when the ACK arrives.
      if (auto* e = ledger_->find(p)) {
        e->reason = "htl-expired";
      } else {
        log_.drops.push_back({now_, n.id(), p.origin, p.seq, "htl-expired"});
      }
      return;
    case routing::Inbound::kForward:
      if (auto* e = ledger_->find(p)) ++e->copies;
      step_mac(n, mac::ev::Kick{});
      return;
    case routing::Inbound::kDeliver:
    case routing::Inbound::kDeliverAndRebroadcast:
      break;
  }

  DeliveryRecord rec{now_, n.id(), p.origin, p.seq, p.app_type, !p.is_broadcast()};
  if (auto* e = ledger_->find(p); e && p.final_dst == n.id()) {
    rec.session = static_cast<int>(e->session);
    rec.latency = now_ - e->created;
    if (!e->delivered && !e->dropped) {
      e->delivered = true;
      auto& stats = log_.sessions[e->session];
      ++stats.delivered;
      stats.delivered_bits += p.payload.size() * 8;
      stats.latencies.push_back(rec.latency);
      stats.delivery_times.push_back(now_);
    }
  }
  log_.deliveries.push_back(rec);

  if (rec.session < 0) {
    auto replies = n.svc.on_deliver(p, n.spec.position, n.energy.residual.joules(), n.seq, now_);
    take_service_events(n);
    for (auto& r : replies) originate(n, std::move(r), -1);
  }
  step_mac(n, mac::ev::Kick{});
}

void Simulator::originate(Node& n, HelperPacket p, int injection) {
  log_.originated.push_back(
      OriginateRecord{now_, n.id(), p.app_type, p.seq, p.final_dst, p.htl, injection});
  n.net.originate(std::move(p), now_);
  step_mac(n, mac::ev::Kick{});
}

void Simulator::take_service_events(Node& n) {
  for (auto& e : n.svc.take_events()) log_.service.push_back(std::move(e));
}

void Simulator::release_copy(const HelperPacket& p, NodeId at) {
  auto* e = ledger_->find(p);
  if (!e) return;
  if (--e->copies > 0 || e->delivered || e->dropped) return;
  e->dropped = true;
  ++log_.sessions[e->session].dropped;
  log_.drops.push_back({now_, at, p.origin, p.seq, e->reason});
}

void Simulator::drop(Node& n, const HelperPacket& p, const std::string& reason) {
  if (auto* e = ledger_->find(p)) {
    e->reason = reason;
    release_copy(p, n.id());
  } else {
    log_.drops.push_back({now_, n.id(), p.origin, p.seq, reason});
  }
}

void Simulator::record_energy(Node& n) {
  log_.energy.push_back({now_, n.id(), n.energy.residual});
  log_.residual[n.id()] = n.energy.residual;
}

void Simulator::kill(Node& n, const std::string& cause) {
  if (!n.alive) return;
  n.alive = false;
  n.mac.kill();
  medium_.kill(n.id());
  log_.deaths.push_back({now_, n.id(), cause});
  for (auto& q : n.net.drain()) drop(n, q.packet, "node-death");
}

OpResult Simulator::apply(const Injection& op, int index) {
  start();
  OpResult res;
  auto fail = [&](std::string msg) {
    res.ok = false;
    res.error = std::move(msg);
    log_.errors.push_back({now_, index, res.error});
    return res;
  };
  auto it = by_id_.find(op.node);
  if (it == by_id_.end()) return fail("unknown node " + to_string(op.node));
  Node& n = *it->second;
  if (!n.alive) return fail("node " + sc_.label_of(n.id()) + " is dead");

  const std::size_t before = log_.originated.size();
  std::vector<HelperPacket> pkts;
  try {
    switch (op.op) {
      case Injection::Op::kSend:
        pkts = n.svc.dispatch(op.message, n.seq, now_);
        break;
      case Injection::Op::kNd: {
        message::AppMessage m;
        m.type = AppType::kNd;
        pkts = n.svc.erc_dispatch(m, n.seq, now_);
        break;
      }
      case Injection::Op::kAlert: {
        message::AppMessage m = op.message;
        m.type = AppType::kAlert;
        pkts = n.svc.erc_dispatch(m, n.seq, now_);
        break;
      }
      case Injection::Op::kApprove:
        pkts = n.svc.approve_resource(op.pending_id, op.verdict, n.seq, now_);
        break;
      case Injection::Op::kDrain:
        log_.drained[n.id()] += n.energy.residual;
        n.energy.residual = Energy{};
        record_energy(n);
        kill(n, "drain");
        break;
    }
  } catch (const MessageError& e) {
    take_service_events(n);
    return fail(e.what());
  }
  take_service_events(n);
  for (auto& p : pkts) originate(n, std::move(p), index);
  res.originated.assign(log_.originated.begin() + static_cast<std::ptrdiff_t>(before),
                        log_.originated.end());
  return res;
}

std::vector<NodeStatus> Simulator::nodes() const {
  std::vector<NodeStatus> out;
  for (const auto& n : nodes_) out.push_back(*node(n->id()));
  return out;
}

std::optional<NodeStatus> Simulator::node(NodeId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  const Node& n = *it->second;
  NodeStatus s;
  s.id = n.id();
  s.label = n.spec.label;
  s.position = n.spec.position;
  s.alive = n.alive;
  s.is_erc = n.is_erc;
  s.initial_j = n.energy.initial.joules();
  s.residual_j = n.energy.residual.joules();
  s.queue_backlog = n.net.backlog();
  s.mac_state = n.mac.state();
  s.neighbors = n.table.fresh(now_);
  return s;
}

const message::ServiceLayer& Simulator::service(NodeId id) const { return node_ref(id).svc; }

double calibrate_link_throughput(const Scenario& like, double separation_m, double duration_s,
                                 std::uint64_t seed) {
  Scenario cal;
  cal.name = "calibration";
  cal.link = like.link;
  cal.mac = like.mac;
  cal.routing = like.routing;
  cal.rng_seed = seed;
  cal.duration_s = duration_s;
  cal.setup_flood = false;
  NodeSpec a{node_id(0), "S", {0.0, 0.0}, 1e6};
  NodeSpec b{node_id(1), "R", {separation_m, 0.0}, 1e6};
  cal.nodes = {a, b};
  cal.erc = b.id;
  Session s;
  s.src = a.id;
  s.dst = b.id;
  if (!like.sessions.empty()) {
    s.payload_bytes = like.sessions.front().payload_bytes;
    s.interval_s = like.sessions.front().interval_s;
  }
  // The link must be saturated: offer at least twice the fastest bitrate.
  double fastest = 0.0;
  for (const auto& st : like.link.strategies) fastest = std::max(fastest, st.bitrate_bps);
  if (fastest > 0.0) {
    s.interval_s = std::min(s.interval_s, static_cast<double>(s.payload_bytes) * 8.0 / (2.0 * fastest));
  }
  cal.sessions = {s};
  Simulator sim(cal);
  return network_throughput(sim.run());
}

}  // namespace helper::sim
