#include "helper/radio/radio_medium.hpp"

#include <algorithm>
#include <stdexcept>

namespace helper::radio {

double LinkParams::ber_for(const TransmissionStrategy& s) const {
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    if (strategies[i] == s) return i < ber.size() ? ber[i] : 0.0;
  }
  return ber.empty() ? 0.0 : ber.front();
}

double LinkParams::cad_latency() const {
  const double bitrate = strategies.empty() ? TransmissionStrategy{}.bitrate_bps
                                            : strategies.front().bitrate_bps;
  return 2.0 * 8.0 / bitrate;
}

Energy tx_cost(const HelperPacket& p, const TransmissionStrategy& s) {
  return Energy::from_joules(s.tx_power_w * packet_airtime(p, s));
}

TxCharge charge_for(const HelperPacket& p, const TransmissionStrategy& s, Energy residual) {
  TxCharge c;
  c.cost = tx_cost(p, s);
  c.airtime = packet_airtime(p, s);
  if (residual <= c.cost) {
    c.truncated = true;
    c.cost = std::max(residual, Energy{});
    c.airtime = s.tx_power_w > 0.0 ? c.cost.joules() / s.tx_power_w : 0.0;
  }
  return c;
}

RadioMedium::RadioMedium(LinkParams params, std::vector<Station> stations, std::uint64_t seed)
    : params_(std::move(params)) {
  if (!(params_.range_m > 0.0)) throw std::invalid_argument("radio range must be positive");
  for (const auto& s : stations) {
    if (radios_.contains(s.id)) throw std::invalid_argument("duplicate node id " + to_string(s.id));
    radios_.emplace(s.id, RadioState{s, {}, true, std::nullopt, {},
                                     make_stream(seed, s.id, RngPurpose::kChannel)});
  }
  for (auto& [id, r] : radios_) {
    for (const auto& [other, o] : radios_) {
      if (other != id && distance(r.station.position, o.station.position) <= params_.range_m) {
        r.neighbors.push_back(other);
      }
    }
  }
}

RadioMedium::RadioState& RadioMedium::state(NodeId id) {
  auto it = radios_.find(id);
  if (it == radios_.end()) throw std::out_of_range("unknown node " + to_string(id));
  return it->second;
}

const RadioMedium::RadioState& RadioMedium::state(NodeId id) const {
  auto it = radios_.find(id);
  if (it == radios_.end()) throw std::out_of_range("unknown node " + to_string(id));
  return it->second;
}

bool RadioMedium::in_range(NodeId a, NodeId b) const {
  if (a == b) return false;
  const auto& n = state(a).neighbors;
  return std::binary_search(n.begin(), n.end(), b);
}

const std::vector<NodeId>& RadioMedium::neighbors(NodeId id) const { return state(id).neighbors; }

void RadioMedium::mark_collided(RadioState& listener) {
  for (TxId t : listener.hearing) {
    auto& tx = active_.at(t);
    for (auto& rx : tx.receptions) {
      if (rx.node == listener.station.id) rx.collided = true;
    }
  }
}

TxId RadioMedium::begin(NodeId tx, const HelperPacket& p, const TransmissionStrategy& s,
                        double start, double airtime, bool truncated) {
  auto& sender = state(tx);
  if (!sender.alive) throw std::logic_error("dead node " + to_string(tx) + " cannot transmit");
  if (sender.on_air) throw std::logic_error("node " + to_string(tx) + " is already transmitting");

  const TxId id = next_id_++;
  Tx t{tx, p, s, start, start + airtime, truncated, {}};

  // Half-duplex: whatever the sender was receiving is lost.
  mark_collided(sender);

  for (NodeId n : sender.neighbors) {
    auto& listener = state(n);
    if (!listener.alive) continue;
    Rx rx{n, listener.on_air.has_value()};
    if (!listener.hearing.empty()) {
      mark_collided(listener);
      rx.collided = true;
    }
    t.receptions.push_back(rx);
  }
  active_.emplace(id, std::move(t));
  for (const auto& rx : active_.at(id).receptions) state(rx.node).hearing.push_back(id);
  sender.on_air = id;
  return id;
}

Reception RadioMedium::outcome(const Tx& tx, const Rx& rx, RadioState& listener) {
  Reception r;
  r.node = rx.node;
  r.collided = rx.collided || tx.truncated;
  if (r.collided) {
    r.header_ok = false;
    r.payload_ok = false;
    r.probe_intact_bits = 0;
    return r;
  }
  const double ber = params_.ber_for(tx.strategy);
  if (ber <= 0.0) return r;

  auto& rng = listener.channel_rng;
  auto bits_ok = [&](std::size_t bits) {
    std::size_t intact = 0;
    for (std::size_t b = 0; b < bits; ++b) intact += uniform(rng, 0.0, 1.0) >= ber;
    return intact;
  };
  const std::size_t header_bits = (kHeaderFieldBytes + kOaiBytes + 2) * 8;
  r.header_ok = bits_ok(header_bits) == header_bits;
  r.probe_intact_bits = bits_ok(kProbeBits);
  const std::size_t payload_bits = tx.packet.payload.size() * 8;
  r.payload_ok = bits_ok(payload_bits) == payload_bits;
  return r;
}

std::vector<Reception> RadioMedium::finish(TxId id) {
  auto it = active_.find(id);
  if (it == active_.end()) throw std::logic_error("unknown transmission");
  Tx tx = std::move(it->second);
  active_.erase(it);

  auto& sender = state(tx.tx);
  if (sender.on_air == id) sender.on_air.reset();

  std::vector<Reception> out;
  out.reserve(tx.receptions.size());
  for (const auto& rx : tx.receptions) {
    auto& listener = state(rx.node);
    std::erase(listener.hearing, id);
    if (!listener.alive) continue;
    out.push_back(outcome(tx, rx, listener));
  }
  return out;
}

bool RadioMedium::cad_busy(NodeId listener, double t) const {
  for (NodeId n : state(listener).neighbors) {
    const auto& r = state(n);
    if (!r.on_air) continue;
    const auto& tx = active_.at(*r.on_air);
    if (tx.start <= t && t < tx.end) return true;
  }
  return false;
}

bool RadioMedium::transmitting(NodeId id) const { return state(id).on_air.has_value(); }

void RadioMedium::kill(NodeId id) {
  auto& r = state(id);
  r.alive = false;
  mark_collided(r);
}

bool RadioMedium::alive(NodeId id) const { return state(id).alive; }

}  // namespace helper::radio
