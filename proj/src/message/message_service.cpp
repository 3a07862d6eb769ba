#include "helper/message/message_service.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

namespace helper::message {

namespace {

constexpr std::array<std::string_view, 6> kResourceNames = {
    "WATER", "FOOD", "GAS", "MEDICINE", "INTERNET", "ELECTRICITY"};

constexpr std::uint8_t kHasLocation = 1;
constexpr std::uint8_t kHasResource = 2;
constexpr std::uint8_t kHasEnergy = 4;

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
}

float get_f32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string_view to_string(ResourceKind k) {
  auto i = static_cast<std::size_t>(k);
  return i < kResourceNames.size() ? kResourceNames[i] : "?";
}

std::optional<ResourceKind> parse_resource_kind(std::string_view name) {
  for (std::size_t i = 0; i < kResourceNames.size(); ++i) {
    if (kResourceNames[i] == name) return static_cast<ResourceKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(ServiceEvent::Kind k) {
  using K = ServiceEvent::Kind;
  switch (k) {
    case K::kReceived: return "received";
    case K::kLocal: return "local";
    case K::kDistress: return "distress";
    case K::kDiscovered: return "discovered";
    case K::kPendingResource: return "pending_resource";
    case K::kResourceApproved: return "resource_approved";
    case K::kResourceRejected: return "resource_rejected";
    case K::kResourceMapUpdated: return "resource_map_updated";
  }
  return "?";
}

void validate(const AppMessage& m) {
  if (m.text.size() > kMaxTextBytes) {
    throw MessageError("message text exceeds " + std::to_string(kMaxTextBytes) + " bytes");
  }
  if (m.origin_user.size() > 0xFF) throw MessageError("user name exceeds 255 bytes");
  if ((m.type == AppType::kResource || m.type == AppType::kResourceUpdate) &&
      (!m.resource || !m.location)) {
    throw MessageError("resource messages need a resource kind and a location");
  }
}

std::vector<std::uint8_t> encode(const AppMessage& m) {
  validate(m);
  std::vector<std::uint8_t> out;
  std::uint8_t flags = 0;
  if (m.location) flags |= kHasLocation;
  if (m.resource) flags |= kHasResource;
  if (m.energy_j) flags |= kHasEnergy;
  out.push_back(flags);
  if (m.resource) out.push_back(static_cast<std::uint8_t>(*m.resource));
  if (m.location) {
    put_f32(out, m.location->x);
    put_f32(out, m.location->y);
  }
  if (m.energy_j) put_f32(out, *m.energy_j);
  out.push_back(static_cast<std::uint8_t>(m.origin_user.size()));
  out.insert(out.end(), m.origin_user.begin(), m.origin_user.end());
  out.insert(out.end(), m.text.begin(), m.text.end());
  return out;
}

std::optional<AppMessage> decode(AppType type, std::span<const std::uint8_t> in) {
  AppMessage m;
  m.type = type;
  std::size_t at = 0;
  auto need = [&](std::size_t n) { return in.size() - at >= n; };
  if (!need(1)) return std::nullopt;
  const std::uint8_t flags = in[at++];
  if (flags & ~(kHasLocation | kHasResource | kHasEnergy)) return std::nullopt;
  if (flags & kHasResource) {
    if (!need(1) || in[at] >= kResourceNames.size()) return std::nullopt;
    m.resource = static_cast<ResourceKind>(in[at++]);
  }
  if (flags & kHasLocation) {
    if (!need(8)) return std::nullopt;
    m.location = GeoPosition{get_f32(in, at), get_f32(in, at + 4)};
    at += 8;
  }
  if (flags & kHasEnergy) {
    if (!need(4)) return std::nullopt;
    m.energy_j = get_f32(in, at);
    at += 4;
  }
  if (!need(1)) return std::nullopt;
  const std::size_t user_len = in[at++];
  if (!need(user_len)) return std::nullopt;
  m.origin_user.assign(in.begin() + at, in.begin() + at + user_len);
  at += user_len;
  m.text.assign(in.begin() + at, in.end());
  return m;
}

const std::vector<std::uint8_t>& setup_payload() {
  static const std::vector<std::uint8_t> p = {'S', 'E', 'T', 'U', 'P'};
  return p;
}

bool is_setup(const HelperPacket& p) {
  return p.kind == PacketKind::kData && p.app_type == AppType::kGeneric && p.is_broadcast() &&
         p.payload == setup_payload();
}

ResourceMap::Key ResourceMap::key_for(ResourceKind kind, const GeoPosition& pos) {
  return {kind, static_cast<std::int64_t>(std::floor(pos.x / 10.0)),
          static_cast<std::int64_t>(std::floor(pos.y / 10.0))};
}

void ResourceMap::apply(const ResourceEntry& e) {
  auto key = key_for(e.kind, e.position);
  auto it = entries_.find(key);
  if (it == entries_.end() || it->second.updated <= e.updated) entries_[key] = e;
}

ServiceLayer::ServiceLayer(NodeId self, GeoPosition position, bool is_erc)
    : self_(self), position_(position), is_erc_(is_erc) {
  if (is_erc_) erc_ = self_;
}

HelperPacket ServiceLayer::make_packet(AppType type, NodeId dst, std::uint8_t htl,
                                       const AppMessage& m, SequenceCounter& seq,
                                       double now) const {
  AppMessage body = m;
  body.type = type;
  HelperPacket p;
  p.kind = PacketKind::kData;
  p.app_type = type;
  p.src = self_;
  p.origin = self_;
  p.final_dst = dst;
  p.next_hop = dst;
  p.htl = htl;
  p.seq = seq.next();
  p.origin_ms = static_cast<std::uint32_t>(std::llround(now * 1000.0));
  p.payload = encode(body);
  return p;
}

void ServiceLayer::emit(ServiceEvent::Kind kind, double now, NodeId origin, std::uint16_t seq,
                        const AppMessage& m, std::uint32_t pending_id) {
  events_.push_back(ServiceEvent{kind, now, self_, origin, seq, m, pending_id});
}

std::vector<HelperPacket> ServiceLayer::to_erc(const AppMessage& m, SequenceCounter& seq,
                                               double now) {
  std::vector<HelperPacket> out;
  if (m.type == AppType::kHelp) {
    if (is_erc_) {
      emit(ServiceEvent::Kind::kDistress, now, self_, 0, m);
    } else {
      out.push_back(make_packet(AppType::kHelp, *erc_, kHtlMax, m, seq, now));
    }
    out.push_back(make_packet(AppType::kHelp, kBroadcast, kHelpVicinityHtl, m, seq, now));
  } else if (is_erc_) {
    pending_.push_back(PendingResource{next_pending_++, self_, m, now});
    emit(ServiceEvent::Kind::kPendingResource, now, self_, 0, m, pending_.back().id);
  } else {
    out.push_back(make_packet(m.type, *erc_, kHtlMax, m, seq, now));
  }
  return out;
}

std::vector<HelperPacket> ServiceLayer::dispatch(const AppMessage& in, SequenceCounter& seq,
                                                 double now) {
  AppMessage m = in;
  if (m.type == AppType::kHelp && !m.location) m.location = position_;
  validate(m);
  switch (m.type) {
    case AppType::kLocal:
      emit(ServiceEvent::Kind::kLocal, now, self_, 0, m);
      return {};
    case AppType::kNeighborhood:
      return {make_packet(AppType::kNeighborhood, kBroadcast, kNeighborhoodHtl, m, seq, now)};
    case AppType::kHelp:
    case AppType::kResource:
      if (!erc_) {
        awaiting_erc_.push_back(m);
        return {};
      }
      return to_erc(m, seq, now);
    default:
      throw MessageError(std::string(to_string(m.type)) + " cannot be sent by a user");
  }
}

std::vector<HelperPacket> ServiceLayer::erc_dispatch(const AppMessage& in, SequenceCounter& seq,
                                                     double now) {
  if (!is_erc_) throw MessageError("only the ERC may issue " + std::string(to_string(in.type)));
  if (in.type != AppType::kNd && in.type != AppType::kAlert &&
      in.type != AppType::kResourceUpdate) {
    throw MessageError(std::string(to_string(in.type)) + " is not an ERC flood");
  }
  validate(in);
  if (in.type == AppType::kResourceUpdate) {
    resources_.apply(ResourceEntry{*in.resource, *in.location, in.text, now});
    emit(ServiceEvent::Kind::kResourceMapUpdated, now, self_, 0, in);
  }
  return {make_packet(in.type, kBroadcast, kHtlMax, in, seq, now)};
}

HelperPacket ServiceLayer::setup_flood(SequenceCounter& seq, double now) {
  if (!is_erc_) throw MessageError("only the ERC announces itself");
  HelperPacket p = make_packet(AppType::kGeneric, kBroadcast, kHtlMax, AppMessage{}, seq, now);
  p.payload = setup_payload();
  return p;
}

HelperPacket ServiceLayer::on_nd(const GeoPosition& position, double residual_j,
                                 SequenceCounter& seq, double now) {
  AppMessage m;
  m.type = AppType::kHelperUpdate;
  m.location = position;
  m.energy_j = residual_j;
  const NodeId erc = erc_.value_or(self_);
  return make_packet(AppType::kHelperUpdate, erc, kHtlMax, m, seq, now);
}

std::vector<HelperPacket> ServiceLayer::approve_resource(std::uint32_t pending_id,
                                                         Verdict verdict, SequenceCounter& seq,
                                                         double now) {
  if (!is_erc_) throw MessageError("only the ERC reviews resources");
  auto it = std::find_if(pending_.begin(), pending_.end(),
                         [&](const PendingResource& r) { return r.id == pending_id; });
  if (it == pending_.end()) {
    throw MessageError("no pending resource with id " + std::to_string(pending_id));
  }
  PendingResource item = *it;
  pending_.erase(it);
  if (verdict == Verdict::kReject) {
    emit(ServiceEvent::Kind::kResourceRejected, now, item.from, 0, item.message, item.id);
    return {};
  }
  emit(ServiceEvent::Kind::kResourceApproved, now, item.from, 0, item.message, item.id);
  AppMessage update = item.message;
  update.type = AppType::kResourceUpdate;
  return erc_dispatch(update, seq, now);
}

std::vector<HelperPacket> ServiceLayer::flush_awaiting(SequenceCounter& seq, double now) {
  std::vector<HelperPacket> out;
  auto waiting = std::move(awaiting_erc_);
  awaiting_erc_.clear();
  for (const auto& m : waiting) {
    auto pkts = to_erc(m, seq, now);
    out.insert(out.end(), std::make_move_iterator(pkts.begin()), std::make_move_iterator(pkts.end()));
  }
  return out;
}

std::vector<HelperPacket> ServiceLayer::on_deliver(const HelperPacket& p,
                                                   const GeoPosition& position, double residual_j,
                                                   SequenceCounter& seq, double now) {
  std::vector<HelperPacket> out;
  if (p.kind != PacketKind::kData) return out;

  auto learn_erc = [&](NodeId erc) {
    if (erc_ || is_erc_) return;
    erc_ = erc;
    out = flush_awaiting(seq, now);
  };

  if (is_setup(p)) {
    learn_erc(p.origin);
    return out;
  }
  if (p.app_type == AppType::kGeneric) return out;

  auto decoded = decode(p.app_type, p.payload);
  if (!decoded) return out;
  const AppMessage& m = *decoded;

  switch (p.app_type) {
    case AppType::kNd:
      learn_erc(p.origin);
      emit(ServiceEvent::Kind::kReceived, now, p.origin, p.seq, m);
      if (!is_erc_) out.push_back(on_nd(position, residual_j, seq, now));
      break;
    case AppType::kResourceUpdate:
      if (m.resource && m.location) {
        resources_.apply(ResourceEntry{*m.resource, *m.location, m.text, now});
        emit(ServiceEvent::Kind::kResourceMapUpdated, now, p.origin, p.seq, m);
      }
      emit(ServiceEvent::Kind::kReceived, now, p.origin, p.seq, m);
      break;
    case AppType::kHelp:
      if (is_erc_ && p.final_dst == self_) {
        emit(ServiceEvent::Kind::kDistress, now, p.origin, p.seq, m);
      } else {
        emit(ServiceEvent::Kind::kReceived, now, p.origin, p.seq, m);
      }
      break;
    case AppType::kResource:
      if (is_erc_) {
        pending_.push_back(PendingResource{next_pending_++, p.origin, m, now});
        emit(ServiceEvent::Kind::kPendingResource, now, p.origin, p.seq, m, pending_.back().id);
      }
      break;
    case AppType::kHelperUpdate:
      if (is_erc_) {
        discovered_[p.origin] = DiscoveredNode{p.origin, m.location.value_or(GeoPosition{}),
                                               m.energy_j.value_or(0.0), now};
        emit(ServiceEvent::Kind::kDiscovered, now, p.origin, p.seq, m);
      }
      break;
    default:
      emit(ServiceEvent::Kind::kReceived, now, p.origin, p.seq, m);
      break;
  }
  return out;
}

std::vector<ServiceEvent> ServiceLayer::take_events() {
  std::vector<ServiceEvent> out;
  out.swap(events_);
  return out;
}

}  // namespace helper::message
