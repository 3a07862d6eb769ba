#include "helper/core/packet.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace helper {

std::string to_string(NodeId id) { return std::to_string(to_int(id)); }

double distance(const GeoPosition& a, const GeoPosition& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::string_view to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::kRts: return "RTS";
    case PacketKind::kCts: return "CTS";
    case PacketKind::kAck: return "ACK";
    case PacketKind::kBeacon: return "BEACON";
    case PacketKind::kData: return "DATA";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 9> kAppNames = {
    "LOCAL", "NEIGHBORHOOD", "HELP", "RESOURCE", "ND",
    "ALERT", "RESOURCE_UPDATE", "HELPER_UPDATE", "GENERIC"};

}  // namespace

std::string_view to_string(AppType type) {
  auto i = static_cast<std::size_t>(type);
  return i < kAppNames.size() ? kAppNames[i] : "?";
}

std::optional<AppType> parse_app_type(std::string_view name) {
  for (std::size_t i = 0; i < kAppNames.size(); ++i) {
    if (kAppNames[i] == name) return static_cast<AppType>(i);
  }
  return std::nullopt;
}

bool is_control(PacketKind kind) { return kind != PacketKind::kData; }

Oai make_oai(std::size_t queue_backlog, const EnergyState& energy, const GeoPosition& pos) {
  Oai o;
  o.queue_backlog = static_cast<std::uint32_t>(queue_backlog);
  o.residual_j = static_cast<float>(energy.residual.joules());
  o.initial_j = static_cast<float>(energy.initial.joules());
  o.x = static_cast<float>(pos.x);
  o.y = static_cast<float>(pos.y);
  return o;
}

const Probe& known_probe() {
  static const Probe probe = {0xA5, 0x5A, 0xC3, 0x3C, 0x96, 0x69, 0xF0, 0x0F,
                              0xA5, 0x5A, 0xC3, 0x3C, 0x96, 0x69, 0xF0, 0x0F};
  return probe;
}

std::size_t serialized_size(const HelperPacket& p) { return kFixedPacketBytes + p.payload.size(); }

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  bool ok() const { return ok_; }
  bool at_end() const { return pos_ == in_.size(); }

  std::uint8_t u8() {
    if (!need(1)) return 0;
    return in_[pos_++];
  }
  std::uint16_t u16() {
    if (!need(2)) return 0;
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    if (!need(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    if (!need(n)) return {};
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  bool need(std::size_t n) {
    if (!ok_ || in_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    return true;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace

std::vector<std::uint8_t> serialize(const HelperPacket& p) {
  if (p.payload.size() > 0xFFFF) throw std::invalid_argument("payload exceeds 65535 bytes");
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(p));
  Writer w(out);
  w.u8(static_cast<std::uint8_t>(p.kind));
  w.u8(static_cast<std::uint8_t>(p.app_type));
  w.u16(to_int(p.src));
  w.u16(to_int(p.origin));
  w.u16(to_int(p.final_dst));
  w.u16(to_int(p.next_hop));
  w.u8(p.htl);
  w.u16(p.seq);
  w.u32(p.oai.queue_backlog);
  w.f32(p.oai.residual_j);
  w.f32(p.oai.initial_j);
  w.u32(p.origin_ms);
  w.f32(p.oai.x);
  w.f32(p.oai.y);
  out.insert(out.end(), p.probe.begin(), p.probe.end());
  w.u16(static_cast<std::uint16_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

std::optional<HelperPacket> deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  HelperPacket p;
  auto kind = r.u8();
  auto app = r.u8();
  if (kind > static_cast<std::uint8_t>(PacketKind::kData) ||
      app > static_cast<std::uint8_t>(AppType::kGeneric)) {
    return std::nullopt;
  }
  p.kind = static_cast<PacketKind>(kind);
  p.app_type = static_cast<AppType>(app);
  p.src = NodeId{r.u16()};
  p.origin = NodeId{r.u16()};
  p.final_dst = NodeId{r.u16()};
  p.next_hop = NodeId{r.u16()};
  p.htl = r.u8();
  p.seq = r.u16();
  p.oai.queue_backlog = r.u32();
  p.oai.residual_j = r.f32();
  p.oai.initial_j = r.f32();
  p.origin_ms = r.u32();
  p.oai.x = r.f32();
  p.oai.y = r.f32();
  auto probe = r.bytes(kProbeBytes);
  if (r.ok()) std::memcpy(p.probe.data(), probe.data(), kProbeBytes);
  auto len = r.u16();
  auto payload = r.bytes(len);
  if (!r.ok() || !r.at_end()) return std::nullopt;
  if (p.htl > kHtlMax || (is_control(p.kind) && len != 0)) return std::nullopt;
  p.payload.assign(payload.begin(), payload.end());
  return p;
}

double airtime_for_bytes(std::size_t bytes, double bitrate_bps) {
  if (!(bitrate_bps > 0.0)) throw std::invalid_argument("bitrate must be positive");
  return static_cast<double>(bytes) * 8.0 / bitrate_bps;
}

double packet_airtime(const HelperPacket& p, const TransmissionStrategy& s) {
  return airtime_for_bytes(serialized_size(p), s.bitrate_bps);
}

}  // namespace helper
