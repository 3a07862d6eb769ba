#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "helper/core/types.hpp"

namespace helper {

enum class PacketKind : std::uint8_t { kRts = 0, kCts = 1, kAck = 2, kBeacon = 3, kData = 4 };

enum class AppType : std::uint8_t {
  kLocal = 0,
  kNeighborhood = 1,
  kHelp = 2,
  kResource = 3,
  kNd = 4,
  kAlert = 5,
  kResourceUpdate = 6,
  kHelperUpdate = 7,
  kGeneric = 8,
};

std::string_view to_string(PacketKind kind);
std::string_view to_string(AppType type);
std::optional<AppType> parse_app_type(std::string_view name);

bool is_control(PacketKind kind);

/// Optimization Assisting Information piggybacked on RTS/CTS/BEACON.
/// Scalars are stored at wire precision (float32) so a decoded packet
/// compares equal to the one that was encoded.
struct Oai {
  std::uint32_t queue_backlog = 0;
  float residual_j = 0.0f;
  float initial_j = 0.0f;
  float x = 0.0f;
  float y = 0.0f;

  GeoPosition position() const { return {x, y}; }

  friend bool operator==(const Oai&, const Oai&) = default;
};

Oai make_oai(std::size_t queue_backlog, const EnergyState& energy, const GeoPosition& pos);

inline constexpr std::size_t kProbeBytes = 16;
inline constexpr std::size_t kProbeBits = kProbeBytes * 8;
using Probe = std::array<std::uint8_t, kProbeBytes>;

/// The network-wide known bit sequence used for link probing.
const Probe& known_probe();

struct HelperPacket {
  PacketKind kind = PacketKind::kData;
  AppType app_type = AppType::kGeneric;
  NodeId src{};
  NodeId origin{};
  NodeId final_dst = kBroadcast;
  NodeId next_hop = kBroadcast;
  std::uint8_t htl = 0;
  std::uint16_t seq = 0;
  Oai oai;
  std::uint32_t origin_ms = 0;
  Probe probe = known_probe();
  std::vector<std::uint8_t> payload;

  bool is_broadcast() const { return next_hop == kBroadcast; }

  friend bool operator==(const HelperPacket&, const HelperPacket&) = default;
};

// 1 kind, 1 app_type, 2 src, 2 origin, 2 final_dst, 2 next_hop, 1 htl, 2 seq.
inline constexpr std::size_t kHeaderFieldBytes = 13;
// q, E_r, E_0, origin timestamp, x, y.
inline constexpr std::size_t kOaiBytes = 24;
inline constexpr std::size_t kFixedPacketBytes = kHeaderFieldBytes + kOaiBytes + kProbeBytes + 2;
inline constexpr std::size_t kMaxPayloadBytes = 255;

std::size_t serialized_size(const HelperPacket& p);

/// Little-endian fixed-order encoding.
std::vector<std::uint8_t> serialize(const HelperPacket& p);

/// Returns nullopt for truncated input, unknown enum values or trailing bytes.
std::optional<HelperPacket> deserialize(std::span<const std::uint8_t> bytes);

/// Time on air for a frame of `bytes` at `bitrate_bps`.
double airtime_for_bytes(std::size_t bytes, double bitrate_bps);
double packet_airtime(const HelperPacket& p, const TransmissionStrategy& s);

}  // namespace helper
