#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace helper {

/// Identity of one HELPER within a scenario.
enum class NodeId : std::uint16_t {};

inline constexpr NodeId kBroadcast{0xFFFF};

constexpr std::uint16_t to_int(NodeId id) { return static_cast<std::uint16_t>(id); }
constexpr NodeId node_id(unsigned v) { return NodeId{static_cast<std::uint16_t>(v)}; }

std::string to_string(NodeId id);

/// Hop-to-live ceiling for floods and unicast traffic.
inline constexpr std::uint8_t kHtlMax = 16;
/// HELP messages are additionally broadcast to the vicinity with this HTL.
inline constexpr std::uint8_t kHelpVicinityHtl = 2;
inline constexpr std::uint8_t kNeighborhoodHtl = 1;

inline constexpr double kBeaconPeriod = 5.0;  // seconds
inline constexpr double kNeighborTtl = 3.0 * kBeaconPeriod;

/// Planar local frame in meters. lat/lon are carried for display only.
struct GeoPosition {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> lat;
  std::optional<double> lon;

  friend bool operator==(const GeoPosition& a, const GeoPosition& b) {
    return a.x == b.x && a.y == b.y;
  }
};

/// Euclidean distance in meters.
double distance(const GeoPosition& a, const GeoPosition& b);

/// Battery energy held as integer nanojoules so that accounting is exact.
class Energy {
 public:
  constexpr Energy() = default;

  static constexpr Energy from_nanojoules(std::int64_t nj) { return Energy(nj); }
  static Energy from_joules(double j) {
    return Energy(static_cast<std::int64_t>(std::llround(j * 1e9)));
  }

  constexpr std::int64_t nanojoules() const { return nj_; }
  constexpr double joules() const { return static_cast<double>(nj_) * 1e-9; }

  constexpr Energy& operator+=(Energy o) {
    nj_ += o.nj_;
    return *this;
  }
  constexpr Energy& operator-=(Energy o) {
    nj_ -= o.nj_;
    return *this;
  }
  friend constexpr Energy operator+(Energy a, Energy b) { return Energy(a.nj_ + b.nj_); }
  friend constexpr Energy operator-(Energy a, Energy b) { return Energy(a.nj_ - b.nj_); }
  friend constexpr auto operator<=>(Energy, Energy) = default;

 private:
  constexpr explicit Energy(std::int64_t nj) : nj_(nj) {}
  std::int64_t nj_ = 0;
};

struct EnergyState {
  Energy initial;
  Energy residual;

  bool depleted() const { return residual.nanojoules() <= 0; }
};

/// One (bitrate, transmit power) choice from the configured strategy set.
struct TransmissionStrategy {
  double bitrate_bps = 5000.0;
  double tx_power_w = 0.1;

  friend bool operator==(const TransmissionStrategy&, const TransmissionStrategy&) = default;
};

}  // namespace helper

template <>
struct std::hash<helper::NodeId> {
  std::size_t operator()(helper::NodeId id) const noexcept {
    return std::hash<std::uint16_t>{}(helper::to_int(id));
  }
};
