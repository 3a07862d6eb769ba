#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "helper/core/packet.hpp"
#include "helper/core/rng.hpp"
#include "helper/core/types.hpp"

namespace helper::radio {

/// Shared PHY parameters of a scenario.
struct LinkParams {
  double range_m = 2000.0;
  std::vector<TransmissionStrategy> strategies{TransmissionStrategy{}};
  /// Per-bit error probability, one entry per strategy.
  std::vector<double> ber{0.0};
  /// Link capacity C_ij (uniform across links); strategies above it are unusable.
  double capacity_bps = 5000.0;

  double ber_for(const TransmissionStrategy& s) const;
  /// Channel activity detection takes two symbol times, a symbol taken as one byte.
  double cad_latency() const;
};

/// Energy charged for one transmission attempt. When the battery cannot cover
/// the full frame the transmission is cut short and spends what is left.
struct TxCharge {
  Energy cost;
  double airtime = 0.0;
  bool truncated = false;
};

Energy tx_cost(const HelperPacket& p, const TransmissionStrategy& s);
TxCharge charge_for(const HelperPacket& p, const TransmissionStrategy& s, Energy residual);

/// Outcome of one frame at one receiver.
struct Reception {
  NodeId node{};
  bool collided = false;
  bool header_ok = true;
  std::size_t probe_intact_bits = kProbeBits;
  bool payload_ok = true;

  /// The header decoded; the frame can be acted on (probe/payload may still be damaged).
  bool decodable() const { return !collided && header_ok; }
  bool corrupted() const {
    return collided || !header_ok || !payload_ok || probe_intact_bits != kProbeBits;
  }
};

using TxId = std::uint64_t;

/// Single shared channel: range-based reachability, binary overlap collisions
/// (no capture), half-duplex radios and independent per-bit errors.
/// Owned by the scheduler; not thread-safe.
class RadioMedium {
 public:
  struct Station {
    NodeId id{};
    GeoPosition position;
  };

  RadioMedium(LinkParams params, std::vector<Station> stations, std::uint64_t seed);

  const LinkParams& params() const { return params_; }

  bool in_range(NodeId a, NodeId b) const;
  /// Nodes within range of `id`, excluding itself, ordered by NodeId.
  const std::vector<NodeId>& neighbors(NodeId id) const;

  /// Puts a frame on the air at `start`; it occupies the channel for `airtime`.
  TxId begin(NodeId tx, const HelperPacket& p, const TransmissionStrategy& s, double start,
             double airtime, bool truncated = false);

  /// Completes transmission `id` and reports the outcome at every listener
  /// that was in range and alive when it started.
  std::vector<Reception> finish(TxId id);

  /// True iff an in-range node other than `listener` is on the air at `t`.
  bool cad_busy(NodeId listener, double t) const;
  bool transmitting(NodeId id) const;

  /// A dead radio neither transmits nor receives.
  void kill(NodeId id);
  bool alive(NodeId id) const;

 private:
  struct Rx {
    NodeId node{};
    bool collided = false;
  };
  struct Tx {
    NodeId tx{};
    HelperPacket packet;
    TransmissionStrategy strategy;
    double start = 0.0;
    double end = 0.0;
    bool truncated = false;
    std::vector<Rx> receptions;
  };
  struct RadioState {
    Station station;
    std::vector<NodeId> neighbors;
    bool alive = true;
    std::optional<TxId> on_air;
    std::vector<TxId> hearing;
    Rng channel_rng;
  };

  RadioState& state(NodeId id);
  const RadioState& state(NodeId id) const;
  void mark_collided(RadioState& listener);
  Reception outcome(const Tx& tx, const Rx& rx, RadioState& listener);

  LinkParams params_;
  std::map<NodeId, RadioState> radios_;
  std::map<TxId, Tx> active_;
  TxId next_id_ = 1;
};

}  // namespace helper::radio
