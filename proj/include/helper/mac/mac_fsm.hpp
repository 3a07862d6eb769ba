#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "helper/core/neighbor_table.hpp"
#include "helper/core/packet.hpp"
#include "helper/core/rng.hpp"

namespace helper::mac {

enum class MacState {
  kIdle,
  kSense,
  kBackoff,
  kSendRts,
  kWaitCts,
  kSendData,
  kWaitAck,
  kRespond,
  kDead,
};

std::string_view to_string(MacState s);

struct MacConfig {
  int max_retries = 3;
  double w_min = 0.05;
  double w_max = 0.8;
  double beacon_period = kBeaconPeriod;
  double goodput_alpha = 0.3;
  double sifs = 0.001;
  double cad_latency = 2.0 * 8.0 / 5000.0;
  /// Strategy used for BEACONs.
  TransmissionStrategy beacon_strategy;
  /// Broadcasts carry no utility; they contend with this normalized value.
  double broadcast_u_norm = 0.5;

  /// Airtime of a control frame (fixed size) at `s`.
  double control_airtime(const TransmissionStrategy& s) const;
  /// Airtime of the largest DATA frame at `s`; used for NAV and responder timeouts.
  double max_data_airtime(const TransmissionStrategy& s) const;
};

/// Utility-weighted contention window: uniform on [0, W_min + (1-u)(W_max-W_min)].
double backoff_duration(double u_norm, Rng& rng, const MacConfig& cfg = {});

/// A DATA (unicast or broadcast) frame offered by the network layer.
struct OutboundFrame {
  HelperPacket packet;
  TransmissionStrategy strategy;
  double u_norm = 0.5;
};

/// What the FSM needs from the node that owns it.
class MacHost {
 public:
  virtual ~MacHost() = default;
  /// Head-of-line frame with a freshly computed next hop, or nothing to send.
  virtual std::optional<OutboundFrame> next_frame(double now) = 0;
  virtual Oai local_oai() const = 0;
  virtual bool channel_busy(double now) const = 0;
};

namespace ev {
struct Kick {};
struct Timer {
  std::uint64_t token = 0;
};
struct TxDone {};
struct Received {
  HelperPacket packet;
  TransmissionStrategy strategy;
};
}  // namespace ev
using MacEvent = std::variant<ev::Kick, ev::Timer, ev::TxDone, ev::Received>;

namespace act {
struct Transmit {
  HelperPacket packet;
  TransmissionStrategy strategy;
};
struct SetTimer {
  double at = 0.0;
  std::uint64_t token = 0;
};
struct DeliverUp {
  HelperPacket packet;
};
/// Unicast frame acknowledged, or broadcast frame fully transmitted.
struct FrameSent {
  HelperPacket packet;
};
/// Unicast frame abandoned after the retry budget was spent.
struct FrameFailed {
  HelperPacket packet;
};
}  // namespace act
using MacAction =
    std::variant<act::Transmit, act::SetTimer, act::DeliverUp, act::FrameSent, act::FrameFailed>;

/// CSMA/CA with RTS/CTS/DATA/ACK for unicast and sense-then-send for broadcast.
///
/// Contention: BACKOFF (utility-weighted random wait) -> SENSE (CAD for
/// cad_latency) -> transmit. A busy channel or an active NAV sends the node
/// back to BACKOFF; a backoff that ends under a NAV waits it out and draws a
/// fresh backoff. Unicast: SEND_RTS -> WAIT_CTS -> SEND_DATA -> WAIT_ACK.
/// A CTS or ACK timeout doubles the contention window and retries; after
/// max_retries retries the frame is reported as failed. Receivers answer an
/// RTS from IDLE/BACKOFF/SENSE by entering RESPOND (CTS, await DATA, ACK).
/// A NAV set by an overheard RTS is dropped again when no CTS, DATA or ACK of
/// that exchange is heard within 2 SIFS + CTS airtime + CAD latency, so a
/// failed handshake does not silence the neighborhood for a whole exchange.
class MacFsm {
 public:
  MacFsm(NodeId self, MacConfig cfg, Rng backoff_rng);

  std::vector<MacAction> step(MacHost& host, double now, const MacEvent& event);

  /// Queues a BEACON if no control frame went out for a full beacon period.
  std::optional<HelperPacket> maybe_beacon(double now, const Oai& oai);
  /// Earliest time a beacon could next become due.
  double next_beacon_check() const { return last_control_tx_ + cfg_.beacon_period; }

  void kill();

  MacState state() const { return state_; }
  int retries() const { return retries_; }
  /// Deferral deadline in force at `now` (after any RTS-NAV reset).
  double nav_until(double now);
  double last_control_tx() const { return last_control_tx_; }
  bool beacon_pending() const { return pending_beacon_.has_value(); }
  const MacConfig& config() const { return cfg_; }

 private:
  enum class Phase { kNone, kTurnaround, kOnAir, kAwaitData };

  using Actions = std::vector<MacAction>;

  void on_kick(MacHost& host, double now, Actions& out);
  void on_timer(MacHost& host, double now, Actions& out);
  void on_tx_done(MacHost& host, double now, Actions& out);
  void on_received(MacHost& host, double now, const ev::Received& rx, Actions& out);

  void start_contention(MacHost& host, double now, Actions& out);
  void enter_backoff(double now, double u_norm, Actions& out);
  void transmit_current(MacHost& host, double now, Actions& out);
  void retry_or_fail(MacHost& host, double now, Actions& out);
  void finish_frame(MacHost& host, double now, Actions& out, bool ok);
  void set_timer(double at, Actions& out);
  void go_idle_and_resume(MacHost& host, double now, Actions& out);

  HelperPacket control(PacketKind kind, NodeId to, const Oai& oai) const;
  /// When to look at the NAV again: its end, or the RTS-NAV reset check.
  double nav_wakeup(double now);

  NodeId self_;
  MacConfig cfg_;
  Rng rng_;

  MacState state_ = MacState::kIdle;
  Phase phase_ = Phase::kNone;
  int retries_ = 0;
  double nav_until_ = 0.0;
  /// Pending RTS-NAV reset: the NAV to fall back to and when to do it.
  std::optional<double> rts_nav_check_at_;
  double nav_before_rts_ = 0.0;
  /// The current backoff ran into a NAV and is waiting it out.
  bool nav_deferred_ = false;
  double last_control_tx_ = 0.0;
  std::uint64_t timer_token_ = 0;

  std::optional<OutboundFrame> current_;
  bool current_is_beacon_ = false;
  std::optional<HelperPacket> pending_beacon_;
  std::optional<std::pair<NodeId, std::uint16_t>> retry_key_;

  NodeId peer_{};
  TransmissionStrategy peer_strategy_;
  std::optional<HelperPacket> ack_for_;
};

/// Updates the row for `p.src` from an overheard RTS/CTS/BEACON.
/// Goodput sample = (intact probe bits / probe bits) x bitrate, folded in as
/// an EWMA; the first sample initializes the row. Other kinds are ignored.
const NeighborEntry* harvest_oai(NeighborTable& table, const HelperPacket& p,
                                 std::size_t probe_intact_bits, double bitrate_bps, double now,
                                 double alpha = 0.3);

}  // namespace helper::mac
