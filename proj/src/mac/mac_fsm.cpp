#include "helper/mac/mac_fsm.hpp"

#include <algorithm>
#include <cmath>

namespace helper::mac {

std::string_view to_string(MacState s) {
  switch (s) {
    case MacState::kIdle: return "IDLE";
    case MacState::kSense: return "SENSE";
    case MacState::kBackoff: return "BACKOFF";
    case MacState::kSendRts: return "SEND_RTS";
    case MacState::kWaitCts: return "WAIT_CTS";
    case MacState::kSendData: return "SEND_DATA";
    case MacState::kWaitAck: return "WAIT_ACK";
    case MacState::kRespond: return "RESPOND";
    case MacState::kDead: return "DEAD";
  }
  return "?";
}

double MacConfig::control_airtime(const TransmissionStrategy& s) const {
  return airtime_for_bytes(kFixedPacketBytes, s.bitrate_bps);
}

double MacConfig::max_data_airtime(const TransmissionStrategy& s) const {
  return airtime_for_bytes(kFixedPacketBytes + kMaxPayloadBytes, s.bitrate_bps);
}

double backoff_duration(double u_norm, Rng& rng, const MacConfig& cfg) {
  const double u = std::clamp(u_norm, 0.0, 1.0);
  const double window = cfg.w_min + (1.0 - u) * (cfg.w_max - cfg.w_min);
  return uniform(rng, 0.0, window);
}

MacFsm::MacFsm(NodeId self, MacConfig cfg, Rng backoff_rng)
    : self_(self), cfg_(cfg), rng_(std::move(backoff_rng)) {}

std::vector<MacAction> MacFsm::step(MacHost& host, double now, const MacEvent& event) {
  Actions out;
  if (state_ == MacState::kDead) return out;
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ev::Kick>) {
          on_kick(host, now, out);
        } else if constexpr (std::is_same_v<E, ev::Timer>) {
          if (e.token == timer_token_) on_timer(host, now, out);
        } else if constexpr (std::is_same_v<E, ev::TxDone>) {
          on_tx_done(host, now, out);
        } else {
          on_received(host, now, e, out);
        }
      },
      event);
  return out;
}

std::optional<HelperPacket> MacFsm::maybe_beacon(double now, const Oai& oai) {
  if (state_ == MacState::kDead || pending_beacon_) return std::nullopt;
  if (now - last_control_tx_ < cfg_.beacon_period) return std::nullopt;
  pending_beacon_ = control(PacketKind::kBeacon, kBroadcast, oai);
  last_control_tx_ = now;
  return pending_beacon_;
}

void MacFsm::kill() {
  state_ = MacState::kDead;
  phase_ = Phase::kNone;
  current_.reset();
  pending_beacon_.reset();
  ++timer_token_;
}

HelperPacket MacFsm::control(PacketKind kind, NodeId to, const Oai& oai) const {
  HelperPacket p;
  p.kind = kind;
  p.app_type = AppType::kGeneric;
  p.src = self_;
  p.origin = self_;
  p.final_dst = to;
  p.next_hop = to;
  p.oai = kind == PacketKind::kAck ? Oai{} : oai;
  return p;
}

void MacFsm::set_timer(double at, Actions& out) { out.push_back(act::SetTimer{at, ++timer_token_}); }

void MacFsm::on_kick(MacHost& host, double now, Actions& out) {
  if (state_ == MacState::kIdle) start_contention(host, now, out);
}

void MacFsm::start_contention(MacHost& host, double now, Actions& out) {
  state_ = MacState::kIdle;
  phase_ = Phase::kNone;
  current_.reset();
  current_is_beacon_ = false;
  if (pending_beacon_) {
    current_ = OutboundFrame{*pending_beacon_, cfg_.beacon_strategy, cfg_.broadcast_u_norm};
    current_is_beacon_ = true;
  } else {
    auto frame = host.next_frame(now);
    if (!frame) return;
    current_ = std::move(frame);
    const auto key = std::make_pair(current_->packet.origin, current_->packet.seq);
    if (retry_key_ != key) {
      retries_ = 0;
      retry_key_ = key;
    }
  }
  enter_backoff(now, current_->u_norm, out);
}

void MacFsm::enter_backoff(double now, double u_norm, Actions& out) {
  state_ = MacState::kBackoff;
  nav_deferred_ = false;
  phase_ = Phase::kNone;
  const double wait = backoff_duration(u_norm, rng_, cfg_) * std::ldexp(1.0, retries_);
  set_timer(now + wait, out);
}

void MacFsm::transmit_current(MacHost& host, double now, Actions& out) {
  phase_ = Phase::kOnAir;
  if (current_is_beacon_) {
    HelperPacket beacon = *pending_beacon_;
    beacon.oai = host.local_oai();
    // The beacon clock was reset when it was queued; keeping that instant
    // avoids drift from contention delay.
    pending_beacon_.reset();
    state_ = MacState::kSendData;
    out.push_back(act::Transmit{std::move(beacon), current_->strategy});
    return;
  }
  if (current_->packet.is_broadcast()) {
    state_ = MacState::kSendData;
    out.push_back(act::Transmit{current_->packet, current_->strategy});
    return;
  }
  state_ = MacState::kSendRts;
  last_control_tx_ = now;
  out.push_back(act::Transmit{control(PacketKind::kRts, current_->packet.next_hop, host.local_oai()),
                              current_->strategy});
}

void MacFsm::on_timer(MacHost& host, double now, Actions& out) {
  switch (state_) {
    case MacState::kBackoff:
      if (now < nav_until(now)) {
        nav_deferred_ = true;
        set_timer(nav_wakeup(now), out);
      } else if (nav_deferred_) {
        // Everyone who deferred to this NAV wakes now; contend afresh
        // instead of sensing in lockstep.
        enter_backoff(now, current_->u_norm, out);
      } else {
        state_ = MacState::kSense;
        set_timer(now + cfg_.cad_latency, out);
      }
      return;

    case MacState::kSense: {
      if (now < nav_until(now) || host.channel_busy(now)) {
        enter_backoff(now, current_->u_norm, out);
        return;
      }
      if (!current_is_beacon_) {
        // Route on the freshest neighbor information.
        auto frame = host.next_frame(now);
        if (!frame) {
          go_idle_and_resume(host, now, out);
          return;
        }
        const auto key = std::make_pair(frame->packet.origin, frame->packet.seq);
        if (retry_key_ != key) {
          retries_ = 0;
          retry_key_ = key;
        }
        current_ = std::move(frame);
      }
      transmit_current(host, now, out);
      return;
    }

    case MacState::kWaitCts:
    case MacState::kWaitAck:
      retry_or_fail(host, now, out);
      return;

    case MacState::kSendData:
      if (phase_ == Phase::kTurnaround) {
        phase_ = Phase::kOnAir;
        out.push_back(act::Transmit{current_->packet, current_->strategy});
      }
      return;

    case MacState::kRespond:
      if (phase_ == Phase::kTurnaround) {
        phase_ = Phase::kOnAir;
        if (ack_for_) {
          out.push_back(act::Transmit{control(PacketKind::kAck, peer_, Oai{}), peer_strategy_});
        } else {
          last_control_tx_ = now;
          out.push_back(act::Transmit{control(PacketKind::kCts, peer_, host.local_oai()),
                                      peer_strategy_});
        }
      } else if (phase_ == Phase::kAwaitData) {
        go_idle_and_resume(host, now, out);
      }
      return;

    default:
      return;
  }
}

void MacFsm::on_tx_done(MacHost& host, double now, Actions& out) {
  switch (state_) {
    case MacState::kSendRts: {
      state_ = MacState::kWaitCts;
      phase_ = Phase::kNone;
      const double data = packet_airtime(current_->packet, current_->strategy);
      set_timer(now + 2.0 * data + cfg_.w_min, out);
      return;
    }
    case MacState::kSendData:
      if (current_is_beacon_ || current_->packet.is_broadcast()) {
        finish_frame(host, now, out, true);
      } else {
        state_ = MacState::kWaitAck;
        phase_ = Phase::kNone;
        const double data = packet_airtime(current_->packet, current_->strategy);
        set_timer(now + 2.0 * data + cfg_.w_min, out);
      }
      return;
    case MacState::kRespond:
      if (ack_for_) {
        go_idle_and_resume(host, now, out);
      } else {
        phase_ = Phase::kAwaitData;
        set_timer(now + 2.0 * cfg_.max_data_airtime(peer_strategy_) + cfg_.w_min, out);
      }
      return;
    default:
      return;
  }
}

void MacFsm::retry_or_fail(MacHost& host, double now, Actions& out) {
  if (retries_ >= cfg_.max_retries) {
    finish_frame(host, now, out, false);
    return;
  }
  ++retries_;
  enter_backoff(now, current_->u_norm, out);
}

void MacFsm::finish_frame(MacHost& host, double now, Actions& out, bool ok) {
  if (current_ && !current_is_beacon_) {
    if (ok) {
      out.push_back(act::FrameSent{current_->packet});
    } else {
      out.push_back(act::FrameFailed{current_->packet});
    }
  }
  retries_ = 0;
  retry_key_.reset();
  go_idle_and_resume(host, now, out);
}

double MacFsm::nav_until(double now) {
  if (rts_nav_check_at_ && now >= *rts_nav_check_at_) {
    nav_until_ = nav_before_rts_;
    rts_nav_check_at_.reset();
  }
  return nav_until_;
}

double MacFsm::nav_wakeup(double now) {
  const double nav = nav_until(now);
  return rts_nav_check_at_ ? std::min(nav, *rts_nav_check_at_) : nav;
}

void MacFsm::go_idle_and_resume(MacHost& host, double now, Actions& out) {
  ack_for_.reset();
  start_contention(host, now, out);
}

void MacFsm::on_received(MacHost& host, double now, const ev::Received& rx, Actions& out) {
  (void)host;
  const HelperPacket& p = rx.packet;
  if (p.kind == PacketKind::kData && p.is_broadcast()) {
    out.push_back(act::DeliverUp{p});
    return;
  }
  const bool addressed = p.next_hop == self_;
  // Any later frame of a handshake confirms the NAV an RTS set.
  if (p.kind == PacketKind::kCts || p.kind == PacketKind::kData || p.kind == PacketKind::kAck) {
    rts_nav_check_at_.reset();
  }
  const double ctl = cfg_.control_airtime(rx.strategy);
  const double data = cfg_.max_data_airtime(rx.strategy);

  switch (p.kind) {
    case PacketKind::kRts:
      if (!addressed) {
        const double before = nav_until(now);
        if (!rts_nav_check_at_) nav_before_rts_ = before;
        nav_until_ = std::max(before, now + 3.0 * cfg_.sifs + 2.0 * ctl + data);
        rts_nav_check_at_ = now + 2.0 * cfg_.sifs + ctl + cfg_.cad_latency;
        return;
      }
      if ((state_ == MacState::kIdle || state_ == MacState::kBackoff ||
           state_ == MacState::kSense) &&
          now >= nav_until(now)) {
        state_ = MacState::kRespond;
        phase_ = Phase::kTurnaround;
        peer_ = p.src;
        peer_strategy_ = rx.strategy;
        ack_for_.reset();
        set_timer(now + cfg_.sifs, out);
      }
      return;

    case PacketKind::kCts:
      if (!addressed) {
        nav_until_ = std::max(nav_until_, now + 2.0 * cfg_.sifs + ctl + data);
        return;
      }
      if (state_ == MacState::kWaitCts && current_ && p.src == current_->packet.next_hop) {
        state_ = MacState::kSendData;
        phase_ = Phase::kTurnaround;
        set_timer(now + cfg_.sifs, out);
      }
      return;

    case PacketKind::kData:
      if (!addressed) {
        // Cover the ACK that follows.
        nav_until_ = std::max(nav_until(now), now + 2.0 * cfg_.sifs + ctl);
        return;
      }
      if (addressed && state_ == MacState::kRespond && phase_ == Phase::kAwaitData &&
          p.src == peer_) {
        out.push_back(act::DeliverUp{p});
        ack_for_ = p;
        phase_ = Phase::kTurnaround;
        set_timer(now + cfg_.sifs, out);
      }
      return;

    case PacketKind::kAck:
      if (addressed && state_ == MacState::kWaitAck && current_ &&
          p.src == current_->packet.next_hop) {
        finish_frame(host, now, out, true);
      }
      return;

    case PacketKind::kBeacon:
      return;
  }
}

const NeighborEntry* harvest_oai(NeighborTable& table, const HelperPacket& p,
                                 std::size_t probe_intact_bits, double bitrate_bps, double now,
                                 double alpha) {
  if (p.kind != PacketKind::kRts && p.kind != PacketKind::kCts && p.kind != PacketKind::kBeacon) {
    return nullptr;
  }
  const double ratio =
      static_cast<double>(std::min(probe_intact_bits, kProbeBits)) / static_cast<double>(kProbeBits);
  const double sample = ratio * bitrate_bps;

  NeighborEntry row;
  if (const auto* old = table.find(p.src)) {
    row = *old;
    row.goodput_bps = alpha * sample + (1.0 - alpha) * row.goodput_bps;
  } else {
    row.goodput_bps = sample;
  }
  row.probe_bitrate_bps = bitrate_bps;
  row.node = p.src;
  row.position = p.oai.position();
  row.queue_backlog = p.oai.queue_backlog;
  row.residual_j = p.oai.residual_j;
  row.initial_j = p.oai.initial_j;
  row.last_heard = now;
  return table.upsert(row);
}

}  // namespace helper::mac
