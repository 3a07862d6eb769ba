#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "helper/core/packet.hpp"
#include "helper/core/types.hpp"
#include "helper/message/message_service.hpp"
#include "helper/routing/routing.hpp"

namespace helper::sim {

struct EnergySample {
  double t = 0.0;
  NodeId node{};
  Energy residual;
};

/// One transmission attempt and the energy it was charged.
struct TxRecord {
  double t = 0.0;
  NodeId node{};
  PacketKind kind = PacketKind::kData;
  AppType app = AppType::kGeneric;
  NodeId origin{};
  std::uint16_t seq = 0;
  NodeId next_hop{};
  std::uint8_t htl = 0;
  double airtime = 0.0;
  Energy cost;
  bool truncated = false;
};

struct DeathRecord {
  double t = 0.0;
  NodeId node{};
  /// "energy" for exhaustion, "drain" for a scripted drain.
  std::string cause;
};

/// A packet a node's service layer or a traffic session put into the network.
struct OriginateRecord {
  double t = 0.0;
  NodeId node{};
  AppType app = AppType::kGeneric;
  std::uint16_t seq = 0;
  NodeId final_dst{};
  std::uint8_t htl = 0;
  /// Index of the injection that caused it, -1 for sessions and protocol replies.
  int injection = -1;
};

/// DATA handed up to the service layer of `node`.
struct DeliveryRecord {
  double t = 0.0;
  NodeId node{};
  NodeId origin{};
  std::uint16_t seq = 0;
  AppType app = AppType::kGeneric;
  bool unicast = false;
  /// Session index for traffic-session packets, -1 otherwise.
  int session = -1;
  double latency = 0.0;
};

struct DropRecord {
  double t = 0.0;
  NodeId node{};
  NodeId origin{};
  std::uint16_t seq = 0;
  std::string reason;
};

struct SessionStats {
  NodeId src{};
  NodeId dst{};
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delivered_bits = 0;
  std::vector<double> latencies;
  std::vector<double> delivery_times;

  std::uint64_t outstanding() const { return sent - delivered - dropped; }
};

struct InjectionError {
  double t = 0.0;
  int injection = -1;
  std::string message;
};

struct MetricsLog {
  std::string scenario;
  routing::Algorithm routing = routing::Algorithm::kSeek;
  std::uint64_t seed = 0;
  double end_time = 0.0;
  std::map<NodeId, Energy> initial;
  std::map<NodeId, Energy> residual;
  /// Energy removed by scripted drains, per node.
  std::map<NodeId, Energy> drained;
  /// One sample per node at t=0 and after every change, in time order.
  std::vector<EnergySample> energy;
  std::vector<TxRecord> tx;
  std::vector<DeathRecord> deaths;
  std::vector<OriginateRecord> originated;
  std::vector<DeliveryRecord> deliveries;
  std::vector<DropRecord> drops;
  std::vector<SessionStats> sessions;
  /// Forwarding decisions that led to an RTS.
  std::vector<routing::ForwardRecord> forwards;
  std::vector<message::ServiceEvent> service;
  std::vector<InjectionError> errors;
};

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimum residual energy over all nodes at time t.
double min_residual(const MetricsLog& log, double t);

/// Time of the first node death; the run's end time when nobody died.
double network_lifetime(const MetricsLog& log);

/// Session payload bits delivered per second over [0, network lifetime].
double network_throughput(const MetricsLog& log);

/// network_throughput / link_throughput. Throws MetricsError when the
/// link throughput calibration is missing or not positive.
double normalized_throughput(const MetricsLog& log, std::optional<double> link_throughput_bps);

/// Mean session-packet latency in seconds (0 when nothing was delivered).
double mean_delay(const MetricsLog& log);

std::uint64_t total_sent(const MetricsLog& log);
std::uint64_t total_delivered(const MetricsLog& log);

/// Σ tx cost charged to `node`.
Energy tx_energy(const MetricsLog& log, NodeId node);

/// Fixed-format number rendering shared by every CSV so output is byte-stable.
std::string fmt_num(double v, int decimals = 6);

/// Writes summary/sessions/energy/tx/forwards/deliveries/service/deaths CSVs
/// into `dir`. Returns the paths written.
std::vector<std::string> write_run_csvs(const MetricsLog& log, const std::string& dir,
                                        std::optional<double> link_throughput_bps);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

}  // namespace helper::sim
