#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "helper/core/neighbor_table.hpp"
#include "helper/mac/mac_fsm.hpp"
#include "helper/message/message_service.hpp"
#include "helper/radio/radio_medium.hpp"
#include "helper/routing/routing.hpp"
#include "helper/sim/metrics.hpp"
#include "helper/sim/scenario.hpp"

namespace helper::sim {

/// Read-only view of one node for snapshots.
struct NodeStatus {
  NodeId id{};
  std::string label;
  GeoPosition position;
  bool alive = true;
  bool is_erc = false;
  double initial_j = 0.0;
  double residual_j = 0.0;
  std::size_t queue_backlog = 0;
  mac::MacState mac_state = mac::MacState::kIdle;
  std::vector<NeighborEntry> neighbors;
};

/// Outcome of an externally requested operation.
struct OpResult {
  bool ok = true;
  std::string error;
  /// Packets the operation put into the network (origin = the addressed node).
  std::vector<OriginateRecord> originated;
};

/// Deterministic discrete-event simulation of a HELPER network.
///
/// Events are ordered by (time, insertion order); every random draw comes
/// from a per-node named substream of the scenario seed, so a (scenario,
/// seed) pair always yields the same MetricsLog.
class Simulator {
 public:
  explicit Simulator(Scenario sc);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  /// Runs to the scenario duration, the first death (when configured) or
  /// until every session has finished and every injection has fired.
  MetricsLog run();

  /// Incremental driving, used by the emulator. Processes every event with
  /// time <= t and advances the clock to t.
  void run_until(double t);
  bool finished() const { return finished_; }
  /// When false the run continues to the duration even after every session
  /// has completed (a live world keeps accepting operations).
  void set_stop_when_idle(bool stop) { stop_when_idle_ = stop; }
  double now() const { return now_; }

  /// Applies an operation at the current time, exactly as a scheduled
  /// injection would. `index` tags the resulting trace records.
  OpResult apply(const Injection& op, int index = -1);

  const Scenario& scenario() const { return sc_; }
  const MetricsLog& log() const { return log_; }
  /// Closes the log (end time, residuals) without running further.
  MetricsLog finish();

  std::vector<NodeStatus> nodes() const;
  std::optional<NodeStatus> node(NodeId id) const;
  const message::ServiceLayer& service(NodeId id) const;

 private:
  struct Node;
  struct Event;
  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const;
  };
  struct PacketLedger;

  void schedule(double at, Event e);
  void dispatch(const Event& e);
  void start();
  void stop_if_done();

  void on_session_tick(std::size_t session);
  void on_beacon_check(Node& n);
  void on_tx_end(Node& n, radio::TxId id);
  void on_mac_timer(Node& n, std::uint64_t token);

  void step_mac(Node& n, const mac::MacEvent& e);
  void handle_actions(Node& n, std::vector<mac::MacAction> actions);
  void transmit(Node& n, const mac::act::Transmit& t);
  void deliver_up(Node& n, const HelperPacket& p);
  void originate(Node& n, HelperPacket p, int injection);
  void take_service_events(Node& n);
  void kill(Node& n, const std::string& cause);
  void record_energy(Node& n);
  void release_copy(const HelperPacket& p, NodeId at);
  void drop(Node& n, const HelperPacket& p, const std::string& reason);

  Node& node_ref(NodeId id);
  const Node& node_ref(NodeId id) const;

  Scenario sc_;
  radio::RadioMedium medium_;
  std::map<NodeId, GeoPosition> directory_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::map<NodeId, Node*> by_id_;

  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::uint64_t event_seq_ = 0;
  double now_ = 0.0;
  bool started_ = false;
  bool finished_ = false;
  bool stop_when_idle_ = true;
  std::size_t injections_fired_ = 0;
  std::vector<bool> session_generating_;

  std::unique_ptr<PacketLedger> ledger_;
  MetricsLog log_;
};

/// Point-to-point throughput of one saturated link with the scenario's PHY
/// and MAC settings (two nodes at `separation_m`, unlimited energy).
double calibrate_link_throughput(const Scenario& like, double separation_m = 1000.0,
                                 double duration_s = 600.0, std::uint64_t seed = 1);

}  // namespace helper::sim
