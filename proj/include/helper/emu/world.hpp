#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "helper/emu/bridge.hpp"
#include "helper/sim/simulator.hpp"

namespace helper::emu {

/// Frames produced by one client request.
struct Outbound {
  /// Goes back to the requesting client only.
  json reply;
  /// Fan-out to every connected client (effects of the request).
  std::vector<json> broadcast;
};

/// The emulated network: a Simulator driven in steps, with every client
/// operation recorded so the session can be replayed offline.
///
/// Not thread-safe; one owner thread drives it. Every frame it produces
/// carries the next value of a monotonically increasing `tick`.
class World {
 public:
  explicit World(sim::Scenario sc);

  double now() const { return sim_.now(); }
  bool finished() const { return sim_.finished(); }
  std::uint64_t tick() const { return tick_; }

  /// Advances emulated time to `t`, returning the frames to broadcast:
  /// receive / node_event frames as they happen and a metrics_tick at every
  /// whole emulated second.
  std::vector<json> advance_to(double t);

  /// Handles one client text frame at the current emulated time.
  Outbound handle(std::string_view frame);

  /// Full state frame sent to a client when it connects.
  json snapshot();
  json snapshot_body() const;

  /// Client operations applied so far, as timed injections.
  const std::vector<sim::Injection>& recorded() const { return recorded_; }
  /// The scenario plus the recorded operations, ending at the current time.
  /// Running it through the simulator reproduces this session.
  sim::Scenario replay_scenario() const;

  const sim::Simulator& simulator() const { return sim_; }

 private:
  json frame(const char* op, double t, json body, std::optional<NodeId> node = std::nullopt);
  json error_frame(const BridgeError& e);
  json metrics_frame();
  std::vector<json> drain_log();

  sim::Scenario base_;
  sim::Simulator sim_;
  std::uint64_t tick_ = 0;
  double next_metrics_ = 1.0;
  bool final_metrics_sent_ = false;
  std::size_t service_cursor_ = 0;
  std::size_t death_cursor_ = 0;
  std::vector<sim::Injection> recorded_;
};

}  // namespace helper::emu
