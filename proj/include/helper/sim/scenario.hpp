#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "helper/core/types.hpp"
#include "helper/mac/mac_fsm.hpp"
#include "helper/message/message_service.hpp"
#include "helper/radio/radio_medium.hpp"
#include "helper/routing/routing.hpp"

namespace helper::sim {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeSpec {
  NodeId id{};
  std::string label;
  GeoPosition position;
  double initial_energy_j = 25.0;
};

/// Constant-rate unicast traffic. Generation stops after `count` packets, at
/// `start + duration`, or when the source dies, whichever comes first.
struct Session {
  NodeId src{};
  NodeId dst{};
  std::size_t payload_bytes = 200;
  double interval_s = 0.1;
  double start_s = 0.0;
  std::optional<std::size_t> count;
  std::optional<double> duration_s;
};

/// A scheduled external action: what a dashboard or script would do.
struct Injection {
  enum class Op { kSend, kNd, kAlert, kApprove, kDrain };
  double at = 0.0;
  Op op = Op::kSend;
  NodeId node{};
  message::AppMessage message;
  std::uint32_t pending_id = 0;
  message::Verdict verdict = message::Verdict::kApprove;
};

std::string_view to_string(Injection::Op op);

struct Scenario {
  std::string name = "scenario";
  std::vector<NodeSpec> nodes;
  NodeId erc{};
  radio::LinkParams link;
  routing::Algorithm routing = routing::Algorithm::kSeek;
  std::vector<Session> sessions;
  std::vector<Injection> injections;
  double duration_s = 7200.0;
  std::uint64_t rng_seed = 1;
  /// When false the ERC does not announce itself at t=0.
  bool setup_flood = true;
  /// Lifetime studies stop at the first node death.
  bool stop_on_first_death = false;
  mac::MacConfig mac;

  const NodeSpec* find(NodeId id) const;
  std::optional<NodeId> by_label(std::string_view label) const;
  std::string label_of(NodeId id) const;
};

/// Rejects scenarios the simulator cannot run, with a message naming the problem.
void validate(const Scenario& sc);

/// Parses a `schema: 1` scenario document and validates it.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::json to_json(const Scenario& sc);

/// JSON form of an app message: {"type","user","text","location":{x,y},"resource","energy_j"}.
message::AppMessage app_message_from_json(const nlohmann::json& j);
nlohmann::json to_json(const message::AppMessage& m);

/// Derives MAC timing (CAD latency, beacon strategy) from the link settings.
mac::MacConfig mac_config_for(const radio::LinkParams& link, mac::MacConfig base = {});

/// Six HELPERs on a 3x2 grid with 1000 m spacing and 1500 m range, so
/// horizontal, vertical and diagonal neighbors hear each other:
///
///   C(0,1000)  D(1000,1000)  F(2000,1000)
///   A(0,0)     B(1000,0)     E(2000,0)
///
/// Only the outer columns are out of each other's range, so A->F, C->E and
/// F->A need a relay while B->C is a direct link.
/// F is the ERC. 25 J per node, one 5 kbps / 0.1 W strategy.
Scenario canonical_grid();

/// The four evaluation sessions A->F, B->C, C->E, F->A in order.
std::vector<Session> canonical_sessions(std::size_t payload_bytes = 200, double interval_s = 0.1);

}  // namespace helper::sim
