#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"

#include "helper/sim/metrics.hpp"
#include "helper/sim/scenario.hpp"
#include "helper/sim/simulator.hpp"

namespace helper::emu {

using nlohmann::json;

/// A client request: {"op", "node"?, "body"?, "id"?}. `node` accepts a
/// NodeId or a label; `id` is echoed back so clients can correlate replies.
struct ClientCommand {
  std::string op;
  std::optional<NodeId> node;
  json body = json::object();
  json id;
};

/// Structured failure reported to the client; the connection stays open.
struct BridgeError {
  std::string code;
  std::string message;
  std::string request_op;
  json id;
};

/// Error codes carried in `error` frames.
namespace code {
inline constexpr const char* kBadJson = "bad_json";
inline constexpr const char* kBadRequest = "bad_request";
inline constexpr const char* kUnknownOp = "unknown_op";
inline constexpr const char* kUnknownNode = "unknown_node";
inline constexpr const char* kDeadNode = "dead_node";
inline constexpr const char* kRejected = "rejected";
inline constexpr const char* kFinished = "finished";
}  // namespace code

using ParseResult = std::variant<ClientCommand, BridgeError>;

/// Parses one text frame. Node labels resolve against `sc`.
ParseResult parse_command(std::string_view text, const sim::Scenario& sc);

/// Converts a client command into the operation the simulator applies.
/// `nd`, `alert` and `approve` default to the ERC when `node` is absent.
std::variant<sim::Injection, BridgeError> to_injection(const ClientCommand& cmd,
                                                       const sim::Scenario& sc, double now);

/// Frame bodies. Frames themselves are {"op", "tick", "t", "node"?, "body"}.
json node_json(const sim::NodeStatus& n);
json service_event_json(const message::ServiceEvent& e);
json originate_json(const sim::OriginateRecord& o);
json error_body(const BridgeError& e);

/// True for service events that carry a message to a user ("receive"
/// frames); the rest become "node_event" frames.
bool is_receive(const message::ServiceEvent& e);

}  // namespace helper::emu
