#include "helper/emu/bridge.hpp"

namespace helper::emu {

namespace {

BridgeError error(const char* code, std::string message, const ClientCommand* cmd = nullptr) {
  BridgeError e{code, std::move(message), {}, nullptr};
  if (cmd) {
    e.request_op = cmd->op;
    e.id = cmd->id;
  }
  return e;
}

json position_json(const GeoPosition& p) {
  json j{{"x", p.x}, {"y", p.y}};
  if (p.lat) j["lat"] = *p.lat;
  if (p.lon) j["lon"] = *p.lon;
  return j;
}

}  // namespace

ParseResult parse_command(std::string_view text, const sim::Scenario& sc) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) return error(code::kBadJson, "frame is not valid JSON");
  if (!doc.is_object()) return error(code::kBadRequest, "frame must be a JSON object");

  ClientCommand cmd;
  if (auto it = doc.find("id"); it != doc.end()) cmd.id = *it;
  auto op = doc.find("op");
  if (op == doc.end() || !op->is_string()) {
    return error(code::kBadRequest, "frame needs a string \"op\"", &cmd);
  }
  cmd.op = op->get<std::string>();
  if (auto it = doc.find("body"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) return error(code::kBadRequest, "\"body\" must be an object", &cmd);
    cmd.body = *it;
  }
  if (auto it = doc.find("node"); it != doc.end() && !it->is_null()) {
    if (it->is_number_integer() || it->is_number_unsigned()) {
      const auto v = it->get<long long>();
      if (v < 0 || v >= 0xFFFF || !sc.find(node_id(static_cast<unsigned>(v)))) {
        return error(code::kUnknownNode, "no node " + it->dump(), &cmd);
      }
      cmd.node = node_id(static_cast<unsigned>(v));
    } else if (it->is_string()) {
      auto id = sc.by_label(it->get<std::string>());
      if (!id) return error(code::kUnknownNode, "no node labeled " + it->dump(), &cmd);
      cmd.node = *id;
    } else {
      return error(code::kBadRequest, "\"node\" must be an id or a label", &cmd);
    }
  }
  static constexpr std::string_view kClientOps[] = {"snapshot", "send", "nd", "alert", "approve"};
  if (std::find(std::begin(kClientOps), std::end(kClientOps), cmd.op) == std::end(kClientOps)) {
    return error(code::kUnknownOp, "unknown op \"" + cmd.op + "\"", &cmd);
  }
  return cmd;
}

std::variant<sim::Injection, BridgeError> to_injection(const ClientCommand& cmd,
                                                       const sim::Scenario& sc, double now) {
  sim::Injection inj;
  inj.at = now;
  inj.node = cmd.node.value_or(sc.erc);
  try {
    if (cmd.op == "send") {
      if (!cmd.node) return error(code::kBadRequest, "send needs a \"node\"", &cmd);
      inj.op = sim::Injection::Op::kSend;
      inj.message = sim::app_message_from_json(cmd.body);
    } else if (cmd.op == "nd") {
      inj.op = sim::Injection::Op::kNd;
    } else if (cmd.op == "alert") {
      inj.op = sim::Injection::Op::kAlert;
      inj.message.type = AppType::kAlert;
      inj.message.text = cmd.body.value("text", std::string{});
    } else if (cmd.op == "approve") {
      inj.op = sim::Injection::Op::kApprove;
      auto pending = cmd.body.find("pending");
      if (pending == cmd.body.end() || !pending->is_number_unsigned()) {
        return error(code::kBadRequest, "approve needs body.pending (a pending id)", &cmd);
      }
      inj.pending_id = pending->get<std::uint32_t>();
      const auto verdict = cmd.body.value("verdict", std::string{"approve"});
      if (verdict != "approve" && verdict != "reject") {
        return error(code::kBadRequest, "verdict must be approve or reject", &cmd);
      }
      inj.verdict = verdict == "approve" ? message::Verdict::kApprove : message::Verdict::kReject;
    } else {
      return error(code::kUnknownOp, "op \"" + cmd.op + "\" is not an operation", &cmd);
    }
  } catch (const std::exception& e) {
    return error(code::kBadRequest, e.what(), &cmd);
  }
  return inj;
}

json node_json(const sim::NodeStatus& n) {
  json neighbors = json::array();
  for (const auto& e : n.neighbors) {
    neighbors.push_back({{"id", to_int(e.node)},
                         {"position", position_json(e.position)},
                         {"queue", e.queue_backlog},
                         {"residual_j", e.residual_j},
                         {"goodput_bps", e.goodput_bps},
                         {"last_heard", e.last_heard}});
  }
  return {{"id", to_int(n.id)},
          {"label", n.label},
          {"position", position_json(n.position)},
          {"alive", n.alive},
          {"erc", n.is_erc},
          {"initial_j", n.initial_j},
          {"residual_j", n.residual_j},
          {"queue", n.queue_backlog},
          {"mac_state", mac::to_string(n.mac_state)},
          {"neighbors", std::move(neighbors)}};
}

json service_event_json(const message::ServiceEvent& e) {
  json j{{"event", message::to_string(e.kind)},
         {"origin", to_int(e.origin)},
         {"seq", e.seq},
         {"message", sim::to_json(e.message)}};
  if (e.pending_id) j["pending"] = e.pending_id;
  return j;
}

json originate_json(const sim::OriginateRecord& o) {
  json j{{"type", to_string(o.app)}, {"seq", o.seq}, {"htl", o.htl}};
  j["dst"] = o.final_dst == kBroadcast ? json("broadcast") : json(to_int(o.final_dst));
  return j;
}

json error_body(const BridgeError& e) {
  json j{{"code", e.code}, {"message", e.message}};
  if (!e.request_op.empty()) j["request_op"] = e.request_op;
  if (!e.id.is_null()) j["id"] = e.id;
  return j;
}

bool is_receive(const message::ServiceEvent& e) {
  using K = message::ServiceEvent::Kind;
  return e.kind == K::kReceived || e.kind == K::kLocal || e.kind == K::kDistress;
}

}  // namespace helper::emu
