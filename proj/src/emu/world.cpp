#include "helper/emu/world.hpp"

#include <algorithm>

namespace helper::emu {

World::World(sim::Scenario sc) : base_(sc), sim_(std::move(sc)) {
  sim_.set_stop_when_idle(false);
  sim_.run_until(0.0);
}

json World::frame(const char* op, double t, json body, std::optional<NodeId> node) {
  json f{{"op", op}, {"tick", ++tick_}, {"t", t}};
  if (node) f["node"] = to_int(*node);
  f["body"] = std::move(body);
  return f;
}

json World::error_frame(const BridgeError& e) { return frame("error", now(), error_body(e)); }

json World::snapshot() { return frame("snapshot", now(), snapshot_body()); }

json World::snapshot_body() const {
  const auto& sc = sim_.scenario();
  json nodes = json::array();
  for (const auto& n : sim_.nodes()) nodes.push_back(node_json(n));

  const auto& erc = sim_.service(sc.erc);
  json discovered = json::array();
  for (const auto& [id, d] : erc.discovered()) {
    discovered.push_back({{"id", to_int(id)},
                          {"position", {{"x", d.position.x}, {"y", d.position.y}}},
                          {"residual_j", d.residual_j},
                          {"heard", d.heard}});
  }
  json resources = json::array();
  for (const auto& [key, r] : erc.resources().entries()) {
    resources.push_back({{"resource", message::to_string(r.kind)},
                         {"position", {{"x", r.position.x}, {"y", r.position.y}}},
                         {"text", r.text},
                         {"updated", r.updated}});
  }
  json pending = json::array();
  for (const auto& p : erc.pending()) {
    pending.push_back({{"pending", p.id},
                       {"from", to_int(p.from)},
                       {"message", sim::to_json(p.message)},
                       {"received", p.received}});
  }
  return {{"scenario", sc.name},
          {"routing", routing::to_string(sc.routing)},
          {"erc", to_int(sc.erc)},
          {"duration_s", sc.duration_s},
          {"finished", sim_.finished()},
          {"nodes", std::move(nodes)},
          {"discovered", std::move(discovered)},
          {"resources", std::move(resources)},
          {"pending", std::move(pending)}};
}

json World::metrics_frame() {
  const auto& log = sim_.log();
  json residual = json::array();
  double lowest = 0.0;
  std::size_t alive = 0;
  bool first = true;
  for (const auto& n : sim_.nodes()) {
    residual.push_back({{"id", to_int(n.id)}, {"residual_j", n.residual_j}, {"alive", n.alive}});
    lowest = first ? n.residual_j : std::min(lowest, n.residual_j);
    first = false;
    alive += n.alive ? 1 : 0;
  }
  std::uint64_t bits = 0;
  for (const auto& s : log.sessions) bits += s.delivered_bits;
  const double t = now();
  return frame("metrics_tick", t,
               {{"min_residual_j", lowest},
                {"alive", alive},
                {"sent", sim::total_sent(log)},
                {"delivered", sim::total_delivered(log)},
                {"throughput_bps", t > 0.0 ? static_cast<double>(bits) / t : 0.0},
                {"tx_frames", log.tx.size()},
                {"finished", sim_.finished()},
                {"residual", std::move(residual)}});
}

std::vector<json> World::drain_log() {
  struct Pending {
    double t;
    int order;
    json body;
    NodeId node;
    bool receive;
  };
  std::vector<Pending> items;
  const auto& log = sim_.log();
  for (; service_cursor_ < log.service.size(); ++service_cursor_) {
    const auto& e = log.service[service_cursor_];
    items.push_back({e.time, static_cast<int>(items.size()), service_event_json(e), e.node,
                     is_receive(e)});
  }
  for (; death_cursor_ < log.deaths.size(); ++death_cursor_) {
    const auto& d = log.deaths[death_cursor_];
    items.push_back({d.t, static_cast<int>(items.size()),
                     {{"event", "death"}, {"cause", d.cause}, {"residual_j", 0.0}}, d.node, false});
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Pending& a, const Pending& b) { return a.t < b.t; });
  std::vector<json> out;
  for (auto& i : items) {
    out.push_back(frame(i.receive ? "receive" : "node_event", i.t, std::move(i.body), i.node));
  }
  return out;
}

std::vector<json> World::advance_to(double t) {
  std::vector<json> out;
  auto append = [&](std::vector<json> frames) {
    for (auto& f : frames) out.push_back(std::move(f));
  };
  while (!sim_.finished() && next_metrics_ <= t) {
    sim_.run_until(next_metrics_);
    append(drain_log());
    if (sim_.now() >= next_metrics_) {
      out.push_back(metrics_frame());
      next_metrics_ += 1.0;
    }
  }
  if (!sim_.finished()) {
    sim_.run_until(t);
    append(drain_log());
  }
  if (sim_.finished() && !final_metrics_sent_) {
    final_metrics_sent_ = true;
    out.push_back(metrics_frame());
  }
  return out;
}

Outbound World::handle(std::string_view text) {
  Outbound out;
  const auto parsed = parse_command(text, sim_.scenario());
  if (const auto* err = std::get_if<BridgeError>(&parsed)) {
    out.reply = error_frame(*err);
    return out;
  }
  const auto& cmd = std::get<ClientCommand>(parsed);
  if (cmd.op == "snapshot") {
    out.reply = snapshot();
    if (!cmd.id.is_null()) out.reply["id"] = cmd.id;
    return out;
  }
  auto converted = to_injection(cmd, sim_.scenario(), now());
  if (const auto* err = std::get_if<BridgeError>(&converted)) {
    out.reply = error_frame(*err);
    return out;
  }
  auto inj = std::get<sim::Injection>(converted);
  if (sim_.finished()) {
    out.reply = error_frame({code::kFinished, "the emulated run has ended", cmd.op, cmd.id});
    return out;
  }
  if (const auto status = sim_.node(inj.node); status && !status->alive) {
    out.reply = error_frame({code::kDeadNode, "node " + sim_.scenario().label_of(inj.node) +
                                                  " is dead",
                             cmd.op, cmd.id});
    return out;
  }
  const int index = static_cast<int>(base_.injections.size() + recorded_.size());
  const sim::OpResult res = sim_.apply(inj, index);
  if (!res.ok) {
    out.reply = error_frame({code::kRejected, res.error, cmd.op, cmd.id});
    out.broadcast = drain_log();
    return out;
  }
  recorded_.push_back(inj);
  json originated = json::array();
  for (const auto& o : res.originated) originated.push_back(originate_json(o));
  out.reply = frame(cmd.op.c_str(), now(), {{"ok", true}, {"originated", std::move(originated)}},
                    inj.node);
  if (!cmd.id.is_null()) out.reply["id"] = cmd.id;
  out.broadcast = drain_log();
  return out;
}

sim::Scenario World::replay_scenario() const {
  sim::Scenario sc = base_;
  sc.injections.insert(sc.injections.end(), recorded_.begin(), recorded_.end());
  sc.duration_s = std::max(now(), 1e-9);
  return sc;
}

}  // namespace helper::emu
