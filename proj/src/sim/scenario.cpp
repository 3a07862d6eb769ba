#include "helper/sim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace helper::sim {

using nlohmann::json;

std::string_view to_string(Injection::Op op) {
  switch (op) {
    case Injection::Op::kSend: return "send";
    case Injection::Op::kNd: return "nd";
    case Injection::Op::kAlert: return "alert";
    case Injection::Op::kApprove: return "approve";
    case Injection::Op::kDrain: return "drain";
  }
  return "?";
}

const NodeSpec* Scenario::find(NodeId id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::optional<NodeId> Scenario::by_label(std::string_view label) const {
  for (const auto& n : nodes) {
    if (n.label == label) return n.id;
  }
  return std::nullopt;
}

std::string Scenario::label_of(NodeId id) const {
  const auto* n = find(id);
  return n && !n->label.empty() ? n->label : to_string(id);
}

void validate(const Scenario& sc) {
  if (sc.nodes.empty()) throw ScenarioError("scenario has no nodes");
  std::set<NodeId> ids;
  std::set<std::string> labels;
  for (const auto& n : sc.nodes) {
    if (n.id == kBroadcast) throw ScenarioError("node id 65535 is reserved for broadcast");
    if (!ids.insert(n.id).second) throw ScenarioError("duplicate node id " + to_string(n.id));
    if (!n.label.empty() && !labels.insert(n.label).second) {
      throw ScenarioError("duplicate node label " + n.label);
    }
    if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y)) {
      throw ScenarioError("node " + to_string(n.id) + " has a non-finite position");
    }
    if (!(n.initial_energy_j > 0.0) || !std::isfinite(n.initial_energy_j)) {
      throw ScenarioError("node " + to_string(n.id) + " needs positive initial energy");
    }
  }
  if (!ids.contains(sc.erc)) throw ScenarioError("erc " + to_string(sc.erc) + " is not a node");
  if (!(sc.link.range_m > 0.0)) throw ScenarioError("link.range_m must be positive");
  if (sc.link.strategies.empty()) throw ScenarioError("link.strategies is empty");
  for (std::size_t i = 0; i < sc.link.strategies.size(); ++i) {
    const auto& s = sc.link.strategies[i];
    if (!(s.bitrate_bps > 0.0) || !(s.tx_power_w > 0.0)) {
      throw ScenarioError("strategy " + std::to_string(i) + " needs positive bitrate and power");
    }
    const double ber = i < sc.link.ber.size() ? sc.link.ber[i] : 0.0;
    if (!(ber >= 0.0 && ber < 1.0)) throw ScenarioError("strategy ber must be in [0, 1)");
  }
  if (!(sc.link.capacity_bps > 0.0)) throw ScenarioError("link.capacity_bps must be positive");
  if (!(sc.duration_s > 0.0)) throw ScenarioError("duration_s must be positive");
  for (std::size_t i = 0; i < sc.sessions.size(); ++i) {
    const auto& s = sc.sessions[i];
    const std::string where = "session " + std::to_string(i);
    if (!ids.contains(s.src) || !ids.contains(s.dst)) {
      throw ScenarioError(where + " references an unknown node");
    }
    if (s.src == s.dst) throw ScenarioError(where + " has src == dst");
    if (!(s.interval_s > 0.0)) throw ScenarioError(where + " needs a positive interval");
    if (s.payload_bytes > kMaxPayloadBytes) {
      throw ScenarioError(where + " payload exceeds " + std::to_string(kMaxPayloadBytes) + " bytes");
    }
    if (s.start_s < 0.0) throw ScenarioError(where + " starts before t=0");
  }
  for (std::size_t i = 0; i < sc.injections.size(); ++i) {
    const auto& inj = sc.injections[i];
    const std::string where = "injection " + std::to_string(i);
    if (!(inj.at >= 0.0)) throw ScenarioError(where + " has a negative time");
    if (!ids.contains(inj.node)) throw ScenarioError(where + " references an unknown node");
    if (inj.op == Injection::Op::kSend) {
      try {
        message::validate(inj.message);
      } catch (const message::MessageError& e) {
        throw ScenarioError(where + ": " + e.what());
      }
    }
  }
}

namespace {

NodeId node_ref(const json& j, const Scenario& sc, const std::string& what) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    auto v = j.get<long long>();
    if (v < 0 || v >= 0xFFFF) throw ScenarioError(what + ": node id out of range");
    return node_id(static_cast<unsigned>(v));
  }
  if (j.is_string()) {
    if (auto id = sc.by_label(j.get<std::string>())) return *id;
    throw ScenarioError(what + ": unknown node label '" + j.get<std::string>() + "'");
  }
  throw ScenarioError(what + ": node reference must be an id or a label");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

}  // namespace

message::AppMessage app_message_from_json(const json& j) {
  if (!j.is_object()) throw ScenarioError("message must be an object");
  message::AppMessage m;
  auto type = parse_app_type(get_or<std::string>(j, "type", "GENERIC"));
  if (!type) throw ScenarioError("unknown message type " + j.value("type", std::string{}));
  m.type = *type;
  m.origin_user = get_or<std::string>(j, "user", "");
  m.text = get_or<std::string>(j, "text", "");
  if (auto it = j.find("location"); it != j.end() && it->is_object()) {
    m.location = GeoPosition{it->at("x").get<double>(), it->at("y").get<double>()};
  }
  if (auto it = j.find("resource"); it != j.end() && it->is_string()) {
    m.resource = message::parse_resource_kind(it->get<std::string>());
    if (!m.resource) throw ScenarioError("unknown resource kind " + it->get<std::string>());
  }
  if (auto it = j.find("energy_j"); it != j.end() && it->is_number()) m.energy_j = it->get<double>();
  return m;
}

json to_json(const message::AppMessage& m) {
  json j{{"type", to_string(m.type)}, {"user", m.origin_user}, {"text", m.text}};
  if (m.location) j["location"] = {{"x", m.location->x}, {"y", m.location->y}};
  if (m.resource) j["resource"] = message::to_string(*m.resource);
  if (m.energy_j) j["energy_j"] = *m.energy_j;
  return j;
}

Scenario scenario_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");
    if (doc.value("schema", 0) != 1) throw ScenarioError("unsupported schema (expected \"schema\": 1)");
    Scenario sc;
    sc.name = get_or<std::string>(doc, "name", "scenario");
    for (const auto& n : doc.at("nodes")) {
      NodeSpec spec;
      spec.id = node_id(n.at("id").get<unsigned>());
      spec.label = get_or<std::string>(n, "label", "");
      spec.position = {n.at("x").get<double>(), n.at("y").get<double>()};
      if (n.contains("lat")) spec.position.lat = n.at("lat").get<double>();
      if (n.contains("lon")) spec.position.lon = n.at("lon").get<double>();
      spec.initial_energy_j = get_or<double>(n, "initial_energy_j", 25.0);
      sc.nodes.push_back(spec);
    }
    sc.erc = node_ref(doc.at("erc"), sc, "erc");

    if (auto it = doc.find("link"); it != doc.end()) {
      const auto& l = *it;
      sc.link.range_m = get_or<double>(l, "range_m", sc.link.range_m);
      sc.link.capacity_bps = get_or<double>(l, "capacity_bps", sc.link.capacity_bps);
      if (auto s = l.find("strategies"); s != l.end()) {
        sc.link.strategies.clear();
        sc.link.ber.clear();
        for (const auto& e : *s) {
          sc.link.strategies.push_back({e.at("bitrate_bps").get<double>(), e.at("tx_power_w").get<double>()});
          sc.link.ber.push_back(get_or<double>(e, "ber", 0.0));
        }
      }
    }
    auto algo = routing::parse_algorithm(get_or<std::string>(doc, "routing", "seek"));
    if (!algo) throw ScenarioError("routing must be \"seek\" or \"greedy\"");
    sc.routing = *algo;

    if (auto it = doc.find("sessions"); it != doc.end()) {
      for (const auto& s : *it) {
        Session ses;
        ses.src = node_ref(s.at("src"), sc, "session src");
        ses.dst = node_ref(s.at("dst"), sc, "session dst");
        ses.payload_bytes = get_or<std::size_t>(s, "payload_bytes", 200);
        ses.interval_s = get_or<double>(s, "interval_s", 0.1);
        ses.start_s = get_or<double>(s, "start_s", 0.0);
        if (s.contains("count")) ses.count = s.at("count").get<std::size_t>();
        if (s.contains("duration_s")) ses.duration_s = s.at("duration_s").get<double>();
        sc.sessions.push_back(ses);
      }
    }
    if (auto it = doc.find("injections"); it != doc.end()) {
      for (const auto& e : *it) {
        Injection inj;
        inj.at = e.at("at").get<double>();
        const auto op = e.at("op").get<std::string>();
        inj.node = e.contains("node") ? node_ref(e.at("node"), sc, "injection node") : sc.erc;
        if (op == "send") {
          inj.op = Injection::Op::kSend;
          inj.message = app_message_from_json(e.at("message"));
        } else if (op == "nd") {
          inj.op = Injection::Op::kNd;
        } else if (op == "alert") {
          inj.op = Injection::Op::kAlert;
          inj.message.type = AppType::kAlert;
          inj.message.text = get_or<std::string>(e, "text", "");
        } else if (op == "approve") {
          inj.op = Injection::Op::kApprove;
          inj.pending_id = e.at("pending").get<std::uint32_t>();
          const auto v = get_or<std::string>(e, "verdict", "approve");
          if (v != "approve" && v != "reject") throw ScenarioError("verdict must be approve or reject");
          inj.verdict = v == "approve" ? message::Verdict::kApprove : message::Verdict::kReject;
        } else if (op == "drain") {
          inj.op = Injection::Op::kDrain;
        } else {
          throw ScenarioError("unknown injection op " + op);
        }
        sc.injections.push_back(std::move(inj));
      }
    }
    sc.duration_s = get_or<double>(doc, "duration_s", sc.duration_s);
    sc.rng_seed = get_or<std::uint64_t>(doc, "rng_seed", sc.rng_seed);
    sc.setup_flood = get_or<bool>(doc, "setup_flood", true);
    sc.stop_on_first_death = get_or<bool>(doc, "stop_on_first_death", false);
    if (auto it = doc.find("mac"); it != doc.end()) {
      const auto& m = *it;
      sc.mac.max_retries = get_or<int>(m, "max_retries", sc.mac.max_retries);
      sc.mac.w_min = get_or<double>(m, "w_min", sc.mac.w_min);
      sc.mac.w_max = get_or<double>(m, "w_max", sc.mac.w_max);
      sc.mac.beacon_period = get_or<double>(m, "beacon_period", sc.mac.beacon_period);
      sc.mac.goodput_alpha = get_or<double>(m, "goodput_alpha", sc.mac.goodput_alpha);
      if (sc.mac.max_retries < 0 || !(sc.mac.w_min >= 0.0) || !(sc.mac.w_max >= sc.mac.w_min) ||
          !(sc.mac.beacon_period > 0.0)) {
        throw ScenarioError("invalid mac settings");
      }
    }
    sc.mac = mac_config_for(sc.link, sc.mac);
    validate(sc);
    return sc;
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return scenario_from_json(doc);
}

json to_json(const Scenario& sc) {
  json doc;
  doc["schema"] = 1;
  doc["name"] = sc.name;
  doc["erc"] = to_int(sc.erc);
  for (const auto& n : sc.nodes) {
    json j{{"id", to_int(n.id)}, {"x", n.position.x}, {"y", n.position.y},
           {"initial_energy_j", n.initial_energy_j}};
    if (!n.label.empty()) j["label"] = n.label;
    if (n.position.lat) j["lat"] = *n.position.lat;
    if (n.position.lon) j["lon"] = *n.position.lon;
    doc["nodes"].push_back(j);
  }
  json link{{"range_m", sc.link.range_m}, {"capacity_bps", sc.link.capacity_bps}};
  for (std::size_t i = 0; i < sc.link.strategies.size(); ++i) {
    link["strategies"].push_back({{"bitrate_bps", sc.link.strategies[i].bitrate_bps},
                                  {"tx_power_w", sc.link.strategies[i].tx_power_w},
                                  {"ber", i < sc.link.ber.size() ? sc.link.ber[i] : 0.0}});
  }
  doc["link"] = link;
  doc["routing"] = routing::to_string(sc.routing);
  doc["sessions"] = json::array();
  for (const auto& s : sc.sessions) {
    json j{{"src", to_int(s.src)}, {"dst", to_int(s.dst)}, {"payload_bytes", s.payload_bytes},
           {"interval_s", s.interval_s}, {"start_s", s.start_s}};
    if (s.count) j["count"] = *s.count;
    if (s.duration_s) j["duration_s"] = *s.duration_s;
    doc["sessions"].push_back(j);
  }
  doc["injections"] = json::array();
  for (const auto& inj : sc.injections) {
    json j{{"at", inj.at}, {"op", to_string(inj.op)}, {"node", to_int(inj.node)}};
    switch (inj.op) {
      case Injection::Op::kSend: j["message"] = to_json(inj.message); break;
      case Injection::Op::kAlert: j["text"] = inj.message.text; break;
      case Injection::Op::kApprove:
        j["pending"] = inj.pending_id;
        j["verdict"] = inj.verdict == message::Verdict::kApprove ? "approve" : "reject";
        break;
      default: break;
    }
    doc["injections"].push_back(j);
  }
  doc["duration_s"] = sc.duration_s;
  doc["rng_seed"] = sc.rng_seed;
  doc["setup_flood"] = sc.setup_flood;
  doc["stop_on_first_death"] = sc.stop_on_first_death;
  doc["mac"] = {{"max_retries", sc.mac.max_retries}, {"w_min", sc.mac.w_min},
                {"w_max", sc.mac.w_max}, {"beacon_period", sc.mac.beacon_period},
                {"goodput_alpha", sc.mac.goodput_alpha}};
  return doc;
}

mac::MacConfig mac_config_for(const radio::LinkParams& link, mac::MacConfig base) {
  base.cad_latency = link.cad_latency();
  if (!link.strategies.empty()) base.beacon_strategy = link.strategies.front();
  return base;
}

namespace {

// A and C hold the west column, E and F the east one, B and D the middle:
// every pair across the outer columns is out of range, so A->F, C->E and
// F->A need a relay and only B->C is a direct link.
constexpr GeoPosition kGridSlots[6] = {{0.0, 0.0},       {1000.0, 0.0}, {0.0, 1000.0},
                                       {1000.0, 1000.0}, {2000.0, 0.0}, {2000.0, 1000.0}};

}  // namespace

Scenario canonical_grid() {
  Scenario sc;
  sc.name = "canonical-grid";
  const char* labels = "ABCDEF";
  for (unsigned i = 0; i < 6; ++i) {
    NodeSpec n;
    n.id = node_id(i);
    n.label = std::string(1, labels[i]);
    n.position = kGridSlots[i];
    n.initial_energy_j = 25.0;
    sc.nodes.push_back(n);
  }
  sc.erc = node_id(5);
  sc.link.range_m = 1500.0;
  sc.link.strategies = {TransmissionStrategy{5000.0, 0.1}};
  sc.link.ber = {0.0};
  sc.link.capacity_bps = 5000.0;
  sc.duration_s = 7200.0;
  sc.mac = mac_config_for(sc.link);
  return sc;
}

std::vector<Session> canonical_sessions(std::size_t payload_bytes, double interval_s) {
  auto s = [&](unsigned a, unsigned b) {
    Session ses;
    ses.src = node_id(a);
    ses.dst = node_id(b);
    ses.payload_bytes = payload_bytes;
    ses.interval_s = interval_s;
    return ses;
  };
  // A->F, B->C, C->E, F->A
  return {s(0, 5), s(1, 2), s(2, 4), s(5, 0)};
}

}  // namespace helper::sim
