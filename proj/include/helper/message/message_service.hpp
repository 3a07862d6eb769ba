#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "helper/core/packet.hpp"

namespace helper::message {

enum class ResourceKind : std::uint8_t { kWater, kFood, kGas, kMedicine, kInternet, kElectricity };

std::string_view to_string(ResourceKind k);
std::optional<ResourceKind> parse_resource_kind(std::string_view name);

inline constexpr std::size_t kMaxTextBytes = 200;

/// App-facing message (the "HELPER Send/Receive" side of the stack).
struct AppMessage {
  AppType type = AppType::kGeneric;
  std::string origin_user;
  std::string text;
  std::optional<GeoPosition> location;
  std::optional<ResourceKind> resource;
  /// Residual energy reported in HELPER_UPDATE replies.
  std::optional<double> energy_j;

  friend bool operator==(const AppMessage&, const AppMessage&) = default;
};

class MessageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws MessageError on text longer than 200 bytes or a RESOURCE without
/// kind/location.
void validate(const AppMessage& m);

/// Compact payload encoding; positions and energy travel as float32.
std::vector<std::uint8_t> encode(const AppMessage& m);
std::optional<AppMessage> decode(AppType type, std::span<const std::uint8_t> payload);

/// Reserved payload of the network-setup flood that announces the ERC.
const std::vector<std::uint8_t>& setup_payload();
bool is_setup(const HelperPacket& p);

/// Per-node sequence numbers shared by every packet the node originates.
class SequenceCounter {
 public:
  std::uint16_t next() { return value_++; }

 private:
  std::uint16_t value_ = 0;
};

struct ResourceEntry {
  ResourceKind kind = ResourceKind::kWater;
  GeoPosition position;
  std::string text;
  double updated = 0.0;
};

/// Last-writer-wins map keyed by kind and position quantized to 10 m.
class ResourceMap {
 public:
  using Key = std::tuple<ResourceKind, std::int64_t, std::int64_t>;

  static Key key_for(ResourceKind kind, const GeoPosition& pos);
  void apply(const ResourceEntry& e);
  const std::map<Key, ResourceEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<Key, ResourceEntry> entries_;
};

struct PendingResource {
  std::uint32_t id = 0;
  NodeId from{};
  AppMessage message;
  double received = 0.0;
};

struct DiscoveredNode {
  NodeId node{};
  GeoPosition position;
  double residual_j = 0.0;
  double heard = 0.0;
};

enum class Verdict { kApprove, kReject };

/// Something the service layer handed to its local users.
struct ServiceEvent {
  enum class Kind {
    kReceived,          // any app message delivered to this node's users
    kLocal,             // LOCAL chat looped back without touching the radio
    kDistress,          // ERC got a HELP unicast
    kDiscovered,        // ERC got a HELPER_UPDATE
    kPendingResource,   // ERC queued a RESOURCE for operator review
    kResourceApproved,  // operator approved; flood issued
    kResourceRejected,  // operator rejected; nothing sent
    kResourceMapUpdated,
  };
  Kind kind = Kind::kReceived;
  double time = 0.0;
  NodeId node{};
  NodeId origin{};
  std::uint16_t seq = 0;
  AppMessage message;
  std::uint32_t pending_id = 0;
};

std::string_view to_string(ServiceEvent::Kind k);

/// Service layer of one HELPER: turns app messages into packets and reacts to
/// delivered packets. Packets it returns still need to be handed to the
/// network layer by the caller.
class ServiceLayer {
 public:
  ServiceLayer(NodeId self, GeoPosition position, bool is_erc);

  NodeId self() const { return self_; }
  bool is_erc() const { return is_erc_; }
  std::optional<NodeId> erc() const { return erc_; }

  /// User-originated message at this node.
  /// HELP: unicast to the ERC (HTL_MAX) then a vicinity broadcast (HTL 2).
  /// NEIGHBORHOOD: one broadcast with HTL 1. RESOURCE: unicast to the ERC.
  /// LOCAL: no packets; looped back to local users. Messages bound for the
  /// ERC wait until the ERC is known.
  std::vector<HelperPacket> dispatch(const AppMessage& m, SequenceCounter& seq, double now);

  /// ERC-only floods (ND, ALERT, RESOURCE_UPDATE) with HTL_MAX.
  std::vector<HelperPacket> erc_dispatch(const AppMessage& m, SequenceCounter& seq, double now);

  /// Flood that tells every node which node is the ERC.
  HelperPacket setup_flood(SequenceCounter& seq, double now);

  /// Reply to a network-discovery flood.
  HelperPacket on_nd(const GeoPosition& position, double residual_j, SequenceCounter& seq,
                     double now);

  /// Operator decision on a queued RESOURCE.
  std::vector<HelperPacket> approve_resource(std::uint32_t pending_id, Verdict verdict,
                                             SequenceCounter& seq, double now);

  /// Handles a packet the network layer delivered up. Returns any replies
  /// (HELPER_UPDATE for ND, flushed ERC-bound messages once the ERC is known).
  std::vector<HelperPacket> on_deliver(const HelperPacket& p, const GeoPosition& position,
                                       double residual_j, SequenceCounter& seq, double now);

  const ResourceMap& resources() const { return resources_; }
  const std::vector<PendingResource>& pending() const { return pending_; }
  const std::map<NodeId, DiscoveredNode>& discovered() const { return discovered_; }
  std::size_t awaiting_erc() const { return awaiting_erc_.size(); }

  std::vector<ServiceEvent> take_events();

 private:
  HelperPacket make_packet(AppType type, NodeId dst, std::uint8_t htl, const AppMessage& m,
                           SequenceCounter& seq, double now) const;
  std::vector<HelperPacket> to_erc(const AppMessage& m, SequenceCounter& seq, double now);
  std::vector<HelperPacket> flush_awaiting(SequenceCounter& seq, double now);
  void emit(ServiceEvent::Kind kind, double now, NodeId origin, std::uint16_t seq,
            const AppMessage& m, std::uint32_t pending_id = 0);

  NodeId self_;
  GeoPosition position_;
  bool is_erc_;
  std::optional<NodeId> erc_;
  std::vector<AppMessage> awaiting_erc_;
  ResourceMap resources_;
  std::vector<PendingResource> pending_;
  std::uint32_t next_pending_ = 1;
  std::map<NodeId, DiscoveredNode> discovered_;
  std::vector<ServiceEvent> events_;
};

}  // namespace helper::message
