#pragma once

#include <map>
#include <vector>

#include "helper/core/types.hpp"

namespace helper {

/// One row of a node's neighbor table. Distance to a destination is derived
/// per packet from `position`, since each packet carries its own destination.
struct NeighborEntry {
  NodeId node{};
  GeoPosition position;
  std::uint32_t queue_backlog = 0;
  double residual_j = 0.0;
  double initial_j = 0.0;
  /// EWMA of measured goodput G_ij, bits/s.
  double goodput_bps = 0.0;
  /// Bitrate the probes were heard at; 0 when unknown.
  double probe_bitrate_bps = 0.0;
  double last_heard = 0.0;

  double dist_to(const GeoPosition& dest) const { return distance(position, dest); }
  double energy_ratio() const { return initial_j > 0.0 ? residual_j / initial_j : 0.0; }
  /// Fraction of probed bits that arrive intact.
  double delivery_ratio() const {
    return probe_bitrate_bps > 0.0 ? goodput_bps / probe_bitrate_bps : 1.0;
  }
  /// Goodput expected when sending at `bitrate_bps`.
  double goodput_at(double bitrate_bps) const {
    return probe_bitrate_bps > 0.0 ? delivery_ratio() * bitrate_bps : goodput_bps;
  }
};

class NeighborTable {
 public:
  explicit NeighborTable(NodeId owner, double ttl = kNeighborTtl) : owner_(owner), ttl_(ttl) {}

  NodeId owner() const { return owner_; }

  /// Inserts or overwrites the row for `e.node`. Rows for the owner are ignored.
  NeighborEntry* upsert(const NeighborEntry& e);

  NeighborEntry* find(NodeId id);
  const NeighborEntry* find(NodeId id) const;

  /// Rows heard within the TTL, ordered by NodeId.
  std::vector<NeighborEntry> fresh(double now) const;

  void expire(double now);
  std::size_t size() const { return rows_.size(); }

 private:
  NodeId owner_;
  double ttl_;
  std::map<NodeId, NeighborEntry> rows_;
};

}  // namespace helper
