#include "helper/core/neighbor_table.hpp"

namespace helper {

NeighborEntry* NeighborTable::upsert(const NeighborEntry& e) {
  if (e.node == owner_ || e.node == kBroadcast) return nullptr;
  auto& row = rows_[e.node];
  row = e;
  return &row;
}

NeighborEntry* NeighborTable::find(NodeId id) {
  auto it = rows_.find(id);
  return it == rows_.end() ? nullptr : &it->second;
}

const NeighborEntry* NeighborTable::find(NodeId id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? nullptr : &it->second;
}

std::vector<NeighborEntry> NeighborTable::fresh(double now) const {
  std::vector<NeighborEntry> out;
  out.reserve(rows_.size());
  for (const auto& [id, row] : rows_) {
    if (now - row.last_heard <= ttl_) out.push_back(row);
  }
  return out;
}

void NeighborTable::expire(double now) {
  std::erase_if(rows_, [&](const auto& kv) { return now - kv.second.last_heard > ttl_; });
}

}  // namespace helper
