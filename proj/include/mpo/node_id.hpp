#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace mpo {

// Structured 128-bit node identifier: four 32-bit fields packed so the
// numeric order of the packed value equals the lexicographic order of
// (layer, level, as_index, node_index).
struct NodeId {
  std::uint32_t layer = 0;
  std::uint32_t level = 0;
  std::uint32_t as_index = 0;
  std::uint32_t node_index = 0;

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

using Packed128 = unsigned __int128;

constexpr Packed128 encode_id(const NodeId& id) {
  return (static_cast<Packed128>(id.layer) << 96) |
         (static_cast<Packed128>(id.level) << 64) |
         (static_cast<Packed128>(id.as_index) << 32) |
         static_cast<Packed128>(id.node_index);
}

// Range-checked encode; throws std::out_of_range when a field does not fit
// its 32-bit quarter.
Packed128 encode_id_checked(std::uint64_t layer, std::uint64_t level,
                            std::uint64_t as_index, std::uint64_t node_index);

constexpr NodeId decode_id(Packed128 p) {
  NodeId id;
  id.layer = static_cast<std::uint32_t>(p >> 96);
  id.level = static_cast<std::uint32_t>(p >> 64);
  id.as_index = static_cast<std::uint32_t>(p >> 32);
  id.node_index = static_cast<std::uint32_t>(p);
  return id;
}

// Dotted rendering "layer.level.as_index.node_index".
std::string to_string(const NodeId& id);

}  // namespace mpo
