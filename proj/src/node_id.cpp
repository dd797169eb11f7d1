#include "mpo/node_id.hpp"

#include <limits>
#include <stdexcept>

namespace mpo {

Packed128 encode_id_checked(std::uint64_t layer, std::uint64_t level,
                            std::uint64_t as_index, std::uint64_t node_index) {
  constexpr std::uint64_t cap = std::numeric_limits<std::uint32_t>::max();
  if (layer > cap || level > cap || as_index > cap || node_index > cap)
    throw std::out_of_range("encode_id: field exceeds its 32-bit quarter");
  return encode_id(NodeId{static_cast<std::uint32_t>(layer),
                          static_cast<std::uint32_t>(level),
                          static_cast<std::uint32_t>(as_index),
                          static_cast<std::uint32_t>(node_index)});
}

std::string to_string(const NodeId& id) {
  return std::to_string(id.layer) + "." + std::to_string(id.level) + "." +
         std::to_string(id.as_index) + "." + std::to_string(id.node_index);
}

}  // namespace mpo
