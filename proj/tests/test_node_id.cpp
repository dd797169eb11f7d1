#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <stdexcept>
#include <tuple>

#include "doctest.h"
#include "mpo/node_id.hpp"
#include "mpo/rng.hpp"

using namespace mpo;

TEST_CASE("zero id packs to zero") {
  CHECK(encode_id(NodeId{0, 0, 0, 0}) == Packed128{0});
}

TEST_CASE("encode/decode round trip") {
  const NodeId id{1, 2, 3, 4};
  const NodeId back = decode_id(encode_id(id));
  CHECK_EQ(back.layer, 1u);
  CHECK_EQ(back.level, 2u);
  CHECK_EQ(back.as_index, 3u);
  CHECK_EQ(back.node_index, 4u);
  CHECK(back == id);

  RngStream rng(19);
  for (int i = 0; i < 1000; ++i) {
    NodeId r{static_cast<std::uint32_t>(rng.next_u64()),
             static_cast<std::uint32_t>(rng.next_u64()),
             static_cast<std::uint32_t>(rng.next_u64()),
             static_cast<std::uint32_t>(rng.next_u64())};
    REQUIRE(decode_id(encode_id(r)) == r);
  }
}

TEST_CASE("packed order equals field-tuple order") {
  CHECK(encode_id(NodeId{0, 0, 0, 1}) < encode_id(NodeId{0, 0, 1, 0}));
  CHECK(encode_id(NodeId{0, 0, 1, 0}) < encode_id(NodeId{0, 1, 0, 0}));
  CHECK(encode_id(NodeId{0, 1, 0, 0}) < encode_id(NodeId{1, 0, 0, 0}));

  RngStream rng(23);
  for (int i = 0; i < 2000; ++i) {
    NodeId a{static_cast<std::uint32_t>(rng.below(5)),
             static_cast<std::uint32_t>(rng.below(5)),
             static_cast<std::uint32_t>(rng.below(5)),
             static_cast<std::uint32_t>(rng.below(5))};
    NodeId b{static_cast<std::uint32_t>(rng.below(5)),
             static_cast<std::uint32_t>(rng.below(5)),
             static_cast<std::uint32_t>(rng.below(5)),
             static_cast<std::uint32_t>(rng.below(5))};
    const auto ta = std::make_tuple(a.layer, a.level, a.as_index, a.node_index);
    const auto tb = std::make_tuple(b.layer, b.level, b.as_index, b.node_index);
    REQUIRE_EQ(ta < tb, encode_id(a) < encode_id(b));
    REQUIRE_EQ(ta == tb, encode_id(a) == encode_id(b));
  }
}

TEST_CASE("checked encode rejects oversized fields") {
  CHECK_THROWS_AS(encode_id_checked(1ull << 32, 0, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(encode_id_checked(0, 0, 0, 1ull << 40), std::out_of_range);
  CHECK(encode_id_checked(1, 2, 3, 4) == encode_id(NodeId{1, 2, 3, 4}));
}

TEST_CASE("dotted rendering") {
  CHECK_EQ(to_string(NodeId{1, 2, 3, 4}), "1.2.3.4");
  CHECK_EQ(to_string(NodeId{0, 0, 0, 0}), "0.0.0.0");
}
