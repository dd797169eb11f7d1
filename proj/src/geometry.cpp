#include "mpo/geometry.hpp"

#include <algorithm>

namespace mpo {

std::vector<Coordinate> place_nodes(int n, RngStream& rng, double spread) {
  std::vector<Coordinate> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Coordinate c;
    c.x = rng.uniform_real(-spread, spread);
    c.y = rng.uniform_real(-spread, spread);
    out.push_back(c);
  }
  return out;
}

int region_label(const Coordinate& c, double spread, int cells) {
  auto tile = [&](double v) {
    int t = static_cast<int>(std::floor((v + spread) / (2.0 * spread) *
                                        static_cast<double>(cells)));
    return std::clamp(t, 0, cells - 1);
  };
  return tile(c.y) * cells + tile(c.x);
}

}  // namespace mpo
