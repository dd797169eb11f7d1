#pragma once

#include <cmath>
#include <vector>

#include "mpo/rng.hpp"

namespace mpo {

// Position in the shared virtual coordinate space. The origin node sits at
// (0, 0); all coordinates are origin-relative.
struct Coordinate {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Coordinate& a, const Coordinate& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// n coordinates drawn uniformly from the square [-spread, spread]^2.
std::vector<Coordinate> place_nodes(int n, RngStream& rng, double spread);

// Categorical region label standing in for a shared IP prefix: the index of
// the tile containing c when [-spread, spread]^2 is cut into cells x cells
// equal tiles. Coordinates outside the square clamp to the border tiles.
int region_label(const Coordinate& c, double spread, int cells);

}  // namespace mpo
