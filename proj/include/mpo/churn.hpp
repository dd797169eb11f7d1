#pragma once

#include <vector>

#include "mpo/rng.hpp"

namespace mpo {

enum class ChurnMode { graceful, crash };

// A departure scenario: which live nodes leave, in what order, and how.
struct ChurnScenario {
  double leave_fraction = 0.0;
  ChurnMode mode = ChurnMode::graceful;
  std::vector<int> leave_order;  // round(fraction * N) distinct nodes
};

// Uniformly random subset of size round(fraction * nodes.size()), in random
// order. Throws std::invalid_argument when fraction is outside [0, 1].
ChurnScenario make_churn(const std::vector<int>& nodes, double fraction,
                         ChurnMode mode, RngStream& rng);

}  // namespace mpo
