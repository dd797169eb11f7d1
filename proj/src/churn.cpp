#include "mpo/churn.hpp"

#include <cmath>
#include <stdexcept>

namespace mpo {

ChurnScenario make_churn(const std::vector<int>& nodes, double fraction,
                         ChurnMode mode, RngStream& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("churn: fraction must be in [0, 1]");

  ChurnScenario sc;
  sc.leave_fraction = fraction;
  sc.mode = mode;

  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(nodes.size())));
  std::vector<int> order = nodes;
  rng.shuffle(order);
  order.resize(count);
  sc.leave_order = std::move(order);
  return sc;
}

}  // namespace mpo
