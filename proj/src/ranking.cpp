#include "mpo/ranking.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace mpo {

double query_similarity(const QueryVector& a, const QueryVector& b) {
  if (a.bits == 0 || b.bits == 0)
    throw std::invalid_argument("query_similarity: zero requirement vector");
  const int both = std::popcount(a.bits & b.bits);
  const int na = std::popcount(a.bits);
  const int nb = std::popcount(b.bits);
  return static_cast<double>(both) /
         std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
}

QueryVector random_query_vector(int universe, double bit_density,
                                RngStream& rng) {
  if (universe < 1 || universe > 64)
    throw std::invalid_argument("random_query_vector: universe must be 1..64");
  QueryVector q;
  q.universe = universe;
  for (int i = 0; i < universe; ++i)
    if (rng.chance(bit_density)) q.bits |= (1ull << i);
  if (q.bits == 0)
    q.bits |= (1ull << rng.below(static_cast<std::uint64_t>(universe)));
  return q;
}

double best_match_similarity(const QueryVector& q,
                             const std::vector<QueryVector>& pool) {
  double best = 0.0;
  for (const auto& v : pool) best = std::max(best, query_similarity(q, v));
  return best;
}

double evaluate_pair(const PairHistory& h, double alpha_sim) {
  if (h.answered_similarities.empty() || h.n_exchanges == 0) return 0.0;
  if (!(h.exchange_time > 0.0))
    throw std::invalid_argument("evaluate_pair: exchanges with zero time");
  double s = 0.0;
  for (double q : h.answered_similarities) s += std::pow(q, alpha_sim);
  return s * static_cast<double>(h.n_exchanges) / h.exchange_time;
}

void ExchangeHistory::record(int from, int to, double qsim, double duration) {
  if (!(qsim >= 0.0 && qsim <= 1.0))
    throw std::invalid_argument("record: qsim must be in [0, 1]");
  if (!(duration > 0.0))
    throw std::invalid_argument("record: duration must be positive");
  PairHistory& h = pairs_[{from, to}];
  h.answered_similarities.push_back(qsim);
  h.n_exchanges += 1;
  h.exchange_time += duration;
}

const PairHistory* ExchangeHistory::find(int from, int to) const {
  auto it = pairs_.find({from, to});
  return it == pairs_.end() ? nullptr : &it->second;
}

double ExchangeHistory::evaluate(int from, int to, double alpha_sim) const {
  const PairHistory* h = find(from, to);
  return h == nullptr ? 0.0 : evaluate_pair(*h, alpha_sim);
}

double weighted_mean(const std::vector<double>& values,
                     const std::vector<double>& weights) {
  if (values.size() != weights.size())
    throw std::invalid_argument("weighted_mean: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += values[i] * weights[i];
    den += weights[i];
  }
  return den == 0.0 ? 0.0 : num / den;
}

double source_rank(int target, const std::vector<int>& evaluators,
                   const ExchangeHistory& hist,
                   const std::vector<Coordinate>& coords, double alpha_sim) {
  std::vector<double> es, ws;
  for (int ev : evaluators) {
    if (ev == target) continue;
    es.push_back(hist.evaluate(ev, target, alpha_sim));
    ws.push_back(distance_weight(
        distance(coords[static_cast<std::size_t>(ev)],
                 coords[static_cast<std::size_t>(target)])));
  }
  return weighted_mean(es, ws);
}

double min_ef(const std::vector<double>& member_srs, double load_factor) {
  if (member_srs.empty()) return 0.0;
  double mean = 0.0;
  for (double s : member_srs) mean += s;
  mean /= static_cast<double>(member_srs.size());
  return load_factor * mean;
}

double weighted_role_distance(
    const std::array<double, 3>& weights,
    const std::array<std::optional<double>, 3>& dists) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!dists[i].has_value()) continue;  // vacant role: drop from both sums
    num += weights[i] * *dists[i];
    den += weights[i];
  }
  if (den == 0.0)
    throw std::invalid_argument(
        "weighted_role_distance: no role with positive weight present");
  return num / den;
}

}  // namespace mpo
