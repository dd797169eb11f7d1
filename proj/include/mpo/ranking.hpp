#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mpo/geometry.hpp"
#include "mpo/rng.hpp"

namespace mpo {

// A query's requirement set over a fixed universe of at most 64 labels,
// packed as a bitmask (bit i = requirement i present).
struct QueryVector {
  std::uint64_t bits = 0;
  int universe = 16;  // |L|
};

// Cosine similarity of two 0/1 requirement vectors, in [0, 1].
// Throws std::invalid_argument on a zero vector (undefined angle).
double query_similarity(const QueryVector& a, const QueryVector& b);

// Random nonzero requirement vector: each label present with probability
// bit_density, with one uniformly random label forced when none landed.
QueryVector random_query_vector(int universe, double bit_density,
                                RngStream& rng);

// Highest similarity between q and any vector in pool; 0 for an empty pool.
double best_match_similarity(const QueryVector& q,
                             const std::vector<QueryVector>& pool);

// Accumulators for one ordered (evaluator, answerer) pair.
struct PairHistory {
  std::vector<double> answered_similarities;  // Qsim of each answered query
  long long n_exchanges = 0;                  // communication count N
  double exchange_time = 0.0;                 // total exchange time T
};

// Evaluation of an answerer from one evaluator's accumulators:
// sum(Qsim^alpha_sim) * N / T; empty history evaluates to 0.
double evaluate_pair(const PairHistory& h, double alpha_sim);

// Per-ordered-pair exchange bookkeeping for a whole trial.
class ExchangeHistory {
 public:
  // Append one answered query: qsim in [0,1], duration > 0.
  void record(int from, int to, double qsim, double duration);
  const PairHistory* find(int from, int to) const;
  double evaluate(int from, int to, double alpha_sim) const;
  std::size_t pair_count() const { return pairs_.size(); }

 private:
  std::map<std::pair<int, int>, PairHistory> pairs_;
};

// Distance-discount weight: 1 / (1 + distance); bounded, positive, defined
// at zero distance.
inline double distance_weight(double dist) { return 1.0 / (1.0 + dist); }

// Weighted mean used by the rank aggregations; weights must be positive.
// Returns 0 for empty input.
double weighted_mean(const std::vector<double>& values,
                     const std::vector<double>& weights);

// Source rank of `target`: distance-discounted mean of the evaluators'
// evaluations. Evaluators equal to target are skipped; 0 with no evaluators.
double source_rank(int target, const std::vector<int>& evaluators,
                   const ExchangeHistory& hist,
                   const std::vector<Coordinate>& coords, double alpha_sim);

// Free-rider threshold: load_factor * mean(member source ranks); 0 for an
// empty member set.
double min_ef(const std::vector<double>& member_srs, double load_factor);

// A member rides free when it is not an information center and its source
// rank sits strictly below the threshold. Centers (the top-3 rank holders)
// are exempt: they are the service providers, never drop candidates.
inline bool is_free_rider(double sr, double threshold, bool is_ic) {
  return !is_ic && sr < threshold;
}

// Weighted mean of per-role distances with vacant roles dropped from both
// sums. Order of roles: {local, level, layer}; an empty optional marks a
// vacant role. Throws std::invalid_argument when every surviving weight is
// zero or every role is vacant.
double weighted_role_distance(const std::array<double, 3>& weights,
                              const std::array<std::optional<double>, 3>& dists);

}  // namespace mpo
