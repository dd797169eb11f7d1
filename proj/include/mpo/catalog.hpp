#pragma once

#include <vector>

#include "mpo/rng.hpp"

namespace mpo {

// Zipf file catalog: m distinct files ranked by popularity (index 0 = most
// popular), R stored copies spread over hosts, and the query-popularity
// distribution used to sample search targets.
struct FileCatalog {
  int m = 0;
  double alpha = 0.0;
  std::vector<double> query_weights;           // q_i, normalized to sum 1
  std::vector<int> replica_counts;             // r_i, sums to total_replicas
  int total_replicas = 0;                      // R
  std::vector<std::vector<int>> hosts_of_file; // file -> sorted distinct host ids
  std::vector<std::vector<int>> files_of_host; // host -> sorted file indexes
  std::vector<double> query_cdf;               // prefix sums of query_weights

  // File index drawn with probability q_i.
  int sample_query_file(RngStream& rng) const;

  bool node_hosts(int node, int file) const;
};

// q_i proportional to 1/(i+1)^alpha; r_i = max(1, round(R*q_i)) adjusted to
// sum to R exactly (surplus trimmed from the tail, deficit padded from the
// head, keeping r non-increasing in rank and every file at >= 1 copy).
// Copies of one file land on distinct uniformly-chosen hosts.
// Throws std::invalid_argument when m < 1, R < m, or num_hosts < 1.
FileCatalog build_catalog(int m, double alpha, int R, int num_hosts,
                          RngStream& rng);

}  // namespace mpo
