#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpo/catalog.hpp"
#include "mpo/graph.hpp"
#include "mpo/rng.hpp"

namespace mpo {

enum class Algorithm { flood_repeated, flood_unrepeated, random_walk };

const char* algorithm_name(Algorithm a);
bool parse_algorithm(const std::string& s, Algorithm& out);

struct SearchRequest {
  int source = 0;
  int target_file = 0;
  int ttl = 0;
  Algorithm algorithm = Algorithm::flood_unrepeated;
  int walks = 4;       // random walk only
  int stop_after = 1;  // halt once this many distinct answering nodes found
  bool allow_backtrack = false;  // random walk: permit returning to the
                                 // previous node even when alternatives exist
};

struct SearchResult {
  bool success = false;
  int hops_to_first_hit = -1;  // -1 when no hit
  long long messages_sent = 0;
  int results_found = 0;  // distinct answering nodes reached
  // (node, processing count) for every node that handled the query,
  // sorted by node id. The source's own issuance is not a disturbance.
  std::vector<std::pair<int, long long>> disturbed;
};

// Synchronous breadth-first flood. Every delivery costs one message and
// disturbs the receiver once. Repeated mode forwards each received copy to
// all neighbors except the arrival link; unrepeated mode suppresses
// deliveries to any node that has already received the query, and a node
// processes a given query at most once. Both modes stop expanding at the
// end of the first hop that satisfies stop_after, and neither forwards to a
// degree-1 neighbor whose whole answerable set the forwarder itself can
// answer (delivering there can produce no new route and no new result).
SearchResult flood(const Graph& g, const SearchRequest& req);

// `walks` independent walkers step synchronously; each step is one message
// and one disturbance. A walker picks a uniformly random neighbor,
// excluding the node it just came from unless that is the only neighbor
// (or allow_backtrack is set). Terminates on stop_after results or ttl.
SearchResult random_walk(const Graph& g, const SearchRequest& req,
                         RngStream& rng);

SearchResult run_search(const Graph& g, const SearchRequest& req,
                        RngStream& rng);

// Aggregates over a batch of queries.
struct MetricsSample {
  long long n_queries = 0;
  long long successes = 0;
  long long total_messages = 0;
  long long total_hops_success = 0;
  std::vector<long long> disturbance;  // per node id

  double success_rate() const {
    return n_queries == 0 ? 0.0
                          : static_cast<double>(successes) /
                                static_cast<double>(n_queries);
  }
  double mean_messages() const {
    return n_queries == 0 ? 0.0
                          : static_cast<double>(total_messages) /
                                static_cast<double>(n_queries);
  }
  double mean_hops() const {
    return successes == 0 ? 0.0
                          : static_cast<double>(total_hops_success) /
                                static_cast<double>(successes);
  }
  long long max_disturbance() const;
  long long total_disturbance() const;

  void add(const SearchResult& r);
  void merge(const MetricsSample& other);
};

// Runs n_queries searches with uniformly random sources and Zipf-sampled
// target files; `walks`/`stop_after` apply as in SearchRequest.
MetricsSample batch_search(const Graph& g, const FileCatalog& catalog,
                           int n_queries, int ttl, Algorithm algorithm,
                           RngStream& rng, int walks = 4, int stop_after = 1);

// One pre-sampled query: who asks, and for which file.
struct QuerySample {
  int source = 0;
  int target_file = 0;
};

// Draws n (source, file) pairs up front: sources uniform over `source_pool`
// (all graph nodes when the pool is null), files Zipf-sampled from the
// catalog. Pre-sampling lets several algorithms answer the exact same
// workload, and lets callers restrict sources to currently-live nodes.
std::vector<QuerySample> sample_queries(const Graph& g,
                                        const FileCatalog& catalog, int n,
                                        RngStream& rng,
                                        const std::vector<int>* source_pool =
                                            nullptr);

// Runs the given pre-sampled queries in order. `rng` only drives walker
// choices, so flooding results are independent of the stream's position.
MetricsSample batch_search(const Graph& g, const FileCatalog& catalog,
                           const std::vector<QuerySample>& queries, int ttl,
                           Algorithm algorithm, RngStream& rng, int walks = 4,
                           int stop_after = 1);

}  // namespace mpo
