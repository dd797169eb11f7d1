#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mpo/rng.hpp"

namespace mpo {

// Simple undirected graph over nodes 0..n-1 with per-node content metadata
// for the search engines: `hosted` is what a node actually stores;
// `answerable` is what it can resolve a query for (hosted plus any content
// it indexes on behalf of others). For plain topologies the two coincide.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n);

  int node_count() const { return static_cast<int>(adj_.size()); }
  long long edge_count() const { return edges_; }

  // Ignores self-loops and duplicate edges; returns true when added.
  bool add_edge(int a, int b);
  bool has_edge(int a, int b) const;
  bool remove_edge(int a, int b);
  const std::vector<int>& neighbors(int v) const {
    return adj_[static_cast<std::size_t>(v)];
  }
  int degree(int v) const {
    return static_cast<int>(adj_[static_cast<std::size_t>(v)].size());
  }

  void set_hosted(int v, std::vector<int> files);      // sorted + deduped
  void set_answerable(int v, std::vector<int> files);  // sorted + deduped
  const std::vector<int>& hosted(int v) const {
    return hosted_[static_cast<std::size_t>(v)];
  }
  // Falls back to hosted when no index was installed.
  const std::vector<int>& answerable(int v) const;
  bool answers(int v, int file) const;

  // Per-node query-traffic counters used by the adaptive topology.
  std::vector<long long> q_total;
  std::vector<long long> q_match;

  // Node degrees sorted descending (degree-rank plot input).
  std::vector<int> degree_histogram() const;

  // Components as sorted node lists, largest first (ties by smallest id).
  std::vector<std::vector<int>> connected_components() const;

  // Bridges every smaller component to the largest with one edge each;
  // returns the number of edges added.
  int repair_connectivity(RngStream& rng);

  // One "a b" line per edge with a < b, lexicographically sorted.
  std::string to_edge_list() const;

 private:
  std::vector<std::vector<int>> adj_;
  std::vector<std::vector<int>> hosted_;
  std::vector<std::vector<int>> answerable_;
  std::vector<char> has_index_;
  long long edges_ = 0;
};

}  // namespace mpo
