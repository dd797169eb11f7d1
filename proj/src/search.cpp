#include "mpo/search.hpp"

#include <algorithm>

namespace mpo {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::flood_repeated: return "flood_repeated";
    case Algorithm::flood_unrepeated: return "flood_unrepeated";
    case Algorithm::random_walk: return "random_walk";
  }
  return "unknown";
}

bool parse_algorithm(const std::string& s, Algorithm& out) {
  if (s == "flood_repeated") {
    out = Algorithm::flood_repeated;
  } else if (s == "flood_unrepeated") {
    out = Algorithm::flood_unrepeated;
  } else if (s == "random_walk") {
    out = Algorithm::random_walk;
  } else {
    return false;
  }
  return true;
}

namespace {

struct HitTracker {
  const Graph& g;
  int file;
  SearchResult& res;
  std::vector<char> counted;

  HitTracker(const Graph& graph, int target, SearchResult& r)
      : g(graph), file(target), res(r),
        counted(static_cast<std::size_t>(graph.node_count()), 0) {}

  void note(int v, int hop) {
    if (counted[static_cast<std::size_t>(v)]) return;
    if (!g.answers(v, file)) return;
    counted[static_cast<std::size_t>(v)] = 1;
    ++res.results_found;
    if (res.hops_to_first_hit < 0) res.hops_to_first_hit = hop;
  }
};

void finish(SearchResult& res, const std::vector<long long>& recv) {
  res.success = res.results_found >= 1;
  for (std::size_t v = 0; v < recv.size(); ++v)
    if (recv[v] > 0) res.disturbed.emplace_back(static_cast<int>(v), recv[v]);
}

}  // namespace

SearchResult flood(const Graph& g, const SearchRequest& req) {
  const int n = g.node_count();
  const bool repeated = (req.algorithm == Algorithm::flood_repeated);
  SearchResult res;
  std::vector<long long> recv(static_cast<std::size_t>(n), 0);
  std::vector<char> received(static_cast<std::size_t>(n), 0);
  HitTracker hits(g, req.target_file, res);

  received[static_cast<std::size_t>(req.source)] = 1;
  hits.note(req.source, 0);

  // A packet batches every copy a node received from one link in one hop;
  // multiplicities keep per-hop work linear in the edge count even when
  // repeated flooding circulates exponentially many copies.
  struct Packet {
    int node;
    int from;
    long long count;
  };
  std::vector<Packet> frontier;
  if (res.results_found < req.stop_after)
    frontier.push_back({req.source, -1, 1});

  for (int hop = 1; hop <= req.ttl && !frontier.empty(); ++hop) {
    std::vector<Packet> next;
    for (const Packet& p : frontier) {
      const auto& au = g.answerable(p.node);
      for (int v : g.neighbors(p.node)) {
        if (v == p.from) continue;
        if (!repeated && received[static_cast<std::size_t>(v)]) continue;
        if (g.degree(v) == 1) {
          const auto& av = g.answerable(v);
          if (std::includes(au.begin(), au.end(), av.begin(), av.end()))
            continue;  // dominated leaf: no new route, no new result
        }
        res.messages_sent += p.count;
        recv[static_cast<std::size_t>(v)] += p.count;
        if (!received[static_cast<std::size_t>(v)]) {
          received[static_cast<std::size_t>(v)] = 1;
          hits.note(v, hop);
          next.push_back({v, p.node, p.count});
        } else if (repeated) {
          next.push_back({v, p.node, p.count});
        }
      }
    }
    std::sort(next.begin(), next.end(), [](const Packet& a, const Packet& b) {
      return a.node != b.node ? a.node < b.node : a.from < b.from;
    });
    frontier.clear();
    for (const Packet& p : next) {
      if (!frontier.empty() && frontier.back().node == p.node &&
          frontier.back().from == p.from) {
        frontier.back().count += p.count;
      } else {
        frontier.push_back(p);
      }
    }
    if (res.results_found >= req.stop_after) break;
  }
  finish(res, recv);
  return res;
}

SearchResult random_walk(const Graph& g, const SearchRequest& req,
                         RngStream& rng) {
  const int n = g.node_count();
  SearchResult res;
  std::vector<long long> recv(static_cast<std::size_t>(n), 0);
  HitTracker hits(g, req.target_file, res);
  hits.note(req.source, 0);

  struct Walker {
    int pos;
    int prev;
  };
  std::vector<Walker> walkers(static_cast<std::size_t>(req.walks),
                              Walker{req.source, -1});

  for (int step = 1;
       step <= req.ttl && res.results_found < req.stop_after; ++step) {
    bool moved = false;
    for (auto& w : walkers) {
      const auto& nb = g.neighbors(w.pos);
      if (nb.empty()) continue;  // stranded walker
      int choice;
      if (!req.allow_backtrack && w.prev >= 0 && nb.size() > 1) {
        auto it = std::lower_bound(nb.begin(), nb.end(), w.prev);
        const int prev_idx =
            (it != nb.end() && *it == w.prev)
                ? static_cast<int>(it - nb.begin())
                : -1;
        if (prev_idx >= 0) {
          int idx = static_cast<int>(rng.below(nb.size() - 1));
          if (idx >= prev_idx) ++idx;
          choice = nb[static_cast<std::size_t>(idx)];
        } else {
          choice = nb[static_cast<std::size_t>(rng.below(nb.size()))];
        }
      } else {
        choice = nb[static_cast<std::size_t>(rng.below(nb.size()))];
      }
      ++res.messages_sent;
      ++recv[static_cast<std::size_t>(choice)];
      w.prev = w.pos;
      w.pos = choice;
      hits.note(choice, step);
      moved = true;
    }
    if (!moved) break;
  }
  finish(res, recv);
  return res;
}

SearchResult run_search(const Graph& g, const SearchRequest& req,
                        RngStream& rng) {
  if (req.algorithm == Algorithm::random_walk) return random_walk(g, req, rng);
  return flood(g, req);
}

long long MetricsSample::max_disturbance() const {
  long long mx = 0;
  for (long long d : disturbance) mx = std::max(mx, d);
  return mx;
}

long long MetricsSample::total_disturbance() const {
  long long t = 0;
  for (long long d : disturbance) t += d;
  return t;
}

void MetricsSample::add(const SearchResult& r) {
  ++n_queries;
  if (r.success) {
    ++successes;
    total_hops_success += r.hops_to_first_hit;
  }
  total_messages += r.messages_sent;
  for (const auto& [node, count] : r.disturbed) {
    if (node >= static_cast<int>(disturbance.size()))
      disturbance.resize(static_cast<std::size_t>(node) + 1, 0);
    disturbance[static_cast<std::size_t>(node)] += count;
  }
}

void MetricsSample::merge(const MetricsSample& other) {
  n_queries += other.n_queries;
  successes += other.successes;
  total_messages += other.total_messages;
  total_hops_success += other.total_hops_success;
  if (disturbance.size() < other.disturbance.size())
    disturbance.resize(other.disturbance.size(), 0);
  for (std::size_t i = 0; i < other.disturbance.size(); ++i)
    disturbance[i] += other.disturbance[i];
}

MetricsSample batch_search(const Graph& g, const FileCatalog& catalog,
                           int n_queries, int ttl, Algorithm algorithm,
                           RngStream& rng, int walks, int stop_after) {
  MetricsSample sample;
  sample.disturbance.assign(static_cast<std::size_t>(g.node_count()), 0);
  for (int q = 0; q < n_queries; ++q) {
    SearchRequest req;
    req.source = static_cast<int>(rng.below(
        static_cast<std::uint64_t>(g.node_count())));
    req.target_file = catalog.sample_query_file(rng);
    req.ttl = ttl;
    req.algorithm = algorithm;
    req.walks = walks;
    req.stop_after = stop_after;
    sample.add(run_search(g, req, rng));
  }
  return sample;
}

std::vector<QuerySample> sample_queries(const Graph& g,
                                        const FileCatalog& catalog, int n,
                                        RngStream& rng,
                                        const std::vector<int>* source_pool) {
  if (n < 0) throw std::invalid_argument("sample_queries: n must be >= 0");
  if (source_pool != nullptr && source_pool->empty())
    throw std::invalid_argument("sample_queries: source_pool is empty");
  std::vector<QuerySample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    QuerySample sample;
    if (source_pool != nullptr) {
      sample.source = rng.pick(*source_pool);
    } else {
      sample.source = static_cast<int>(rng.below(
          static_cast<std::uint64_t>(g.node_count())));
    }
    sample.target_file = catalog.sample_query_file(rng);
    out.push_back(sample);
  }
  return out;
}

MetricsSample batch_search(const Graph& g, const FileCatalog& catalog,
                           const std::vector<QuerySample>& queries, int ttl,
                           Algorithm algorithm, RngStream& rng, int walks,
                           int stop_after) {
  MetricsSample sample;
  sample.disturbance.assign(static_cast<std::size_t>(g.node_count()), 0);
  for (const QuerySample& q : queries) {
    SearchRequest req;
    req.source = q.source;
    req.target_file = q.target_file;
    req.ttl = ttl;
    req.algorithm = algorithm;
    req.walks = walks;
    req.stop_after = stop_after;
    sample.add(run_search(g, req, rng));
  }
  return sample;
}

}  // namespace mpo
