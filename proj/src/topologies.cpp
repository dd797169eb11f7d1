#include "mpo/topologies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpo/search.hpp"

namespace mpo {

namespace {

// Pair up stubs (node ids, one entry per wanted edge endpoint) into edges,
// re-shuffling rejects (self-loops, duplicate edges) for a few passes;
// unmatched leftovers are dropped.
void match_stubs(Graph& g, std::vector<int> stubs, RngStream& rng,
                 int passes = 30) {
  for (int pass = 0; pass < passes && stubs.size() >= 2; ++pass) {
    rng.shuffle(stubs);
    std::vector<int> leftover;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      const int a = stubs[i], b = stubs[i + 1];
      if (a == b || !g.add_edge(a, b)) {
        leftover.push_back(a);
        leftover.push_back(b);
      }
    }
    if (stubs.size() % 2 != 0) leftover.push_back(stubs.back());
    if (leftover.size() == stubs.size()) break;  // no further progress
    stubs = std::move(leftover);
  }
}

// Bridge every smaller component into the largest one, attaching at
// low-degree fringe nodes. A sparse power-law degree sequence leaves many
// tiny components whose repair edges would otherwise pile onto the hubs and
// wash out both the maximum degree and the rank-degree slope.
int bridge_components_at_fringe(Graph& g, RngStream& rng,
                                int max_attach_degree) {
  const auto comps = g.connected_components();
  if (comps.size() <= 1) return 0;
  std::vector<int> pool;
  for (int v : comps.front())
    if (g.degree(v) <= max_attach_degree) pool.push_back(v);
  int added = 0;
  for (std::size_t c = 1; c < comps.size(); ++c) {
    int b = -1;
    while (!pool.empty()) {
      const std::size_t idx =
          static_cast<std::size_t>(rng.below(pool.size()));
      if (g.degree(pool[idx]) <= max_attach_degree) {
        b = pool[idx];
        break;
      }
      pool[idx] = pool.back();  // degree grew past the cap; drop lazily
      pool.pop_back();
    }
    if (b < 0) b = rng.pick(comps.front());
    if (g.add_edge(rng.pick(comps[c]), b)) ++added;
    for (int v : comps[c])
      if (g.degree(v) <= max_attach_degree) pool.push_back(v);
  }
  return added;
}

}  // namespace

Graph gen_rtpl(int n, double omega, double alpha_pl, RngStream& rng,
               int* repaired) {
  if (n < 2) throw std::invalid_argument("rtpl: need at least two nodes");
  if (std::llround(omega) > n - 1)
    throw std::invalid_argument("rtpl: omega exceeds the feasible degree n-1");

  Graph g(n);
  std::vector<int> stubs;
  for (int i = 0; i < n; ++i) {
    const long long t = std::max<long long>(
        1, std::llround(omega / std::pow(static_cast<double>(i + 1), alpha_pl)));
    const long long capped = std::min<long long>(t, n - 1);
    for (long long s = 0; s < capped; ++s) stubs.push_back(i);
  }
  if (stubs.size() % 2 != 0) stubs.pop_back();
  match_stubs(g, std::move(stubs), rng);

  const int added = bridge_components_at_fringe(g, rng, 1);
  if (repaired) *repaired = added;
  return g;
}

Graph gen_supernode(int n, const SupernodeParams& p, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("supernode: need at least one node");
  Graph g(n);
  std::vector<int> sps;
  int base = 0;
  while (base < n) {
    const int remaining = n - base;
    int size;
    if (remaining < 2 * p.c_min) {
      size = remaining;  // absorb the tail so no undersized cluster remains
    } else {
      size = static_cast<int>(
          rng.range(p.c_min, std::min(p.c_max, remaining)));
      if (remaining - size < p.c_min) size = remaining - p.c_min;
    }
    const int sp = base;
    sps.push_back(sp);
    if (size >= 2) g.add_edge(sp, base + 1);
    if (size >= 3) {
      g.add_edge(sp, base + 2);
      g.add_edge(base + 1, base + 2);  // the two backups also pair up
    }
    for (int i = 3; i < size; ++i) g.add_edge(sp, base + i);
    base += size;
  }

  if (sps.size() >= 2) {
    std::vector<int> stubs;
    for (int sp : sps) {
      const int want = static_cast<int>(
          rng.range(p.sp_links, p.sp_links + p.sp_links_spread));
      const int t = std::min<int>(want, static_cast<int>(sps.size()) - 1);
      for (int s = 0; s < t; ++s) stubs.push_back(sp);
    }
    if (stubs.size() % 2 != 0) stubs.pop_back();
    match_stubs(g, std::move(stubs), rng);
  }
  g.repair_connectivity(rng);
  return g;
}

int ideal_sqrt_degree(long long q_match, long long q_total,
                      const SquareRootParams& p) {
  if (q_total <= 0) return p.d0;
  const double g =
      static_cast<double>(q_match) / static_cast<double>(q_total);
  const long long v = std::llround(p.d_max * std::sqrt(g));
  if (v <= p.d_min) return p.d_min;
  return static_cast<int>(std::min<long long>(v, p.d_max));
}

Graph gen_squareroot(int n, const SquareRootParams& p, int warmup_queries,
                     const FileCatalog& catalog, RngStream& rng,
                     int* repaired) {
  if (n < 2) throw std::invalid_argument("squareroot: need at least two nodes");
  Graph g(n);
  for (int v = 0; v < n; ++v)
    if (v < static_cast<int>(catalog.files_of_host.size()))
      g.set_hosted(v, catalog.files_of_host[static_cast<std::size_t>(v)]);

  // Arrival: every node initiates d0 random connections.
  for (int k = 0; k < n; ++k) {
    int made = 0, guard = 0;
    while (made < p.d0 && guard++ < 40 * p.d0) {
      const int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      if (other != k && g.add_edge(k, other)) ++made;
    }
  }

  // Warmup traffic: walk queries, track per-node seen/matched counts, and
  // re-fit degrees after every batch.
  int done = 0;
  while (done < warmup_queries) {
    const int count = std::min(p.batch, warmup_queries - done);
    for (int i = 0; i < count; ++i) {
      SearchRequest req;
      req.source = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      req.target_file = catalog.sample_query_file(rng);
      req.ttl = p.walk_ttl;
      req.walks = p.walks;
      req.stop_after = 1;
      req.algorithm = Algorithm::random_walk;
      const SearchResult res = random_walk(g, req, rng);
      auto touch = [&](int v) {
        ++g.q_total[static_cast<std::size_t>(v)];
        if (g.answers(v, req.target_file))
          ++g.q_match[static_cast<std::size_t>(v)];
      };
      touch(req.source);
      for (const auto& [node, cnt] : res.disturbed)
        if (node != req.source) touch(node);
    }
    done += count;

    for (int k = 0; k < n; ++k) {
      const int ideal = std::min(
          n - 1, ideal_sqrt_degree(g.q_match[static_cast<std::size_t>(k)],
                                   g.q_total[static_cast<std::size_t>(k)], p));
      int guard = 0;
      while (g.degree(k) < ideal && guard++ < 50 * (ideal + 1)) {
        const int other =
            static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        if (other != k) g.add_edge(k, other);
      }
      while (g.degree(k) > ideal) {
        const auto& nb = g.neighbors(k);
        g.remove_edge(k, nb[static_cast<std::size_t>(rng.below(nb.size()))]);
      }
    }
  }

  // Final safety clamps, then reconnect without breaching the cap.
  for (int k = 0; k < n; ++k) {
    while (g.degree(k) > p.d_max) {
      const auto& nb = g.neighbors(k);
      g.remove_edge(k, nb[static_cast<std::size_t>(rng.below(nb.size()))]);
    }
  }
  for (int k = 0; k < n; ++k) {
    int guard = 0;
    while (g.degree(k) < p.d_min && guard++ < 50 * n) {
      const int other =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      if (other != k && g.degree(other) < p.d_max) g.add_edge(k, other);
    }
  }
  int added = 0;
  for (;;) {
    auto comps = g.connected_components();
    if (comps.size() <= 1) break;
    const auto& big = comps.front();
    bool bridged = false;
    for (std::size_t c = 1; c < comps.size(); ++c) {
      const int a = rng.pick(comps[c]);
      std::vector<int> candidates;
      for (int b : big)
        if (g.degree(b) < p.d_max) candidates.push_back(b);
      const int b = candidates.empty() ? rng.pick(big) : rng.pick(candidates);
      if (g.add_edge(a, b)) {
        ++added;
        bridged = true;
      }
    }
    if (!bridged) break;
  }
  if (repaired) *repaired = added;
  return g;
}

}  // namespace mpo
