#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mpo/catalog.hpp"
#include "mpo/graph.hpp"
#include "mpo/rng.hpp"
#include "mpo/topologies.hpp"

using namespace mpo;

TEST_CASE("degree histogram: basics and handshake lemma") {
  Graph empty(4);
  CHECK_EQ(empty.degree_histogram(), std::vector<int>{0, 0, 0, 0});

  Graph star(5);
  for (int leaf = 1; leaf < 5; ++leaf) star.add_edge(0, leaf);
  CHECK_EQ(star.degree_histogram(), std::vector<int>{4, 1, 1, 1, 1});

  RngStream rng(3);
  int repaired = 0;
  Graph g = gen_rtpl(120, 9.0, 0.8, rng, &repaired);
  auto hist = g.degree_histogram();
  const long long total = std::accumulate(hist.begin(), hist.end(), 0ll);
  CHECK_EQ(total, 2 * g.edge_count());
}

TEST_CASE("rtpl: minimal graph, validation, determinism") {
  RngStream rng(5);
  Graph tiny = gen_rtpl(2, 1.0, 1.0, rng);
  CHECK_EQ(tiny.edge_count(), 1);
  CHECK(tiny.has_edge(0, 1));

  CHECK_THROWS_AS(gen_rtpl(1, 1.0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(gen_rtpl(10, 25.0, 0.8, rng), std::invalid_argument);

  RngStream a(7), b(7);
  Graph g1 = gen_rtpl(300, 14.0, 0.8, a);
  Graph g2 = gen_rtpl(300, 14.0, 0.8, b);
  CHECK_EQ(g1.to_edge_list(), g2.to_edge_list());
}

TEST_CASE("rtpl: connected, max degree tracks omega, power-law slope") {
  for (auto [n, omega] : {std::pair<int, double>{500, 18.0}, {2000, 36.0}}) {
    RngStream rng(11);
    int repaired = 0;
    Graph g = gen_rtpl(n, omega, 0.8, rng, &repaired);
    CHECK_EQ(g.connected_components().size(), 1u);

    auto hist = g.degree_histogram();
    CHECK_GE(hist.front(), static_cast<int>(omega * 0.8));
    CHECK_LE(hist.front(), static_cast<int>(omega * 1.2));

    // Log-log regression over the non-clamped head of the rank-degree
    // curve (target degree >= 2).
    int head = 0;
    while (head < n &&
           std::llround(omega / std::pow(head + 1.0, 0.8)) >= 2)
      ++head;
    REQUIRE_GE(head, 10);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < head; ++i) {
      const double x = std::log(static_cast<double>(i + 1));
      const double y = std::log(static_cast<double>(hist[static_cast<std::size_t>(i)]));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope =
        (head * sxy - sx * sy) / (head * sxx - sx * sx);
    CHECK(std::abs(-slope - 0.8) < 0.15);
  }
}

TEST_CASE("supernode: single forced cluster") {
  SupernodeParams p;
  p.c_min = 15;
  p.c_max = 15;
  RngStream rng(13);
  Graph g = gen_supernode(15, p, rng);
  CHECK_EQ(g.degree(0), 14);      // super-peer reaches every member
  CHECK_EQ(g.degree(1), 2);       // backup: super-peer + other backup
  CHECK_EQ(g.degree(2), 2);
  for (int leaf = 3; leaf < 15; ++leaf) CHECK_EQ(g.degree(leaf), 1);
  CHECK_EQ(g.connected_components().size(), 1u);
}

TEST_CASE("supernode: cluster structure at experiment scales") {
  for (int n : {500, 2000}) {
    SupernodeParams p;
    RngStream rng(17);
    Graph g = gen_supernode(n, p, rng);
    CHECK_EQ(g.connected_components().size(), 1u);

    // Recover clusters from the construction: leaves have degree 1 and
    // their neighbor is the super-peer.
    int leaves = 0;
    for (int v = 0; v < n; ++v) {
      if (g.degree(v) == 1) {
        ++leaves;
        const int sp = g.neighbors(v)[0];
        CHECK_GT(g.degree(sp), 2);
      }
    }
    CHECK_GT(leaves, n / 4);

    const auto hist = g.degree_histogram();
    CHECK_GE(hist.front(), 20);
    CHECK_LE(hist.front(), 30 + (n == 2000 ? 8 : 0));

    RngStream r2(17);
    CHECK_EQ(g.to_edge_list(), gen_supernode(n, p, r2).to_edge_list());
  }
}

TEST_CASE("ideal square-root degree: worked values") {
  SquareRootParams p;
  p.d_max = 80;
  p.d_min = 3;
  p.d0 = 4;
  CHECK_EQ(ideal_sqrt_degree(10, 10, p), 80);     // g = 1
  CHECK_EQ(ideal_sqrt_degree(0, 10, p), 3);       // g = 0 floors at d_min
  CHECK_EQ(ideal_sqrt_degree(1, 4, p), 40);       // g = 0.25 -> 80 * 0.5
  CHECK_EQ(ideal_sqrt_degree(0, 0, p), 4);        // no traffic yet -> d0
}

TEST_CASE("squareroot: uniform content converges to a common degree") {
  const int n = 60;
  FileCatalog cat;
  cat.m = n;
  cat.alpha = 0.0;
  cat.total_replicas = n;
  cat.query_weights.assign(n, 1.0 / n);
  cat.query_cdf.resize(n);
  for (int i = 0; i < n; ++i)
    cat.query_cdf[static_cast<std::size_t>(i)] = (i + 1.0) / n;
  cat.query_cdf.back() = 1.0;
  cat.replica_counts.assign(n, 1);
  cat.hosts_of_file.resize(n);
  cat.files_of_host.resize(n);
  for (int i = 0; i < n; ++i) {
    cat.hosts_of_file[static_cast<std::size_t>(i)] = {i};
    cat.files_of_host[static_cast<std::size_t>(i)] = {i};
  }

  SquareRootParams p;
  p.d_max = 40;
  RngStream rng(19);
  Graph g = gen_squareroot(n, p, 4000, cat, rng);
  std::vector<int> degs;
  for (int v = 0; v < n; ++v) degs.push_back(g.degree(v));
  std::sort(degs.begin(), degs.end());
  const int median = degs[static_cast<std::size_t>(n / 2)];
  int near = 0;
  for (int d : degs) {
    REQUIRE_GE(d, p.d_min);
    REQUIRE_LE(d, p.d_max);
    if (std::abs(d - median) <= 1) ++near;
  }
  // Symmetric workload: the bulk of nodes sit within +-1 of the median.
  CHECK_GE(static_cast<double>(near) / n, 0.8);
  CHECK_LE(degs.back() - degs.front(), 6);
}

TEST_CASE("squareroot: zipf workload respects bounds and the sqrt law") {
  const int n = 500;
  RngStream crng(23);
  auto cat = build_catalog(300, 0.726, 1040, n, crng);
  SquareRootParams p;  // d_max=40, d_min=3, d0=4 at this scale
  RngStream rng(29);
  int repaired = 0;
  Graph g = gen_squareroot(n, p, 10000, cat, rng, &repaired);

  CHECK_EQ(g.connected_components().size(), 1u);
  for (int v = 0; v < n; ++v) {
    REQUIRE_GE(g.degree(v), p.d_min);
    REQUIRE_LE(g.degree(v), p.d_max);
  }

  // d_k should grow like sqrt(g_k): positive regression slope with a solid
  // fit over nodes that answered at least one query (g_k > 0). Nodes with
  // g_k = 0 sit on the d_min floor where the proportionality law is
  // intentionally overridden.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int cnt = 0;
  for (int v = 0; v < n; ++v) {
    if (g.q_total[static_cast<std::size_t>(v)] <= 0 ||
        g.q_match[static_cast<std::size_t>(v)] <= 0)
      continue;
    const double gk = static_cast<double>(g.q_match[static_cast<std::size_t>(v)]) /
                      static_cast<double>(g.q_total[static_cast<std::size_t>(v)]);
    const double x = std::sqrt(gk);
    const double y = static_cast<double>(g.degree(v));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++cnt;
  }
  REQUIRE_GT(cnt, n / 2);
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  CHECK_GT(slope, 0.0);
  const double r_num = cnt * sxy - sx * sy;
  const double r2 = (r_num * r_num) /
                    ((cnt * sxx - sx * sx) * (cnt * syy - sy * sy));
  CHECK_GE(r2, 0.8);

  // Calibrated scale check: maximum degree lands near the target value 8.
  const auto hist = g.degree_histogram();
  CHECK_GE(hist.front(), 6);
  CHECK_LE(hist.front(), 10);
}
