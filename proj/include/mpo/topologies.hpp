#pragma once

#include "mpo/catalog.hpp"
#include "mpo/graph.hpp"
#include "mpo/rng.hpp"

namespace mpo {

// Power-law random topology: the rank-i node (1-based) targets
// max(1, round(omega / i^alpha_pl)) neighbors, realized by stub matching
// with connectivity repair. `repaired` (optional) receives the number of
// bridge edges the repair pass added.
// Throws std::invalid_argument when n < 2 or omega exceeds n - 1.
Graph gen_rtpl(int n, double omega, double alpha_pl, RngStream& rng,
               int* repaired = nullptr);

struct SupernodeParams {
  int c_min = 5;     // smallest cluster
  int c_max = 15;    // largest cluster
  int sp_links = 10; // lower end of each super-peer's mesh-degree target
  int sp_links_spread = 4;  // target drawn uniformly from [sp_links, sp_links+spread]
};

// Two-level hierarchy: clusters of uniformly random size; per cluster one
// super-peer (linked to every member), two backups (linked to the
// super-peer and each other), and leaves (linked to the super-peer only);
// super-peers interconnect in a random near-regular mesh.
// Throws std::invalid_argument when n < 1.
Graph gen_supernode(int n, const SupernodeParams& p, RngStream& rng);

struct SquareRootParams {
  int d_max = 40;  // degree for a node whose content matches every query
  int d_min = 3;   // connectivity floor
  int d0 = 4;      // connections each node initiates on arrival
  int batch = 100; // queries between degree re-fits
  int walk_ttl = 50;
  int walks = 4;
};

// Target degree for a node that answered q_match of the q_total queries it
// processed: round(d_max * sqrt(q_match / q_total)) when that exceeds
// d_min, otherwise d_min; d0 before any traffic was seen.
int ideal_sqrt_degree(long long q_match, long long q_total,
                      const SquareRootParams& p);

// Adaptive topology: random d0-degree start, then `warmup_queries` sampled
// random-walk queries; after every batch each node re-fits its degree to
// ideal_sqrt_degree of its traffic counters by adding/dropping random
// links. Finishes with degree clamps to [d_min, d_max] and connectivity
// repair. Hosted content is taken from the catalog.
Graph gen_squareroot(int n, const SquareRootParams& p, int warmup_queries,
                     const FileCatalog& catalog, RngStream& rng,
                     int* repaired = nullptr);

}  // namespace mpo
