#include "mpo/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mpo {

int FileCatalog::sample_query_file(RngStream& rng) const {
  const double u = rng.uniform_real();
  auto it = std::upper_bound(query_cdf.begin(), query_cdf.end(), u);
  if (it == query_cdf.end()) --it;
  return static_cast<int>(it - query_cdf.begin());
}

bool FileCatalog::node_hosts(int node, int file) const {
  if (node < 0 || node >= static_cast<int>(files_of_host.size())) return false;
  const auto& fs = files_of_host[static_cast<std::size_t>(node)];
  return std::binary_search(fs.begin(), fs.end(), file);
}

FileCatalog build_catalog(int m, double alpha, int R, int num_hosts,
                          RngStream& rng) {
  if (m < 1) throw std::invalid_argument("catalog: m must be >= 1");
  if (R < m)
    throw std::invalid_argument(
        "catalog: R must be >= m so every file keeps at least one copy");
  if (num_hosts < 1) throw std::invalid_argument("catalog: no hosts");

  FileCatalog cat;
  cat.m = m;
  cat.alpha = alpha;
  cat.total_replicas = R;

  cat.query_weights.resize(static_cast<std::size_t>(m));
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    cat.query_weights[static_cast<std::size_t>(i)] =
        std::pow(static_cast<double>(i + 1), -alpha);
    sum += cat.query_weights[static_cast<std::size_t>(i)];
  }
  for (double& w : cat.query_weights) w /= sum;

  cat.query_cdf.resize(static_cast<std::size_t>(m));
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    acc += cat.query_weights[static_cast<std::size_t>(i)];
    cat.query_cdf[static_cast<std::size_t>(i)] = acc;
  }
  cat.query_cdf.back() = 1.0;

  // Proportional replica counts, adjusted to sum to R exactly while staying
  // non-increasing in rank with every file keeping >= 1 copy.
  cat.replica_counts.resize(static_cast<std::size_t>(m));
  long long total = 0;
  for (int i = 0; i < m; ++i) {
    const long long r = std::max<long long>(
        1, std::llround(static_cast<double>(R) *
                        cat.query_weights[static_cast<std::size_t>(i)]));
    cat.replica_counts[static_cast<std::size_t>(i)] = static_cast<int>(r);
    total += r;
  }
  long long diff = static_cast<long long>(R) - total;
  while (diff > 0) {
    for (int i = 0; i < m && diff > 0; ++i) {
      ++cat.replica_counts[static_cast<std::size_t>(i)];
      --diff;
    }
  }
  while (diff < 0) {
    bool changed = false;
    for (int i = m - 1; i >= 0 && diff < 0; --i) {
      if (cat.replica_counts[static_cast<std::size_t>(i)] > 1) {
        --cat.replica_counts[static_cast<std::size_t>(i)];
        ++diff;
        changed = true;
      }
    }
    if (!changed)
      throw std::logic_error("catalog: replica adjustment cannot reach R");
  }

  // Copies of one file on distinct hosts, drawn by partial Fisher-Yates over
  // a reused host permutation.
  cat.hosts_of_file.resize(static_cast<std::size_t>(m));
  cat.files_of_host.resize(static_cast<std::size_t>(num_hosts));
  std::vector<int> perm(static_cast<std::size_t>(num_hosts));
  std::iota(perm.begin(), perm.end(), 0);
  for (int f = 0; f < m; ++f) {
    const int take =
        std::min(cat.replica_counts[static_cast<std::size_t>(f)], num_hosts);
    for (int j = 0; j < take; ++j) {
      const int k =
          j + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_hosts - j)));
      std::swap(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(k)]);
    }
    auto& hf = cat.hosts_of_file[static_cast<std::size_t>(f)];
    hf.assign(perm.begin(), perm.begin() + take);
    std::sort(hf.begin(), hf.end());
    for (int h : hf)
      cat.files_of_host[static_cast<std::size_t>(h)].push_back(f);
  }
  return cat;
}

}  // namespace mpo
