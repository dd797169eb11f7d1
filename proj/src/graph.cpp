#include "mpo/graph.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpo {

Graph::Graph(int n)
    : adj_(static_cast<std::size_t>(n)),
      hosted_(static_cast<std::size_t>(n)),
      answerable_(static_cast<std::size_t>(n)),
      has_index_(static_cast<std::size_t>(n), 0),
      q_total(static_cast<std::size_t>(n), 0),
      q_match(static_cast<std::size_t>(n), 0) {}

bool Graph::add_edge(int a, int b) {
  if (a == b) return false;
  auto& na = adj_[static_cast<std::size_t>(a)];
  auto it = std::lower_bound(na.begin(), na.end(), b);
  if (it != na.end() && *it == b) return false;
  na.insert(it, b);
  auto& nb = adj_[static_cast<std::size_t>(b)];
  nb.insert(std::lower_bound(nb.begin(), nb.end(), a), a);
  ++edges_;
  return true;
}

bool Graph::has_edge(int a, int b) const {
  const auto& na = adj_[static_cast<std::size_t>(a)];
  return std::binary_search(na.begin(), na.end(), b);
}

bool Graph::remove_edge(int a, int b) {
  auto& na = adj_[static_cast<std::size_t>(a)];
  auto it = std::lower_bound(na.begin(), na.end(), b);
  if (it == na.end() || *it != b) return false;
  na.erase(it);
  auto& nb = adj_[static_cast<std::size_t>(b)];
  nb.erase(std::lower_bound(nb.begin(), nb.end(), a));
  --edges_;
  return true;
}

static void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

void Graph::set_hosted(int v, std::vector<int> files) {
  sort_unique(files);
  hosted_[static_cast<std::size_t>(v)] = std::move(files);
}

void Graph::set_answerable(int v, std::vector<int> files) {
  sort_unique(files);
  answerable_[static_cast<std::size_t>(v)] = std::move(files);
  has_index_[static_cast<std::size_t>(v)] = 1;
}

const std::vector<int>& Graph::answerable(int v) const {
  return has_index_[static_cast<std::size_t>(v)]
             ? answerable_[static_cast<std::size_t>(v)]
             : hosted_[static_cast<std::size_t>(v)];
}

bool Graph::answers(int v, int file) const {
  const auto& fs = answerable(v);
  return std::binary_search(fs.begin(), fs.end(), file);
}

std::vector<int> Graph::degree_histogram() const {
  std::vector<int> degs;
  degs.reserve(adj_.size());
  for (const auto& nb : adj_) degs.push_back(static_cast<int>(nb.size()));
  std::sort(degs.begin(), degs.end(), std::greater<int>());
  return degs;
}

std::vector<std::vector<int>> Graph::connected_components() const {
  const int n = node_count();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> comps;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    std::vector<int> comp;
    stack.push_back(s);
    seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      comp.push_back(u);
      for (int v : adj_[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::stable_sort(comps.begin(), comps.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

int Graph::repair_connectivity(RngStream& rng) {
  auto comps = connected_components();
  if (comps.size() <= 1) return 0;
  int added = 0;
  const auto& big = comps.front();
  for (std::size_t c = 1; c < comps.size(); ++c) {
    const int a = rng.pick(comps[c]);
    const int b = rng.pick(big);
    if (add_edge(a, b)) ++added;
  }
  return added;
}

std::string Graph::to_edge_list() const {
  std::string out;
  for (int a = 0; a < node_count(); ++a) {
    for (int b : adj_[static_cast<std::size_t>(a)]) {
      if (b <= a) continue;
      out += std::to_string(a);
      out += ' ';
      out += std::to_string(b);
      out += '\n';
    }
  }
  return out;
}

}  // namespace mpo
