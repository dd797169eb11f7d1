#include "mpo/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpo {

namespace {

// Largest height h (>= 1) with d^(h-1) < m: the tallest tree the height
// bound allows for a lattice of m clusters.
int height_cap(long long m, int d) {
  if (m <= 1) return 1;
  int h = 1;
  long long p = 1;  // d^(h-1)
  while (p * d < m) {
    p *= d;
    ++h;
  }
  return h;
}

// Cluster capacity of a complete d-ary tree of height h: 1 + d + ... +
// d^(h-1).
long long tree_capacity(int h, int d) {
  long long t = 0, p = 1;
  for (int i = 0; i < h; ++i) {
    t += p;
    p *= d;
  }
  return t;
}

// Depth of heap slot `local` in a d-ary heap (root = slot 0 = depth 0).
int heap_depth(long long local, int d) {
  int depth = 0;
  while (local > 0) {
    local = (local - 1) / d;
    ++depth;
  }
  return depth;
}

bool pow_less(int d, int exponent, long long m) {
  // d^exponent < m without overflow for the sizes in play.
  long long p = 1;
  for (int i = 0; i < exponent; ++i) {
    p *= d;
    if (p >= m) return false;
  }
  return p < m;
}

const Coordinate* coord_in_view(const AsView& v, int key) {
  for (const auto& m : v.members)
    if (m.key == key) return &m.coord;
  return nullptr;
}

}  // namespace

std::string role_name(Role r) {
  switch (r) {
    case Role::nn: return "nn";
    case Role::ic_local: return "ic_local";
    case Role::ic_level: return "ic_level";
    case Role::ic_layer: return "ic_layer";
  }
  return "nn";
}

Role parse_role(const std::string& name) {
  if (name == "nn") return Role::nn;
  if (name == "ic_local") return Role::ic_local;
  if (name == "ic_level") return Role::ic_level;
  if (name == "ic_layer") return Role::ic_layer;
  throw std::invalid_argument("unknown role name: " + name);
}

Election elect_heads(const std::vector<ElectionCandidate>& members) {
  std::vector<ElectionCandidate> sorted = members;
  std::sort(sorted.begin(), sorted.end(),
            [](const ElectionCandidate& a, const ElectionCandidate& b) {
              if (a.sr != b.sr) return a.sr > b.sr;
              return a.node_index < b.node_index;
            });
  Election e;
  if (sorted.size() > 0) e.ic_level = sorted[0].key;
  if (sorted.size() > 1) e.ic_local = sorted[1].key;
  if (sorted.size() > 2) e.ic_layer = sorted[2].key;
  return e;
}

double threshold_distance(const AsView& a, const AsView& b,
                          const std::array<double, 3>& role_weights) {
  // Role order {local, level, layer}; a role contributes only when both
  // clusters have it filled.
  const std::array<std::pair<int, int>, 3> heads{
      std::pair<int, int>{a.ic_local, b.ic_local},
      std::pair<int, int>{a.ic_level, b.ic_level},
      std::pair<int, int>{a.ic_layer, b.ic_layer}};
  std::array<std::optional<double>, 3> dists;
  for (int i = 0; i < 3; ++i) {
    const auto [ka, kb] = heads[static_cast<std::size_t>(i)];
    if (ka < 0 || kb < 0) continue;
    const Coordinate* ca = coord_in_view(a, ka);
    const Coordinate* cb = coord_in_view(b, kb);
    if (!ca || !cb) continue;
    dists[static_cast<std::size_t>(i)] = distance(*ca, *cb);
  }
  return weighted_role_distance(role_weights, dists);
}

// ---------------------------------------------------------------------------
// construction

Overlay::Overlay(OverlayParams params) : params_(params) {
  if (params_.d < 2)
    throw std::invalid_argument("overlay: d must be at least 2");
  if (params_.as_fill_target < 0 || params_.as_fill_target > params_.d + 3)
    throw std::invalid_argument("overlay: fill target exceeds cluster capacity");
  if (params_.region_cells < 1)
    throw std::invalid_argument("overlay: region_cells must be positive");
  if (params_.join_relocation_cap < 0)
    throw std::invalid_argument("overlay: relocation cap must be >= 0");
  if (params_.legacy_level_width < 0)
    throw std::invalid_argument("overlay: level width must be >= 0");
}

Overlay Overlay::bootstrap(const std::vector<PeerSeed>& peers,
                           OverlayParams params) {
  Overlay o(params);
  if (peers.empty())
    throw std::invalid_argument("bootstrap: need at least one peer");
  {
    std::set<int> keys;
    for (const auto& p : peers) {
      if (p.key < 0) throw std::invalid_argument("bootstrap: negative key");
      if (!keys.insert(p.key).second)
        throw std::invalid_argument("bootstrap: duplicate peer key");
    }
  }
  const int fill =
      params.as_fill_target > 0 ? params.as_fill_target : params.d + 3;

  // Pack peers into clusters in order of distance from the origin anchor;
  // the anchor leaves no trace afterwards.
  std::vector<const PeerSeed*> sorted;
  sorted.reserve(peers.size());
  for (const auto& p : peers) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const PeerSeed* a, const PeerSeed* b) {
              const double da = std::hypot(a->coord.x, a->coord.y);
              const double db = std::hypot(b->coord.x, b->coord.y);
              if (da != db) return da < db;
              return a->key < b->key;
            });

  for (std::size_t i = 0; i < sorted.size(); i += static_cast<std::size_t>(fill)) {
    const long long birth = o.next_birth_++;
    o.ases_[birth].birth = birth;
    o.order_.push_back(birth);
    As& as = o.ases_[birth];
    for (std::size_t j = i;
         j < std::min(sorted.size(), i + static_cast<std::size_t>(fill)); ++j) {
      const PeerSeed& s = *sorted[j];
      Member m;
      m.key = s.key;
      m.coord = s.coord;
      m.region = region_label(s.coord, params.spread, params.region_cells);
      m.tolerance = s.tolerance;
      m.hosted = s.hosted;
      o.insert_member(as, std::move(m));
    }
  }
  o.epilogue(true);
  return o;
}

// ---------------------------------------------------------------------------
// small internals

Overlay::As& Overlay::as_at(long long birth) { return ases_.at(birth); }
const Overlay::As& Overlay::as_at(long long birth) const {
  return ases_.at(birth);
}

Overlay::Member& Overlay::member_at(As& as, int key) {
  for (auto& m : as.members)
    if (m.key == key) return m;
  throw std::out_of_range("member not in cluster");
}

const Overlay::Member* Overlay::find_member(const As& as, int key) const {
  for (const auto& m : as.members)
    if (m.key == key) return &m;
  return nullptr;
}

Role Overlay::role_in(const As& as, int key) const {
  if (key == as.ic_level) return Role::ic_level;
  if (key == as.ic_local) return Role::ic_local;
  if (key == as.ic_layer) return Role::ic_layer;
  return Role::nn;
}

bool Overlay::is_head(const As& as, int key) const {
  return key == as.ic_level || key == as.ic_local || key == as.ic_layer;
}

int Overlay::acting_head(const As& as, Role role) const {
  const std::array<int, 3> pref{as.ic_level, as.ic_local, as.ic_layer};
  int wanted = -1;
  switch (role) {
    case Role::ic_level: wanted = as.ic_level; break;
    case Role::ic_local: wanted = as.ic_local; break;
    case Role::ic_layer: wanted = as.ic_layer; break;
    case Role::nn: wanted = -1; break;
  }
  if (wanted >= 0) return wanted;
  for (int k : pref)
    if (k >= 0) return k;
  return as.members.empty() ? -1 : as.members.front().key;
}

double Overlay::mean_head_distance(const Coordinate& c, const As& as) const {
  double sum = 0.0;
  int n = 0;
  for (int k : {as.ic_level, as.ic_local, as.ic_layer}) {
    if (k < 0) continue;
    sum += distance(c, find_member(as, k)->coord);
    ++n;
  }
  if (n == 0) {
    for (const auto& m : as.members) {
      sum += distance(c, m.coord);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / n;
}

std::uint32_t Overlay::next_node_index(const As& as) const {
  // Members stay sorted by node_index; take the smallest unused slot.
  std::uint32_t want = 0;
  for (const auto& m : as.members) {
    if (m.node_index == want)
      ++want;
    else if (m.node_index > want)
      break;
  }
  return want;
}

void Overlay::insert_member(As& as, Member m) {
  m.node_index = next_node_index(as);
  const auto pos = std::lower_bound(
      as.members.begin(), as.members.end(), m.node_index,
      [](const Member& a, std::uint32_t idx) { return a.node_index < idx; });
  peer_as_[m.key] = as.birth;
  if (static_cast<int>(coords_.size()) <= m.key)
    coords_.resize(static_cast<std::size_t>(m.key) + 1);
  coords_[static_cast<std::size_t>(m.key)] = m.coord;
  as.members.insert(pos, std::move(m));
  if (as.ic_level < 0 || as.ic_local < 0 || as.ic_layer < 0)
    vacancy_election(as);
}

Overlay::Member Overlay::remove_member(As& as, int key) {
  for (auto it = as.members.begin(); it != as.members.end(); ++it) {
    if (it->key != key) continue;
    Member out = std::move(*it);
    as.members.erase(it);
    peer_as_.erase(key);
    if (as.ic_level == key) as.ic_level = -1;
    if (as.ic_local == key) as.ic_local = -1;
    if (as.ic_layer == key) as.ic_layer = -1;
    return out;
  }
  throw std::out_of_range("remove_member: key not in cluster");
}

void Overlay::vacancy_election(As& as) {
  std::vector<ElectionCandidate> cands;
  cands.reserve(as.members.size());
  for (const auto& m : as.members)
    cands.push_back({m.key, m.sr, m.node_index});
  const Election e = elect_heads(cands);
  as.ic_level = e.ic_level;
  as.ic_local = e.ic_local;
  as.ic_layer = e.ic_layer;
}

int Overlay::promote_into(As& as, Role role, int& notified) {
  const Member* best = nullptr;
  for (const auto& m : as.members) {
    if (is_head(as, m.key)) continue;
    if (!best || m.sr > best->sr ||
        (m.sr == best->sr && m.node_index < best->node_index))
      best = &m;
  }
  if (!best) {
    // No normal node left to promote: re-run the priority election over
    // the remaining members and tell every neighbor class.
    vacancy_election(as);
    notify_level_neighbors(as, notified);
    notify_layer_neighbors(as, notified);
    return -1;
  }
  const int key = best->key;
  switch (role) {
    case Role::ic_level:
      as.ic_level = key;
      notify_level_neighbors(as, notified);
      break;
    case Role::ic_local:
      as.ic_local = key;
      // Local handover: every normal node relinks to the new local head.
      for (const auto& m : as.members)
        if (!is_head(as, m.key)) ++notified;
      break;
    case Role::ic_layer:
      as.ic_layer = key;
      notify_layer_neighbors(as, notified);
      break;
    case Role::nn:
      break;
  }
  return key;
}

std::vector<long long> Overlay::level_neighbors(const As& as) const {
  std::vector<long long> out;
  if (as.level_parent >= 0 && ases_.count(as.level_parent))
    out.push_back(as.level_parent);
  for (long long c : as.level_children)
    if (ases_.count(c)) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<long long> Overlay::layer_neighbors(const As& as) const {
  std::vector<long long> out;
  if (as.layer_parent >= 0 && ases_.count(as.layer_parent))
    out.push_back(as.layer_parent);
  for (long long c : as.layer_children)
    if (ases_.count(c)) out.push_back(c);
  for (long long b : as.bridge_links)
    if (ases_.count(b)) out.push_back(b);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void Overlay::notify_level_neighbors(const As& as, int& notified) {
  for (long long n : level_neighbors(as)) {
    ases_.at(n).known_level_heads[as.birth] = as.ic_level;
    ++notified;
  }
}

void Overlay::notify_layer_neighbors(const As& as, int& notified) {
  for (long long n : layer_neighbors(as)) {
    ases_.at(n).known_layer_heads[as.birth] = as.ic_layer;
    ++notified;
  }
}

void Overlay::rebuild_all_caches() {
  for (auto& [birth, as] : ases_) {
    as.known_level_heads.clear();
    as.known_layer_heads.clear();
    for (long long n : level_neighbors(as))
      as.known_level_heads[n] = as_at(n).ic_level;
    for (long long n : layer_neighbors(as))
      as.known_layer_heads[n] = as_at(n).ic_layer;
  }
}

void Overlay::refresh_backups() {
  for (auto& [birth, as] : ases_) {
    std::map<int, BackupEntry> fresh;
    for (const auto& m : as.members) {
      BackupEntry e;
      e.key = m.key;
      e.sr = m.sr;
      e.files = m.hosted;
      e.role = role_in(as, m.key);
      e.offline = false;
      fresh[m.key] = std::move(e);
    }
    // Departed members stay on record, flagged offline.
    for (const auto& [key, old] : as.member_backup)
      if (old.offline && !fresh.count(key)) fresh[key] = old;
    as.member_backup = std::move(fresh);
  }
  for (auto& [birth, as] : ases_) {
    as.level_child_backup.clear();
    for (long long c : as.level_children) {
      if (!ases_.count(c)) continue;
      const As& child = as_at(c);
      auto& vec = as.level_child_backup[c];
      for (const auto& m : child.members) {
        BackupEntry e;
        e.key = m.key;
        e.sr = m.sr;
        e.files = m.hosted;
        e.role = role_in(child, m.key);
        vec.push_back(std::move(e));
      }
    }
    as.layer_child_backup.clear();
    for (long long c : as.layer_children) {
      if (!ases_.count(c)) continue;
      const As& child = as_at(c);
      auto& vec = as.layer_child_backup[c];
      for (const auto& m : child.members)
        vec.push_back({m.key, m.sr});
    }
  }
}

void Overlay::update_backup_entry(As& as, int key) {
  const Member& m = member_at(as, key);
  BackupEntry e;
  e.key = m.key;
  e.sr = m.sr;
  e.files = m.hosted;
  e.role = role_in(as, key);
  e.offline = false;
  as.member_backup[key] = std::move(e);
  if (as.level_parent >= 0 && ases_.count(as.level_parent)) {
    auto& vec = as_at(as.level_parent).level_child_backup[as.birth];
    for (auto& entry : vec)
      if (entry.key == key) {
        entry.sr = m.sr;
        entry.files = m.hosted;
        entry.role = e.role;
      }
  }
  if (as.layer_parent >= 0 && ases_.count(as.layer_parent)) {
    auto& vec = as_at(as.layer_parent).layer_child_backup[as.birth];
    for (auto& entry : vec)
      if (entry.key == key) entry.sr = m.sr;
  }
}

void Overlay::recompute_sr(As& as, int key) {
  std::vector<int> evaluators;
  evaluators.reserve(as.members.size());
  for (const auto& m : as.members) evaluators.push_back(m.key);
  Member& m = member_at(as, key);
  m.sr = source_rank(key, evaluators, history_, coords_, params_.alpha_sim);
  update_backup_entry(as, key);
}

// ---------------------------------------------------------------------------
// shape: placement of clusters into the level and layer trees

void Overlay::reshape() {
  for (auto& [birth, as] : ases_) {
    as.layer = 0;
    as.level = 0;
    as.as_index = 0;
    as.level_parent = -1;
    as.layer_parent = -1;
    as.level_children.clear();
    as.layer_children.clear();
    as.bridge_links.clear();
  }
  if (order_.empty()) return;
  if (params_.legacy_level_width > 0)
    reshape_legacy();
  else
    reshape_canonical();
  // as_index: ordinal among clusters sharing (layer, level), by birth.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> counters;
  for (long long birth : order_) {
    As& as = as_at(birth);
    as.as_index = counters[{as.layer, as.level}]++;
  }
  for (auto& [birth, as] : ases_) {
    std::sort(as.level_children.begin(), as.level_children.end());
    std::sort(as.layer_children.begin(), as.layer_children.end());
    std::sort(as.bridge_links.begin(), as.bridge_links.end());
  }
}

void Overlay::reshape_canonical() {
  const long long m = static_cast<long long>(order_.size());
  if (m == 1) return;
  const int d = params_.d;
  const int hcap = height_cap(m, d);
  const long long cap = tree_capacity(hcap, d);

  // Balanced heap forest over birth order (level paths) and over reversed
  // birth order (layer paths). Tree sizes never exceed the height cap's
  // capacity, so both tree heights respect the height bound by build.
  auto place = [&](long long pos, long long& parent_pos, int& depth) {
    const long long local = pos % cap;
    depth = heap_depth(local, d);
    parent_pos = local == 0 ? -1 : pos - local + (local - 1) / d;
  };

  for (long long p = 0; p < m; ++p) {
    As& as = as_at(order_[static_cast<std::size_t>(p)]);
    long long par = -1;
    int depth = 0;
    place(p, par, depth);
    as.level = static_cast<std::uint32_t>(depth);
    if (par >= 0) {
      as.level_parent = order_[static_cast<std::size_t>(par)];
      as_at(as.level_parent).level_children.push_back(as.birth);
    }
    const long long q = m - 1 - p;  // slot in the reversed-order forest
    place(q, par, depth);
    as.layer = static_cast<std::uint32_t>(depth);
    if (par >= 0) {
      as.layer_parent = order_[static_cast<std::size_t>(m - 1 - par)];
      as_at(as.layer_parent).layer_children.push_back(as.birth);
    }
  }

  // Bridge chain: every layer-forest root in slot order, then the oldest
  // cluster. Roots carry no layer parent and the oldest cluster sits in a
  // layer-leaf slot, so the extra links stay inside the degree caps; the
  // chain also keeps the whole lattice connected whatever the forest cut.
  std::vector<long long> chain;
  for (long long q = 0; q < m; q += cap)
    chain.push_back(order_[static_cast<std::size_t>(m - 1 - q)]);
  chain.push_back(order_.front());
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const long long a = chain[i], b = chain[i + 1];
    if (a == b) continue;
    as_at(a).bridge_links.push_back(b);
    as_at(b).bridge_links.push_back(a);
  }

  // Bridge ring: layer-forest leaves, in slot order, each link to their next
  // (d+1)/2 ring neighbors. Leaves carry no layer children, so their layer
  // heads have link budget to spare; spending it here gives every leaf
  // cluster a short cut into clusters outside its own subtree instead of
  // routing everything through the roots. Links are refused when either
  // endpoint's layer head would exceed its degree cap (triangle + parent +
  // children + bridges), which protects the chain clusters above.
  std::vector<long long> leaves;
  for (long long q = 0; q < m; ++q) {
    const long long local = q % cap;
    if (local * d + 1 >= cap || (q - local) + local * d + 1 >= m)
      leaves.push_back(order_[static_cast<std::size_t>(m - 1 - q)]);
  }
  const std::size_t nleaves = leaves.size();
  const std::size_t la_cap = static_cast<std::size_t>(d) + 4;
  const auto la_degree = [&](long long birth) -> std::size_t {
    const As& as = as_at(birth);
    return 2 + (as.layer_parent >= 0 ? 1 : 0) + as.layer_children.size() +
           as.bridge_links.size();
  };
  for (std::size_t i = 0; i < nleaves; ++i) {
    for (int j = 1; j <= (d + 1) / 2; ++j) {
      const long long a = leaves[i];
      const long long b = leaves[(i + static_cast<std::size_t>(j)) % nleaves];
      if (a == b) continue;
      auto& links = as_at(a).bridge_links;
      if (std::find(links.begin(), links.end(), b) != links.end()) continue;
      if (la_degree(a) >= la_cap || la_degree(b) >= la_cap) continue;
      links.push_back(b);
      as_at(b).bridge_links.push_back(a);
    }
  }
}

void Overlay::reshape_legacy() {
  // Fixed-width growth: rows of `width` clusters per level, each linking up
  // to a parent in the row above; single layer.
  const long long width = params_.legacy_level_width;
  const int d = params_.d;
  const long long m = static_cast<long long>(order_.size());
  for (long long p = 0; p < m; ++p) {
    As& as = as_at(order_[static_cast<std::size_t>(p)]);
    const long long level = p / width;
    const long long idx = p % width;
    as.level = static_cast<std::uint32_t>(level);
    as.layer = 0;
    if (level > 0) {
      const long long parent_idx = std::min(idx / d, width - 1);
      const long long parent_pos = (level - 1) * width + parent_idx;
      as.level_parent = order_[static_cast<std::size_t>(parent_pos)];
      as_at(as.level_parent).level_children.push_back(as.birth);
    }
  }
}

void Overlay::erase_as(long long birth) {
  ases_.erase(birth);
  order_.erase(std::find(order_.begin(), order_.end(), birth));
}

// Clusters with fewer than three members cannot fill all three head roles;
// their members are folded into neighboring clusters (or, when everything
// else is full, members are pulled in from the nearest donor) so every
// cluster in a multi-cluster lattice keeps a complete head triple.
bool Overlay::consolidate_small_ases() {
  bool changed = false;
  for (;;) {
    if (order_.size() < 2) return changed;
    As* tiny = nullptr;
    for (long long birth : order_) {
      As& as = as_at(birth);
      if (static_cast<int>(as.members.size()) < 3) {
        tiny = &as;
        break;
      }
    }
    if (!tiny) return changed;
    changed = true;

    Coordinate centroid{};
    for (const auto& m : tiny->members) {
      centroid.x += m.coord.x;
      centroid.y += m.coord.y;
    }
    if (!tiny->members.empty()) {
      centroid.x /= static_cast<double>(tiny->members.size());
      centroid.y /= static_cast<double>(tiny->members.size());
    }

    auto nearest = [&](auto&& pred) -> As* {
      As* best = nullptr;
      double best_d = 0.0;
      for (long long birth : order_) {
        if (birth == tiny->birth) continue;
        As& as = as_at(birth);
        if (!pred(as)) continue;
        const double dd = mean_head_distance(centroid, as);
        if (!best || dd < best_d || (dd == best_d && birth < best->birth)) {
          best = &as;
          best_d = dd;
        }
      }
      return best;
    };

    bool absorbed_any = false;
    while (!tiny->members.empty()) {
      As* target = nearest([&](const As& as) {
        return static_cast<int>(as.members.size()) < params_.d + 3;
      });
      if (!target) break;
      Member m = remove_member(*tiny, tiny->members.front().key);
      insert_member(*target, std::move(m));
      absorbed_any = true;
    }
    if (tiny->members.empty()) {
      erase_as(tiny->birth);
      continue;
    }
    if (absorbed_any) continue;  // partially drained; retry this cluster

    // Everyone else is full: pull the lowest-ranked normal nodes from the
    // nearest donors until the cluster can staff its three head roles.
    while (static_cast<int>(tiny->members.size()) < 3) {
      As* donor = nearest(
          [&](const As& as) { return static_cast<int>(as.members.size()) > 3; });
      if (!donor) return changed;  // nothing can move; leave as is
      const Member* pick = nullptr;
      for (const auto& m : donor->members) {
        if (is_head(*donor, m.key)) continue;
        if (!pick || m.sr < pick->sr ||
            (m.sr == pick->sr && m.node_index < pick->node_index))
          pick = &m;
      }
      Member m = remove_member(*donor, pick->key);
      insert_member(*tiny, std::move(m));
    }
  }
}

void Overlay::epilogue(bool dirty) {
  if (consolidate_small_ases()) dirty = true;
  if (dirty) {
    reshape();
    rebuild_all_caches();
  }
  refresh_backups();
}

// ---------------------------------------------------------------------------
// join

long long Overlay::seed_new_as(Member m) {
  const long long birth = next_birth_++;
  ases_[birth].birth = birth;
  order_.push_back(birth);
  insert_member(ases_[birth], std::move(m));
  return birth;
}

JoinReport Overlay::join(const PeerSeed& peer) {
  if (live(peer.key))
    throw std::invalid_argument("join: peer is already live");
  const auto archived = retired_.find(peer.key);
  const bool resumed = archived != retired_.end();
  const double sr0 = resumed ? archived->second.sr : 0.0;
  std::vector<int> displaced;
  bool dirty = false;
  JoinReport rep = join_impl(peer, sr0, {}, 0, displaced, dirty);
  rep.displaced = std::move(displaced);
  if (rep.kind != JoinReport::Kind::rejected_whitewasher) {
    rep.resumed_sr = resumed;
    retired_.erase(peer.key);
  }
  epilogue(dirty);
  return rep;
}

JoinReport Overlay::join_impl(const PeerSeed& peer, double archived,
                              std::set<long long> excluded, int depth,
                              std::vector<int>& displaced, bool& dirty) {
  Member m;
  m.key = peer.key;
  m.coord = peer.coord;
  m.region = region_label(peer.coord, params_.spread, params_.region_cells);
  m.tolerance = peer.tolerance;
  m.sr = archived;
  m.hosted = peer.hosted;

  if (depth > params_.join_relocation_cap) {
    JoinReport rep;
    rep.kind = JoinReport::Kind::seeded;
    rep.as_birth = seed_new_as(std::move(m));
    dirty = true;
    return rep;
  }

  // Candidates: clusters sharing the newcomer's region label with some
  // member inside its tolerance radius, nearest head-average first.
  std::vector<std::pair<double, long long>> cands;
  for (long long birth : order_) {
    if (excluded.count(birth)) continue;
    const As& as = as_at(birth);
    bool region_ok = params_.region_cells <= 1;
    bool reach_ok = false;
    for (const auto& mem : as.members) {
      if (mem.region == m.region) region_ok = true;
      if (distance(m.coord, mem.coord) <= m.tolerance) reach_ok = true;
      if (region_ok && reach_ok) break;
    }
    if (region_ok && reach_ok)
      cands.emplace_back(mean_head_distance(m.coord, as), birth);
  }
  std::sort(cands.begin(), cands.end());

  if (cands.empty()) {
    JoinReport rep;
    rep.kind = JoinReport::Kind::seeded;
    rep.as_birth = seed_new_as(std::move(m));
    dirty = true;
    return rep;
  }

  for (std::size_t idx = 0; idx < cands.size(); ++idx) {
    const auto [davg, birth] = cands[idx];
    As& as = as_at(birth);
    if (idx > 0) {
      // Whitewasher gate: joining a cluster farther than the threshold
      // distance relative to the nearest candidate is refused outright.
      const double gate = threshold_distance(
          view_of(as_at(cands[0].second)), view_of(as), params_.role_weights);
      if (davg > gate) {
        JoinReport rep;
        rep.kind = JoinReport::Kind::rejected_whitewasher;
        return rep;
      }
    }
    if (auto rep = try_accept_into(as, m, excluded, depth, displaced, dirty))
      return *rep;
  }

  JoinReport rep;
  rep.kind = JoinReport::Kind::seeded;
  rep.as_birth = seed_new_as(std::move(m));
  dirty = true;
  return rep;
}

std::optional<JoinReport> Overlay::try_accept_into(
    As& as, Member& m, const std::set<long long>& excluded, int depth,
    std::vector<int>& displaced, bool& dirty) {
  const int capacity = params_.d + 3;
  JoinReport rep;
  rep.kind = JoinReport::Kind::accepted;
  rep.as_birth = as.birth;

  // Room available: plain accept.
  if (static_cast<int>(as.members.size()) < capacity) {
    insert_member(as, std::move(m));
    return rep;
  }

  std::set<long long> chain = excluded;
  chain.insert(as.birth);

  // Full cluster holding a free rider: drop exactly the lowest-ranked one.
  std::vector<double> srs;
  srs.reserve(as.members.size());
  for (const auto& mem : as.members) srs.push_back(mem.sr);
  const double threshold = min_ef(srs, params_.load_factor);
  const Member* rider = nullptr;
  for (const auto& mem : as.members) {
    if (!is_free_rider(mem.sr, threshold, is_head(as, mem.key))) continue;
    if (!rider || mem.sr < rider->sr ||
        (mem.sr == rider->sr && mem.node_index < rider->node_index))
      rider = &mem;
  }
  if (rider) {
    Member out = remove_member(as, rider->key);
    displaced.push_back(out.key);
    insert_member(as, std::move(m));
    relocate(std::move(out), chain, depth + 1, displaced, dirty);
    return rep;
  }

  // No rider: a newcomer closer than the farthest member displaces it.
  const double davg = mean_head_distance(m.coord, as);
  const Member* far = nullptr;
  double far_d = -1.0;
  for (const auto& mem : as.members) {
    const double dd = mean_head_distance(mem.coord, as);
    if (dd > far_d || (dd == far_d && far && mem.node_index < far->node_index)) {
      far = &mem;
      far_d = dd;
    }
  }
  if (far && far_d > davg) {
    const Role vacated = role_in(as, far->key);
    Member out = remove_member(as, far->key);
    displaced.push_back(out.key);
    if (vacated != Role::nn) {
      int notified = 0;
      promote_into(as, vacated, notified);
    }
    insert_member(as, std::move(m));
    relocate(std::move(out), chain, depth + 1, displaced, dirty);
    return rep;
  }
  return std::nullopt;
}

void Overlay::relocate(Member m, std::set<long long> excluded, int depth,
                       std::vector<int>& displaced, bool& dirty) {
  PeerSeed seed;
  seed.key = m.key;
  seed.coord = m.coord;
  seed.hosted = m.hosted;
  seed.tolerance = m.tolerance;
  const JoinReport rep =
      join_impl(seed, m.sr, std::move(excluded), depth, displaced, dirty);
  if (rep.kind == JoinReport::Kind::rejected_whitewasher) {
    // A displaced member must land somewhere: give it a fresh cluster.
    seed_new_as(std::move(m));
    dirty = true;
  }
}

JoinReport Overlay::join_targeting(const PeerSeed& peer, long long as_birth) {
  if (live(peer.key))
    throw std::invalid_argument("join: peer is already live");
  if (!ases_.count(as_birth))
    throw std::invalid_argument("join: no such cluster");
  const auto archived = retired_.find(peer.key);
  const bool resumed = archived != retired_.end();
  const double sr0 = resumed ? archived->second.sr : 0.0;

  Member m;
  m.key = peer.key;
  m.coord = peer.coord;
  m.region = region_label(peer.coord, params_.spread, params_.region_cells);
  m.tolerance = peer.tolerance;
  m.sr = sr0;
  m.hosted = peer.hosted;

  // Gate the target against the nearest candidate's threshold distance.
  long long nearest = -1;
  double nearest_d = 0.0;
  for (long long birth : order_) {
    const double dd = mean_head_distance(m.coord, as_at(birth));
    if (nearest < 0 || dd < nearest_d) {
      nearest = birth;
      nearest_d = dd;
    }
  }
  std::vector<int> displaced;
  bool dirty = false;
  JoinReport rep;
  if (nearest >= 0 && nearest != as_birth) {
    const double gate = threshold_distance(
        view_of(as_at(nearest)), view_of(as_at(as_birth)), params_.role_weights);
    if (mean_head_distance(m.coord, as_at(as_birth)) > gate) {
      rep.kind = JoinReport::Kind::rejected_whitewasher;
      epilogue(false);
      return rep;
    }
  }
  auto attempt =
      try_accept_into(as_at(as_birth), m, {}, 0, displaced, dirty);
  if (attempt) {
    rep = *attempt;
    rep.displaced = std::move(displaced);
    rep.resumed_sr = resumed;
    retired_.erase(peer.key);
    epilogue(dirty);
    return rep;
  }
  // Target cannot take the peer; fall back to the regular join flow.
  epilogue(dirty);
  return join(peer);
}

// ---------------------------------------------------------------------------
// departures

LeaveReport Overlay::leave_normal(int key) {
  if (!live(key)) throw std::invalid_argument("leave: peer not live");
  const long long birth = peer_as_.at(key);
  As& as = as_at(birth);
  LeaveReport rep;
  rep.vacated = role_in(as, key);

  const Member& m = member_at(as, key);
  const NodeId id{as.layer, as.level, as.as_index, m.node_index};
  retired_[key] = RetiredRecord{m.sr, encode_id(id)};

  Member out = remove_member(as, key);
  bool dirty = false;
  if (as.members.empty()) {
    erase_as(birth);
    epilogue(true);
    return rep;
  }
  if (rep.vacated == Role::nn) {
    // Normal departure: the local head keeps the record, flagged offline.
    BackupEntry e;
    e.key = out.key;
    e.sr = out.sr;
    e.files = out.hosted;
    e.role = Role::nn;
    e.offline = true;
    as.member_backup[out.key] = std::move(e);
    rep.notified = 1;
  } else {
    rep.promoted = promote_into(as, rep.vacated, rep.notified);
  }
  if (static_cast<int>(as.members.size()) < 3) dirty = true;
  epilogue(dirty);
  return rep;
}

RecoveryReport Overlay::crash(const std::vector<int>& keys) {
  for (int k : keys)
    if (!live(k)) throw std::invalid_argument("crash: peer not live");
  RecoveryReport rep;
  std::map<long long, std::vector<int>> per_as;
  for (int k : keys) per_as[peer_as_.at(k)].push_back(k);
  bool dirty = false;

  for (auto& [birth, victims] : per_as) {
    std::sort(victims.begin(), victims.end());
    As& as = as_at(birth);
    std::vector<int> pre_heads;
    for (int h : {as.ic_level, as.ic_local, as.ic_layer})
      if (h >= 0) pre_heads.push_back(h);
    const bool all_heads_dead =
        !pre_heads.empty() &&
        std::all_of(pre_heads.begin(), pre_heads.end(), [&](int h) {
          return std::binary_search(victims.begin(), victims.end(), h);
        });

    for (int v : victims) {
      const Member& m = member_at(as, v);
      const NodeId id{as.layer, as.level, as.as_index, m.node_index};
      retired_[v] = RetiredRecord{m.sr, encode_id(id)};
      Member out = remove_member(as, v);
      BackupEntry e;
      e.key = out.key;
      e.sr = out.sr;
      e.files = out.hosted;
      e.role = Role::nn;
      e.offline = true;
      as.member_backup[out.key] = std::move(e);
    }

    if (as.members.empty()) {
      rep.defunct.push_back(birth);
      erase_as(birth);
      dirty = true;
      continue;
    }

    if (all_heads_dead) {
      // Every head died at once: rebuild from the stored copies. The level
      // parent holds the full (files included) backup; the layer parent
      // only identity and rank; failing both, survivors reorganize alone.
      std::string path = "self";
      if (as.level_parent >= 0 && ases_.count(as.level_parent)) {
        path = "level_backup";
        const auto it =
            as_at(as.level_parent).level_child_backup.find(birth);
        if (it != as_at(as.level_parent).level_child_backup.end()) {
          for (const auto& entry : it->second) {
            if (!find_member(as, entry.key)) continue;
            Member& m = member_at(as, entry.key);
            m.sr = entry.sr;
            m.hosted = entry.files;
          }
        }
      } else if (as.layer_parent >= 0 && ases_.count(as.layer_parent)) {
        path = "layer_backup";
        const auto it =
            as_at(as.layer_parent).layer_child_backup.find(birth);
        if (it != as_at(as.layer_parent).layer_child_backup.end()) {
          for (const auto& entry : it->second) {
            if (!find_member(as, entry.key)) continue;
            member_at(as, entry.key).sr = entry.sr;
          }
        }
      }
      vacancy_election(as);
      int notified = 0;
      notify_level_neighbors(as, notified);
      notify_layer_neighbors(as, notified);
      rep.full_recoveries.push_back(
          {birth, path, as.ic_level, as.ic_local, as.ic_layer});
    } else {
      for (Role role : {Role::ic_level, Role::ic_local, Role::ic_layer}) {
        const bool vacant = (role == Role::ic_level && as.ic_level < 0) ||
                            (role == Role::ic_local && as.ic_local < 0) ||
                            (role == Role::ic_layer && as.ic_layer < 0);
        if (!vacant) continue;
        int notified = 0;
        const int promoted = promote_into(as, role, notified);
        if (promoted >= 0) rep.promotions.emplace_back(birth, promoted);
      }
    }
    if (static_cast<int>(as.members.size()) < 3) dirty = true;
  }
  epilogue(dirty);
  return rep;
}

std::vector<ExchangeEvent> Overlay::burst_update(int key, NodeStatus status) {
  if (!live(key)) throw std::invalid_argument("burst: peer not live");
  As& as = as_at(peer_as_.at(key));
  Member& m = member_at(as, key);
  const NodeStatus old = m.status;
  m.status = status;
  if (old == NodeStatus::free || status != NodeStatus::free) return {};
  // (busy|normal) -> free: one exchange with the local head, refreshing the
  // stored records; children refresh their cached view of this cluster.
  update_backup_entry(as, key);
  for (long long c : as.level_children)
    if (ases_.count(c)) as_at(c).known_level_heads[as.birth] = as.ic_level;
  for (long long c : as.layer_children)
    if (ases_.count(c)) as_at(c).known_layer_heads[as.birth] = as.ic_layer;
  return {ExchangeEvent{key, acting_head(as, Role::ic_local)}};
}

void Overlay::record_service(int client, int server, double qsim,
                             double duration) {
  history_.record(client, server, qsim, duration);
  const auto it = peer_as_.find(server);
  if (it != peer_as_.end()) recompute_sr(as_at(it->second), server);
}

void Overlay::reelect_all() {
  for (auto& [birth, as] : ases_) vacancy_election(as);
  rebuild_all_caches();
  refresh_backups();
}

// ---------------------------------------------------------------------------
// inspection

bool Overlay::live(int key) const { return peer_as_.count(key) > 0; }

long long Overlay::as_count() const {
  return static_cast<long long>(order_.size());
}

int Overlay::peer_count() const { return static_cast<int>(peer_as_.size()); }

std::vector<int> Overlay::live_keys() const {
  std::vector<int> out;
  out.reserve(peer_as_.size());
  for (const auto& [k, birth] : peer_as_) out.push_back(k);
  return out;
}

double Overlay::sr_of(int key) const {
  const long long birth = peer_as_.at(key);
  return find_member(as_at(birth), key)->sr;
}

Role Overlay::role_of(int key) const {
  const long long birth = peer_as_.at(key);
  return role_in(as_at(birth), key);
}

NodeStatus Overlay::status_of(int key) const {
  const long long birth = peer_as_.at(key);
  return find_member(as_at(birth), key)->status;
}

std::optional<double> Overlay::archived_sr(int key) const {
  const auto it = retired_.find(key);
  if (it == retired_.end()) return std::nullopt;
  return it->second.sr;
}

std::map<long long, int> Overlay::known_level_heads(long long birth) const {
  return as_at(birth).known_level_heads;
}

std::map<long long, int> Overlay::known_layer_heads(long long birth) const {
  return as_at(birth).known_layer_heads;
}

int Overlay::level_count() const {
  int top = -1;
  for (long long birth : order_)
    top = std::max(top, static_cast<int>(as_at(birth).level));
  return top + 1;
}

int Overlay::layer_count() const {
  int top = -1;
  for (long long birth : order_)
    top = std::max(top, static_cast<int>(as_at(birth).layer));
  return top + 1;
}

std::vector<int> Overlay::cluster_index(const As& as) const {
  std::vector<int> files;
  for (const auto& m : as.members)
    files.insert(files.end(), m.hosted.begin(), m.hosted.end());
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

Graph Overlay::as_graph(int min_size) const {
  int n = min_size;
  for (const auto& [key, birth] : peer_as_) n = std::max(n, key + 1);
  Graph g(n);
  for (long long birth : order_) {
    const As& as = as_at(birth);
    const int hlv = acting_head(as, Role::ic_level);
    const int hlo = acting_head(as, Role::ic_local);
    const int hla = acting_head(as, Role::ic_layer);
    // Star of normal nodes around the local head, triangle between heads.
    for (const auto& m : as.members) {
      if (!is_head(as, m.key)) g.add_edge(m.key, hlo);
      g.set_hosted(m.key, m.hosted);
    }
    for (int a : {as.ic_level, as.ic_local, as.ic_layer})
      for (int b : {as.ic_level, as.ic_local, as.ic_layer})
        if (a >= 0 && b >= 0 && a < b) g.add_edge(a, b);
    // Tree links and bridge links.
    if (as.level_parent >= 0 && ases_.count(as.level_parent))
      g.add_edge(hlv, acting_head(as_at(as.level_parent), Role::ic_level));
    if (as.layer_parent >= 0 && ases_.count(as.layer_parent))
      g.add_edge(hla, acting_head(as_at(as.layer_parent), Role::ic_layer));
    for (long long b : as.bridge_links)
      if (b > birth && ases_.count(b))
        g.add_edge(hla, acting_head(as_at(b), Role::ic_layer));
  }
  // Heads answer for the content they index: every head resolves its own
  // cluster's files; the level head also resolves its level children's.
  for (long long birth : order_) {
    const As& as = as_at(birth);
    const std::vector<int> own = cluster_index(as);
    for (int head : {as.ic_local, as.ic_layer})
      if (head >= 0) g.set_answerable(head, own);
    if (as.ic_level >= 0) {
      std::vector<int> idx = own;
      for (long long c : as.level_children) {
        if (!ases_.count(c)) continue;
        const std::vector<int> child = cluster_index(as_at(c));
        idx.insert(idx.end(), child.begin(), child.end());
      }
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      g.set_answerable(as.ic_level, idx);
    }
  }
  return g;
}

std::map<int, NodeId> Overlay::node_ids() const {
  std::map<int, NodeId> out;
  for (long long birth : order_) {
    const As& as = as_at(birth);
    for (const auto& m : as.members)
      out[m.key] = NodeId{as.layer, as.level, as.as_index, m.node_index};
  }
  return out;
}

AsView Overlay::view_of(const As& as) const {
  AsView v;
  v.birth = as.birth;
  v.layer = as.layer;
  v.level = as.level;
  v.as_index = as.as_index;
  v.ic_level = as.ic_level;
  v.ic_local = as.ic_local;
  v.ic_layer = as.ic_layer;
  v.level_parent = as.level_parent;
  v.layer_parent = as.layer_parent;
  v.level_children = as.level_children;
  v.layer_children = as.layer_children;
  v.bridge_links = as.bridge_links;
  for (const auto& m : as.members) {
    MemberView mv;
    mv.key = m.key;
    mv.node_index = m.node_index;
    mv.sr = m.sr;
    mv.role = role_in(as, m.key);
    mv.status = m.status;
    mv.coord = m.coord;
    mv.hosted = m.hosted;
    v.members.push_back(std::move(mv));
  }
  return v;
}

std::vector<AsView> Overlay::ases() const {
  std::vector<AsView> out;
  out.reserve(order_.size());
  for (long long birth : order_) out.push_back(view_of(as_at(birth)));
  return out;
}

std::optional<AsView> Overlay::as_of(int key) const {
  const auto it = peer_as_.find(key);
  if (it == peer_as_.end()) return std::nullopt;
  return view_of(as_at(it->second));
}

StructureReport Overlay::check_structure() const {
  StructureReport r;
  r.as_count = as_count();
  r.level_count = level_count();
  r.layer_count = layer_count();
  if (order_.empty()) return r;
  const int d = params_.d;
  const Graph g = as_graph();

  // Membership partition.
  std::size_t total = 0;
  std::set<int> seen;
  for (long long birth : order_) {
    const As& as = as_at(birth);
    total += as.members.size();
    for (const auto& m : as.members) {
      if (!seen.insert(m.key).second)
        r.violations.push_back("peer " + std::to_string(m.key) +
                               " sits in two clusters");
      const auto it = peer_as_.find(m.key);
      if (it == peer_as_.end() || it->second != birth)
        r.violations.push_back("peer " + std::to_string(m.key) +
                               " membership map out of sync");
    }
    if (static_cast<int>(as.members.size()) > d + 3)
      r.violations.push_back("cluster " + std::to_string(birth) +
                             " exceeds capacity");
  }
  if (total != peer_as_.size())
    r.violations.push_back("membership partition does not cover every peer");

  // Head roles: distinct members; vacancy only in priority order and only
  // while the cluster has fewer than three members.
  for (long long birth : order_) {
    const As& as = as_at(birth);
    const int n = static_cast<int>(as.members.size());
    const std::array<int, 3> heads{as.ic_level, as.ic_local, as.ic_layer};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j)
        if (heads[i] >= 0 && heads[i] == heads[j])
          r.violations.push_back("cluster " + std::to_string(birth) +
                                 " reuses one member for two head roles");
    for (int h : heads)
      if (h >= 0 && !find_member(as, h))
        r.violations.push_back("cluster " + std::to_string(birth) +
                               " names a non-member head");
    const int expect = std::min(n, 3);
    const int have = static_cast<int>(std::count_if(
        heads.begin(), heads.end(), [](int h) { return h >= 0; }));
    if (have != expect)
      r.violations.push_back("cluster " + std::to_string(birth) +
                             " head count " + std::to_string(have) +
                             " != " + std::to_string(expect));
    if (n == 1 && as.ic_level < 0)
      r.violations.push_back("cluster " + std::to_string(birth) +
                             " must give its only member the level role");
    if (n == 2 && (as.ic_level < 0 || as.ic_local < 0))
      r.violations.push_back("cluster " + std::to_string(birth) +
                             " vacancy out of priority order");
  }

  // Degree caps per role.
  for (long long birth : order_) {
    const As& as = as_at(birth);
    for (const auto& m : as.members) {
      const int deg = g.degree(m.key);
      r.max_degree = std::max(r.max_degree, deg);
      const Role role = role_in(as, m.key);
      int cap = 0;
      switch (role) {
        case Role::nn: cap = 1; break;
        case Role::ic_local: cap = d + 2; break;
        case Role::ic_level: cap = d + 3; break;
        case Role::ic_layer: cap = d + 4; break;
      }
      if (role == Role::nn && deg != 1 && order_.size() > 1)
        r.violations.push_back("normal node " + std::to_string(m.key) +
                               " degree " + std::to_string(deg) + " != 1");
      if (deg > cap)
        r.violations.push_back(role_name(role) + " " + std::to_string(m.key) +
                               " degree " + std::to_string(deg) + " > cap " +
                               std::to_string(cap));
    }
  }

  // Height bounds, meaningful once the lattice holds at least d clusters.
  const long long m = static_cast<long long>(order_.size());
  if (m >= d) {
    if (!pow_less(d, r.level_count - 1, m))
      r.violations.push_back("level count " + std::to_string(r.level_count) +
                             " breaks the height bound for " +
                             std::to_string(m) + " clusters");
    if (!pow_less(d, r.layer_count - 1, m))
      r.violations.push_back("layer count " + std::to_string(r.layer_count) +
                             " breaks the height bound for " +
                             std::to_string(m) + " clusters");
  }

  // Identifier uniqueness.
  {
    std::set<Packed128> ids;
    for (const auto& [key, id] : node_ids())
      if (!ids.insert(encode_id(id)).second)
        r.violations.push_back("duplicate packed identifier for peer " +
                               std::to_string(key));
  }

  // Cached neighbor views must match the live head assignments.
  for (long long birth : order_) {
    const As& as = as_at(birth);
    const auto lv = level_neighbors(as);
    if (lv.size() != as.known_level_heads.size())
      r.violations.push_back("cluster " + std::to_string(birth) +
                             " level-neighbor cache size mismatch");
    for (long long nb : lv) {
      const auto it = as.known_level_heads.find(nb);
      if (it == as.known_level_heads.end() ||
          it->second != as_at(nb).ic_level)
        r.violations.push_back("cluster " + std::to_string(birth) +
                               " has a stale level head for neighbor " +
                               std::to_string(nb));
    }
    const auto ly = layer_neighbors(as);
    if (ly.size() != as.known_layer_heads.size())
      r.violations.push_back("cluster " + std::to_string(birth) +
                             " layer-neighbor cache size mismatch");
    for (long long nb : ly) {
      const auto it = as.known_layer_heads.find(nb);
      if (it == as.known_layer_heads.end() ||
          it->second != as_at(nb).ic_layer)
        r.violations.push_back("cluster " + std::to_string(birth) +
                               " has a stale layer head for neighbor " +
                               std::to_string(nb));
    }
  }

  // Stored copies must track the live state exactly.
  for (long long birth : order_) {
    const As& as = as_at(birth);
    for (const auto& m : as.members) {
      const auto it = as.member_backup.find(m.key);
      if (it == as.member_backup.end() || it->second.offline ||
          it->second.sr != m.sr || it->second.files != m.hosted)
        r.violations.push_back("cluster " + std::to_string(birth) +
                               " holds a stale record for member " +
                               std::to_string(m.key));
    }
    if (as.level_parent >= 0 && ases_.count(as.level_parent)) {
      const As& parent = as_at(as.level_parent);
      const auto it = parent.level_child_backup.find(birth);
      bool ok = it != parent.level_child_backup.end() &&
                it->second.size() == as.members.size();
      if (ok) {
        for (const auto& entry : it->second) {
          const Member* m = find_member(as, entry.key);
          if (!m || m->sr != entry.sr || m->hosted != entry.files) {
            ok = false;
            break;
          }
        }
      }
      if (!ok)
        r.violations.push_back("level parent of cluster " +
                               std::to_string(birth) +
                               " holds a stale full backup");
    }
    if (as.layer_parent >= 0 && ases_.count(as.layer_parent)) {
      const As& parent = as_at(as.layer_parent);
      const auto it = parent.layer_child_backup.find(birth);
      bool ok = it != parent.layer_child_backup.end() &&
                it->second.size() == as.members.size();
      if (ok) {
        for (const auto& entry : it->second) {
          const Member* m = find_member(as, entry.key);
          if (!m || m->sr != entry.sr) {
            ok = false;
            break;
          }
        }
      }
      if (!ok)
        r.violations.push_back("layer parent of cluster " +
                               std::to_string(birth) +
                               " holds a stale slim backup");
    }
  }
  return r;
}

nlohmann::json Overlay::to_json() const {
  nlohmann::json j;
  j["d"] = params_.d;
  j["as_count"] = as_count();
  j["level_count"] = level_count();
  j["layer_count"] = layer_count();

  nlohmann::json ases = nlohmann::json::array();
  nlohmann::json roles = nlohmann::json::object();
  for (long long birth : order_) {
    const As& as = as_at(birth);
    nlohmann::json a;
    a["birth"] = birth;
    a["layer"] = as.layer;
    a["level"] = as.level;
    a["as_index"] = as.as_index;
    a["heads"] = {{"ic_level", as.ic_level},
                  {"ic_local", as.ic_local},
                  {"ic_layer", as.ic_layer}};
    a["level_parent"] = as.level_parent;
    a["layer_parent"] = as.layer_parent;
    a["level_children"] = as.level_children;
    a["layer_children"] = as.layer_children;
    a["bridge_links"] = as.bridge_links;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : as.members) {
      nlohmann::json mm;
      mm["key"] = m.key;
      mm["node_index"] = m.node_index;
      mm["id"] = to_string(NodeId{as.layer, as.level, as.as_index,
                                  m.node_index});
      mm["sr"] = m.sr;
      mm["status"] = m.status == NodeStatus::free
                         ? "free"
                         : (m.status == NodeStatus::busy ? "busy" : "normal");
      mm["hosted"] = m.hosted;
      members.push_back(std::move(mm));
      roles[std::to_string(m.key)] = role_name(role_in(as, m.key));
    }
    a["members"] = std::move(members);
    ases.push_back(std::move(a));
  }
  j["ases"] = std::move(ases);
  j["roles"] = std::move(roles);

  const Graph g = as_graph();
  nlohmann::json edges = nlohmann::json::array();
  for (int v = 0; v < g.node_count(); ++v)
    for (int u : g.neighbors(v))
      if (v < u) edges.push_back({v, u});
  j["edges"] = std::move(edges);

  nlohmann::json retired = nlohmann::json::array();
  for (const auto& [key, rec] : retired_)
    retired.push_back({{"key", key}, {"sr", rec.sr}});
  j["retired"] = std::move(retired);
  return j;
}

StructureReport check_snapshot(const nlohmann::json& snapshot) {
  StructureReport r;
  const int d = snapshot.at("d").get<int>();
  const long long m = snapshot.at("as_count").get<long long>();
  r.as_count = m;
  r.level_count = snapshot.at("level_count").get<int>();
  r.layer_count = snapshot.at("layer_count").get<int>();

  std::map<int, int> degree;
  for (const auto& e : snapshot.at("edges")) {
    ++degree[e.at(0).get<int>()];
    ++degree[e.at(1).get<int>()];
  }
  for (const auto& [key_str, role_str] :
       snapshot.at("roles").items()) {
    const int key = std::stoi(key_str);
    const Role role = parse_role(role_str.get<std::string>());
    const int deg = degree.count(key) ? degree[key] : 0;
    r.max_degree = std::max(r.max_degree, deg);
    int cap = 0;
    switch (role) {
      case Role::nn: cap = 1; break;
      case Role::ic_local: cap = d + 2; break;
      case Role::ic_level: cap = d + 3; break;
      case Role::ic_layer: cap = d + 4; break;
    }
    if (deg > cap)
      r.violations.push_back(role_name(role) + " " + std::to_string(key) +
                             " degree " + std::to_string(deg) + " > cap " +
                             std::to_string(cap));
    if (role == Role::nn && deg != 1 && m > 1)
      r.violations.push_back("normal node " + std::to_string(key) +
                             " degree " + std::to_string(deg) + " != 1");
  }

  if (m >= d) {
    if (!pow_less(d, r.level_count - 1, m))
      r.violations.push_back("level count breaks the height bound");
    if (!pow_less(d, r.layer_count - 1, m))
      r.violations.push_back("layer count breaks the height bound");
  }

  std::set<std::string> ids;
  for (const auto& a : snapshot.at("ases"))
    for (const auto& mem : a.at("members"))
      if (!ids.insert(mem.at("id").get<std::string>()).second)
        r.violations.push_back("duplicate identifier " +
                               mem.at("id").get<std::string>());
  return r;
}

}  // namespace mpo
