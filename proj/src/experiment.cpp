#include "mpo/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "mpo/geometry.hpp"

namespace mpo {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

long long parse_int_token(const std::string& field, const std::string& raw) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + field + ": expected an integer, got '" +
                      raw + "'");
  }
}

double parse_real_token(const std::string& field, const std::string& raw) {
  try {
    std::size_t pos = 0;
    double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + field + ": expected a number, got '" +
                      raw + "'");
  }
}

// Splits a comma-separated value into trimmed tokens; an empty value means
// an empty list. Empty tokens inside a non-empty list are rejected by the
// typed getters (they carry the per-index field path).
std::vector<std::string> split_csv(const std::string& value) {
  std::vector<std::string> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!value.empty() && value.back() == ',') out.push_back("");
  return out;
}

std::string indexed(const std::string& key, std::size_t i) {
  return key + "[" + std::to_string(i) + "]";
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text) {
  KvConfig kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": empty key");
    for (char c : key) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
        throw ConfigError("config: line " + std::to_string(line_no) +
                          ": invalid key '" + key + "'");
    }
    if (!kv.values_.emplace(key, value).second)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
  }
  return kv;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_text(buf.str());
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::vector<std::string> KvConfig::keys() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_int_token(key, it->second);
}

double KvConfig::get_real(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_real_token(key, it->second);
}

std::vector<std::string> KvConfig::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  auto tokens = split_csv(it->second);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty())
      throw ConfigError("config: " + indexed(key, i) + ": empty entry");
  }
  return tokens;
}

std::vector<long long> KvConfig::get_int_list(
    const std::string& key, const std::vector<long long>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  auto tokens = split_csv(it->second);
  std::vector<long long> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.push_back(parse_int_token(indexed(key, i), tokens[i]));
  return out;
}

std::vector<double> KvConfig::get_real_list(
    const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  auto tokens = split_csv(it->second);
  std::vector<double> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.push_back(parse_real_token(indexed(key, i), tokens[i]));
  return out;
}

namespace {

int to_int_field(const std::string& field, long long v) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config: " + field + ": " + std::to_string(v) +
                      " is out of range");
  return static_cast<int>(v);
}

Algorithm parse_algorithm_field(const std::string& field,
                                const std::string& name) {
  Algorithm alg;
  if (!parse_algorithm(name, alg))
    throw ConfigError("config: " + field + ": unknown algorithm '" + name +
                      "'");
  return alg;
}

const char* churn_mode_name(ChurnMode m) {
  return m == ChurnMode::crash ? "crash" : "graceful";
}

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  static const std::set<std::string> known = {
      "topologies", "n", "seeds", "n_queries", "ttls", "algorithms", "walks",
      "stop_after", "churn_fractions", "churn_mode", "churn_algorithm",
      "churn_ttl", "catalog_files", "catalog_alpha", "catalog_replicas",
      "mpo_d", "mpo_fill", "mpo_spread", "mpo_region_cells",
      "mpo_warmup_exchanges", "rtpl_omega", "rtpl_alpha", "supernode_c_min",
      "supernode_c_max", "supernode_sp_links", "supernode_sp_links_spread",
      "squareroot_d_max", "squareroot_d_min", "squareroot_d0",
      "squareroot_batch", "squareroot_walk_ttl", "squareroot_walks",
      "squareroot_warmup", "out_dir"};
  for (const std::string& key : kv.keys()) {
    if (!known.count(key))
      throw ConfigError("config: unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  cfg.topologies = kv.get_string_list("topologies", cfg.topologies);
  cfg.n = to_int_field("n", kv.get_int("n", cfg.n));

  {
    std::vector<long long> def(cfg.seeds.begin(), cfg.seeds.end());
    auto raw = kv.get_int_list("seeds", def);
    cfg.seeds.clear();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] < 0)
        throw ConfigError("config: " + indexed("seeds", i) +
                          ": must be >= 0");
      cfg.seeds.push_back(static_cast<std::uint64_t>(raw[i]));
    }
  }

  cfg.n_queries = to_int_field("n_queries", kv.get_int("n_queries",
                                                       cfg.n_queries));
  {
    std::vector<long long> def(cfg.ttls.begin(), cfg.ttls.end());
    auto raw = kv.get_int_list("ttls", def);
    cfg.ttls.clear();
    for (std::size_t i = 0; i < raw.size(); ++i)
      cfg.ttls.push_back(to_int_field(indexed("ttls", i), raw[i]));
  }
  {
    std::vector<std::string> def;
    for (Algorithm a : cfg.algorithms) def.push_back(algorithm_name(a));
    auto raw = kv.get_string_list("algorithms", def);
    cfg.algorithms.clear();
    for (std::size_t i = 0; i < raw.size(); ++i)
      cfg.algorithms.push_back(
          parse_algorithm_field(indexed("algorithms", i), raw[i]));
  }
  cfg.walks = to_int_field("walks", kv.get_int("walks", cfg.walks));
  cfg.stop_after =
      to_int_field("stop_after", kv.get_int("stop_after", cfg.stop_after));

  cfg.churn_fractions =
      kv.get_real_list("churn_fractions", cfg.churn_fractions);
  {
    const std::string mode =
        kv.get_string("churn_mode", churn_mode_name(cfg.churn_mode));
    if (mode == "crash") {
      cfg.churn_mode = ChurnMode::crash;
    } else if (mode == "graceful") {
      cfg.churn_mode = ChurnMode::graceful;
    } else {
      throw ConfigError("config: churn_mode: unknown mode '" + mode + "'");
    }
  }
  cfg.churn_algorithm = parse_algorithm_field(
      "churn_algorithm",
      kv.get_string("churn_algorithm", algorithm_name(cfg.churn_algorithm)));
  cfg.churn_ttl =
      to_int_field("churn_ttl", kv.get_int("churn_ttl", cfg.churn_ttl));

  cfg.catalog_files = to_int_field(
      "catalog_files", kv.get_int("catalog_files", cfg.catalog_files));
  cfg.catalog_alpha = kv.get_real("catalog_alpha", cfg.catalog_alpha);
  cfg.catalog_replicas = to_int_field(
      "catalog_replicas", kv.get_int("catalog_replicas",
                                     cfg.catalog_replicas));

  cfg.mpo_d = to_int_field("mpo_d", kv.get_int("mpo_d", cfg.mpo_d));
  cfg.mpo_fill = to_int_field("mpo_fill", kv.get_int("mpo_fill",
                                                     cfg.mpo_fill));
  cfg.mpo_spread = kv.get_real("mpo_spread", cfg.mpo_spread);
  cfg.mpo_region_cells = to_int_field(
      "mpo_region_cells", kv.get_int("mpo_region_cells",
                                     cfg.mpo_region_cells));
  cfg.mpo_warmup_exchanges = to_int_field(
      "mpo_warmup_exchanges",
      kv.get_int("mpo_warmup_exchanges", cfg.mpo_warmup_exchanges));

  cfg.rtpl_omega = kv.get_real("rtpl_omega", cfg.rtpl_omega);
  cfg.rtpl_alpha = kv.get_real("rtpl_alpha", cfg.rtpl_alpha);

  cfg.supernode.c_min = to_int_field(
      "supernode_c_min", kv.get_int("supernode_c_min", cfg.supernode.c_min));
  cfg.supernode.c_max = to_int_field(
      "supernode_c_max", kv.get_int("supernode_c_max", cfg.supernode.c_max));
  cfg.supernode.sp_links = to_int_field(
      "supernode_sp_links",
      kv.get_int("supernode_sp_links", cfg.supernode.sp_links));
  cfg.supernode.sp_links_spread = to_int_field(
      "supernode_sp_links_spread",
      kv.get_int("supernode_sp_links_spread",
                 cfg.supernode.sp_links_spread));

  cfg.squareroot.d_max = to_int_field(
      "squareroot_d_max", kv.get_int("squareroot_d_max",
                                     cfg.squareroot.d_max));
  cfg.squareroot.d_min = to_int_field(
      "squareroot_d_min", kv.get_int("squareroot_d_min",
                                     cfg.squareroot.d_min));
  cfg.squareroot.d0 =
      to_int_field("squareroot_d0", kv.get_int("squareroot_d0",
                                               cfg.squareroot.d0));
  cfg.squareroot.batch = to_int_field(
      "squareroot_batch", kv.get_int("squareroot_batch",
                                     cfg.squareroot.batch));
  cfg.squareroot.walk_ttl = to_int_field(
      "squareroot_walk_ttl",
      kv.get_int("squareroot_walk_ttl", cfg.squareroot.walk_ttl));
  cfg.squareroot.walks = to_int_field(
      "squareroot_walks", kv.get_int("squareroot_walks",
                                     cfg.squareroot.walks));
  cfg.squareroot_warmup = to_int_field(
      "squareroot_warmup", kv.get_int("squareroot_warmup",
                                      cfg.squareroot_warmup));

  cfg.out_dir = kv.get_string("out_dir", cfg.out_dir);

  cfg.resolve();
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

void ExperimentConfig::resolve() {
  struct Calibration {
    int d;
    int fill;
    double omega;
    int d_max;
  };
  const Calibration cal = n <= 750    ? Calibration{7, 9, 18.0, 40}
                          : n <= 1250 ? Calibration{9, 10, 24.0, 65}
                          : n <= 1750 ? Calibration{11, 12, 30.0, 90}
                                      : Calibration{12, 13, 36.0, 110};
  auto note = [this](const std::string& s) { calibration_notes.push_back(s); };
  if (mpo_d == 0) {
    mpo_d = cal.d;
    note("mpo_d auto-set to " + std::to_string(mpo_d) + " for n = " +
         std::to_string(n));
  }
  if (mpo_fill == 0) {
    mpo_fill = cal.fill;
    note("mpo_fill auto-set to " + std::to_string(mpo_fill) + " for n = " +
         std::to_string(n));
  }
  if (rtpl_omega == 0.0) {
    rtpl_omega = cal.omega;
    note("rtpl_omega auto-set to " +
         std::to_string(static_cast<int>(cal.omega)) + " for n = " +
         std::to_string(n));
  }
  if (squareroot.d_max == 0) {
    squareroot.d_max = cal.d_max;
    note("squareroot_d_max auto-set to " + std::to_string(squareroot.d_max) +
         " for n = " + std::to_string(n));
  }
  if (catalog_replicas == 0) {
    // Nearest integer, ties to even, so the per-node replica density stays
    // pinned across scales (500 -> 1040, 2000 -> 4162).
    catalog_replicas = static_cast<int>(std::nearbyint(2.081 * n));
    note("catalog_replicas auto-set to " + std::to_string(catalog_replicas) +
         " (2.081 per node)");
  }
  if (mpo_warmup_exchanges == 0) {
    mpo_warmup_exchanges = 4 * n;
    note("mpo_warmup_exchanges auto-set to " +
         std::to_string(mpo_warmup_exchanges) + " (4 per node)");
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  static const std::set<std::string> topo_names = {"rtpl", "supernode",
                                                   "squareroot", "mpo"};
  if (topologies.empty()) fail("topologies: must not be empty");
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < topologies.size(); ++i) {
      if (!topo_names.count(topologies[i]))
        fail(indexed("topologies", i) + ": unknown topology '" +
             topologies[i] + "'");
      if (!seen.insert(topologies[i]).second)
        fail(indexed("topologies", i) + ": duplicate topology '" +
             topologies[i] + "'");
    }
  }
  if (n < 2) fail("n: must be >= 2");
  if (seeds.empty()) fail("seeds: must not be empty");
  if (n_queries < 0) fail("n_queries: must be >= 0");
  if (ttls.empty()) fail("ttls: must not be empty");
  {
    std::set<int> seen;
    for (std::size_t i = 0; i < ttls.size(); ++i) {
      if (ttls[i] < 0) fail(indexed("ttls", i) + ": must be >= 0");
      if (!seen.insert(ttls[i]).second)
        fail(indexed("ttls", i) + ": duplicate ttl " +
             std::to_string(ttls[i]));
    }
  }
  if (algorithms.empty()) fail("algorithms: must not be empty");
  {
    std::set<Algorithm> seen;
    for (std::size_t i = 0; i < algorithms.size(); ++i) {
      if (!seen.insert(algorithms[i]).second)
        fail(indexed("algorithms", i) + ": duplicate algorithm '" +
             algorithm_name(algorithms[i]) + "'");
    }
  }
  if (walks < 1) fail("walks: must be >= 1");
  if (stop_after < 1) fail("stop_after: must be >= 1");
  {
    std::set<double> seen;
    for (std::size_t i = 0; i < churn_fractions.size(); ++i) {
      const double f = churn_fractions[i];
      if (!(f >= 0.0 && f <= 1.0))
        fail(indexed("churn_fractions", i) + ": " + std::to_string(f) +
             " is outside [0, 1]");
      if (!seen.insert(f).second)
        fail(indexed("churn_fractions", i) + ": duplicate fraction");
    }
  }
  if (churn_ttl < 0) fail("churn_ttl: must be >= 0");
  if (catalog_files < 1) fail("catalog_files: must be >= 1");
  if (catalog_alpha < 0.0) fail("catalog_alpha: must be >= 0");
  if (catalog_replicas < catalog_files)
    fail("catalog_replicas: " + std::to_string(catalog_replicas) +
         " is below catalog_files (" + std::to_string(catalog_files) + ")");
  if (mpo_d < 2) fail("mpo_d: must be 0 (auto) or >= 2");
  if (mpo_fill < 1 || mpo_fill > mpo_d + 3)
    fail("mpo_fill: must be 0 (auto) or in [1, mpo_d + 3]");
  if (!(mpo_spread > 0.0)) fail("mpo_spread: must be > 0");
  if (mpo_region_cells < 1) fail("mpo_region_cells: must be >= 1");
  if (mpo_warmup_exchanges < 0) fail("mpo_warmup_exchanges: must be >= 0");
  if (!(rtpl_omega > 0.0)) fail("rtpl_omega: must be 0 (auto) or > 0");
  if (rtpl_omega > n - 1)
    fail("rtpl_omega: must not exceed n - 1 = " + std::to_string(n - 1));
  if (!(rtpl_alpha > 0.0)) fail("rtpl_alpha: must be > 0");
  if (supernode.c_min < 1) fail("supernode_c_min: must be >= 1");
  if (supernode.c_max < supernode.c_min)
    fail("supernode_c_max: must be >= supernode_c_min");
  if (supernode.sp_links < 1) fail("supernode_sp_links: must be >= 1");
  if (supernode.sp_links_spread < 0)
    fail("supernode_sp_links_spread: must be >= 0");
  if (squareroot.d_max < 1) fail("squareroot_d_max: must be 0 (auto) or >= 1");
  if (squareroot.d_min < 1) fail("squareroot_d_min: must be >= 1");
  if (squareroot.d0 < 1) fail("squareroot_d0: must be >= 1");
  if (squareroot.batch < 1) fail("squareroot_batch: must be >= 1");
  if (squareroot.walk_ttl < 1) fail("squareroot_walk_ttl: must be >= 1");
  if (squareroot.walks < 1) fail("squareroot_walks: must be >= 1");
  if (squareroot_warmup < 0) fail("squareroot_warmup: must be >= 0");
  if (out_dir.empty()) fail("out_dir: must not be empty");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["topologies"] = topologies;
  j["n"] = n;
  j["seeds"] = seeds;
  j["n_queries"] = n_queries;
  j["ttls"] = ttls;
  {
    std::vector<std::string> names;
    for (Algorithm a : algorithms) names.push_back(algorithm_name(a));
    j["algorithms"] = names;
  }
  j["walks"] = walks;
  j["stop_after"] = stop_after;
  j["churn_fractions"] = churn_fractions;
  j["churn_mode"] = churn_mode_name(churn_mode);
  j["churn_algorithm"] = algorithm_name(churn_algorithm);
  j["churn_ttl"] = churn_ttl;
  j["catalog_files"] = catalog_files;
  j["catalog_alpha"] = catalog_alpha;
  j["catalog_replicas"] = catalog_replicas;
  j["mpo_d"] = mpo_d;
  j["mpo_fill"] = mpo_fill;
  j["mpo_spread"] = mpo_spread;
  j["mpo_region_cells"] = mpo_region_cells;
  j["mpo_warmup_exchanges"] = mpo_warmup_exchanges;
  j["rtpl_omega"] = rtpl_omega;
  j["rtpl_alpha"] = rtpl_alpha;
  j["supernode_c_min"] = supernode.c_min;
  j["supernode_c_max"] = supernode.c_max;
  j["supernode_sp_links"] = supernode.sp_links;
  j["supernode_sp_links_spread"] = supernode.sp_links_spread;
  j["squareroot_d_max"] = squareroot.d_max;
  j["squareroot_d_min"] = squareroot.d_min;
  j["squareroot_d0"] = squareroot.d0;
  j["squareroot_batch"] = squareroot.batch;
  j["squareroot_walk_ttl"] = squareroot.walk_ttl;
  j["squareroot_walks"] = squareroot.walks;
  j["squareroot_warmup"] = squareroot_warmup;
  j["out_dir"] = out_dir;
  return j;
}

FileCatalog trial_catalog(const ExperimentConfig& cfg, const RngStream& root) {
  RngStream rng = root.split("catalog");
  return build_catalog(cfg.catalog_files, cfg.catalog_alpha,
                       cfg.catalog_replicas, cfg.n, rng);
}

Graph build_topology(const ExperimentConfig& cfg, const std::string& name,
                     const FileCatalog& catalog, const RngStream& root,
                     std::optional<Overlay>* overlay_out) {
  if (name == "rtpl") {
    RngStream rng = root.split("topology_rtpl");
    Graph g = gen_rtpl(cfg.n, cfg.rtpl_omega, cfg.rtpl_alpha, rng);
    for (int v = 0; v < cfg.n; ++v)
      g.set_hosted(v, catalog.files_of_host[static_cast<std::size_t>(v)]);
    return g;
  }
  if (name == "supernode") {
    RngStream rng = root.split("topology_supernode");
    Graph g = gen_supernode(cfg.n, cfg.supernode, rng);
    for (int v = 0; v < cfg.n; ++v)
      g.set_hosted(v, catalog.files_of_host[static_cast<std::size_t>(v)]);
    return g;
  }
  if (name == "squareroot") {
    RngStream rng = root.split("topology_squareroot");
    return gen_squareroot(cfg.n, cfg.squareroot, cfg.squareroot_warmup,
                          catalog, rng);
  }
  if (name == "mpo") {
    RngStream prng = root.split("mpo_place");
    std::vector<Coordinate> coords = place_nodes(cfg.n, prng, cfg.mpo_spread);
    std::vector<PeerSeed> peers;
    peers.reserve(static_cast<std::size_t>(cfg.n));
    for (int v = 0; v < cfg.n; ++v) {
      PeerSeed seed;
      seed.key = v;
      seed.coord = coords[static_cast<std::size_t>(v)];
      seed.hosted = catalog.files_of_host[static_cast<std::size_t>(v)];
      peers.push_back(std::move(seed));
    }
    OverlayParams params;
    params.d = cfg.mpo_d;
    params.as_fill_target = cfg.mpo_fill;
    params.region_cells = cfg.mpo_region_cells;
    params.spread = cfg.mpo_spread;
    Overlay ov = Overlay::bootstrap(peers, params);

    // Warm-up traffic: random co-member service exchanges feed the rank
    // histories, a burst pass exercises the record refresh path, and a
    // final re-election settles head assignments on the earned ranks.
    RngStream wrng = root.split("mpo_warmup");
    const std::vector<int> live = ov.live_keys();
    for (int w = 0; w < cfg.mpo_warmup_exchanges; ++w) {
      const int server = live[wrng.below(live.size())];
      const auto as = ov.as_of(server);
      const auto& members = as->members;
      if (members.size() < 2) continue;
      std::size_t server_idx = 0;
      for (std::size_t i = 0; i < members.size(); ++i)
        if (members[i].key == server) server_idx = i;
      std::size_t j = static_cast<std::size_t>(wrng.below(members.size() - 1));
      if (j >= server_idx) ++j;
      const int client = members[j].key;
      ov.record_service(client, server, wrng.uniform_real(),
                        wrng.uniform_real(0.5, 2.0));
    }
    static const NodeStatus kStatuses[] = {NodeStatus::busy, NodeStatus::free,
                                           NodeStatus::normal};
    for (int b = 0; b < cfg.mpo_warmup_exchanges / 8; ++b) {
      const int key = live[wrng.below(live.size())];
      ov.burst_update(key, kStatuses[wrng.below(3)]);
    }
    ov.reelect_all();

    Graph g = ov.as_graph(cfg.n);
    if (overlay_out != nullptr) *overlay_out = std::move(ov);
    return g;
  }
  throw ConfigError("config: topologies: unknown topology '" + name + "'");
}

namespace {

// Identity of one metrics cell; the map order (topology, stage, algorithm,
// ttl, fraction) fixes the report's cell ordering.
struct CellKey {
  std::string topology;
  std::string stage;  // "base" or "churn"
  std::string algorithm;
  int ttl = 0;
  double fraction = 0.0;

  bool operator<(const CellKey& o) const {
    return std::tie(topology, stage, algorithm, ttl, fraction) <
           std::tie(o.topology, o.stage, o.algorithm, o.ttl, o.fraction);
  }
};

struct CellSample {
  double success = 0.0;
  double messages = 0.0;
  double hops = 0.0;
  long long max_disturbance = 0;
  long long total_messages = 0;
};

struct TopoSample {
  int max_degree = 0;
  std::vector<int> degree_histogram;          // first seed only
  std::vector<long long> disturbance_sorted;  // first seed, reference cell
  long long disturbance_total = 0;
  bool is_overlay = false;
  long long as_count = 0;
  int level_count = 0;
  int layer_count = 0;
  long long violations = 0;
  std::vector<std::string> violation_samples;
};

struct TrialResult {
  std::map<CellKey, CellSample> cells;
  std::map<std::string, TopoSample> topologies;
};

std::string fraction_tag(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", f);
  return buf;
}

CellSample to_cell(const MetricsSample& ms) {
  CellSample c;
  c.success = ms.success_rate();
  c.messages = ms.mean_messages();
  c.hops = ms.mean_hops();
  c.max_disturbance = ms.max_disturbance();
  c.total_messages = ms.total_messages;
  return c;
}

void record_violations(TopoSample& topo, const std::string& where,
                       const StructureReport& rep) {
  topo.violations += static_cast<long long>(rep.violations.size());
  for (const std::string& v : rep.violations) {
    if (topo.violation_samples.size() < 5)
      topo.violation_samples.push_back(where + ": " + v);
  }
}

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t seed,
                      bool keep_distributions) {
  TrialResult out;
  RngStream root(seed);
  const FileCatalog catalog = trial_catalog(cfg, root);

  // One victim set per fraction, shared by every topology so their churn
  // rows face the same departures.
  std::vector<int> everyone(static_cast<std::size_t>(cfg.n));
  std::iota(everyone.begin(), everyone.end(), 0);
  std::map<double, ChurnScenario> scenarios;
  for (double f : cfg.churn_fractions) {
    RngStream crng = root.split("churn_" + fraction_tag(f));
    scenarios.emplace(f, make_churn(everyone, f, cfg.churn_mode, crng));
  }

  for (const std::string& name : cfg.topologies) {
    std::optional<Overlay> overlay;
    Graph g = build_topology(cfg, name, catalog, root, &overlay);

    TopoSample topo;
    {
      const std::vector<int> hist = g.degree_histogram();
      topo.max_degree = hist.empty() ? 0 : hist.front();
      if (keep_distributions) topo.degree_histogram = hist;
    }
    if (overlay.has_value()) {
      topo.is_overlay = true;
      const StructureReport rep = overlay->check_structure();
      topo.as_count = rep.as_count;
      topo.level_count = rep.level_count;
      topo.layer_count = rep.layer_count;
      record_violations(topo, "base", rep);
    }

    for (int ttl : cfg.ttls) {
      RngStream qrng = root.split("queries_ttl" + std::to_string(ttl));
      const std::vector<QuerySample> queries =
          sample_queries(g, catalog, cfg.n_queries, qrng);
      for (Algorithm alg : cfg.algorithms) {
        RngStream srng =
            root.split(std::string("search_") + algorithm_name(alg) +
                       "_ttl" + std::to_string(ttl));
        const MetricsSample ms = batch_search(g, catalog, queries, ttl, alg,
                                              srng, cfg.walks,
                                              cfg.stop_after);
        out.cells[CellKey{name, "base", algorithm_name(alg), ttl, 0.0}] =
            to_cell(ms);
        if (keep_distributions && alg == cfg.churn_algorithm &&
            ttl == cfg.churn_ttl) {
          std::vector<long long> dist = ms.disturbance;
          std::sort(dist.begin(), dist.end(), std::greater<long long>());
          topo.disturbance_sorted = std::move(dist);
          topo.disturbance_total = ms.total_disturbance();
        }
      }
    }

    for (double f : cfg.churn_fractions) {
      const ChurnScenario& sc = scenarios.at(f);
      Graph g2;
      std::vector<int> live_pool;
      if (overlay.has_value()) {
        Overlay copy = *overlay;
        if (!sc.leave_order.empty()) {
          if (cfg.churn_mode == ChurnMode::crash) {
            copy.crash(sc.leave_order);
          } else {
            for (int v : sc.leave_order) copy.leave_normal(v);
          }
        }
        const StructureReport rep = copy.check_structure();
        record_violations(topo, "churn " + fraction_tag(f), rep);
        g2 = copy.as_graph(cfg.n);
        live_pool = copy.live_keys();
      } else {
        g2 = g;
        std::vector<char> gone(static_cast<std::size_t>(cfg.n), 0);
        for (int v : sc.leave_order) {
          gone[static_cast<std::size_t>(v)] = 1;
          const std::vector<int> nbrs = g2.neighbors(v);
          for (int nb : nbrs) g2.remove_edge(v, nb);
          g2.set_hosted(v, {});
          g2.set_answerable(v, {});
        }
        for (int v = 0; v < cfg.n; ++v)
          if (!gone[static_cast<std::size_t>(v)]) live_pool.push_back(v);
      }
      // Same stream tags as the matching base cell, so a zero fraction
      // reproduces the base metrics exactly.
      RngStream qrng =
          root.split("queries_ttl" + std::to_string(cfg.churn_ttl));
      const std::vector<QuerySample> queries =
          sample_queries(g2, catalog, cfg.n_queries, qrng, &live_pool);
      RngStream srng =
          root.split(std::string("search_") +
                     algorithm_name(cfg.churn_algorithm) + "_ttl" +
                     std::to_string(cfg.churn_ttl));
      const MetricsSample ms =
          batch_search(g2, catalog, queries, cfg.churn_ttl,
                       cfg.churn_algorithm, srng, cfg.walks, cfg.stop_after);
      out.cells[CellKey{name, "churn", algorithm_name(cfg.churn_algorithm),
                        cfg.churn_ttl, f}] = to_cell(ms);
    }

    out.topologies.emplace(name, std::move(topo));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

nlohmann::json stats_json(const std::vector<double>& per_seed) {
  nlohmann::json j;
  j["mean"] = mean_of(per_seed);
  j["std"] = stddev_of(per_seed);
  j["per_seed"] = per_seed;
  return j;
}

}  // namespace

nlohmann::json run_experiment(const ExperimentConfig& raw) {
  ExperimentConfig cfg = raw;
  cfg.resolve();
  cfg.validate();

  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::future<TrialResult>> futures;
  futures.reserve(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    futures.push_back(std::async(std::launch::async, run_trial, cfg,
                                 cfg.seeds[i], i == 0));
  }
  std::vector<TrialResult> trials;
  trials.reserve(n_seeds);
  for (auto& f : futures) trials.push_back(f.get());

  struct CellAgg {
    std::vector<double> success, messages, hops, max_disturbance;
    std::vector<long long> total_messages;
  };
  std::map<CellKey, CellAgg> agg;
  for (const TrialResult& t : trials) {
    for (const auto& [key, cell] : t.cells) {
      CellAgg& a = agg[key];
      a.success.push_back(cell.success);
      a.messages.push_back(cell.messages);
      a.hops.push_back(cell.hops);
      a.max_disturbance.push_back(static_cast<double>(cell.max_disturbance));
      a.total_messages.push_back(cell.total_messages);
    }
  }

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, a] : agg) {
    if (a.success.size() != n_seeds)
      throw std::logic_error("experiment: cell sample count mismatch");
    nlohmann::json c;
    c["topology"] = key.topology;
    c["stage"] = key.stage;
    c["algorithm"] = key.algorithm;
    c["ttl"] = key.ttl;
    c["churn_fraction"] = key.fraction;
    c["success"] = stats_json(a.success);
    c["messages"] = stats_json(a.messages);
    c["hops"] = stats_json(a.hops);
    c["max_disturbance"] = stats_json(a.max_disturbance);
    c["total_messages"] = nlohmann::json{{"per_seed", a.total_messages}};
    cells.push_back(c);
  }

  nlohmann::json topologies = nlohmann::json::object();
  for (const std::string& name : cfg.topologies) {
    const TopoSample& first = trials.front().topologies.at(name);
    nlohmann::json t;
    t["degree_histogram"] = first.degree_histogram;
    t["disturbance_sorted"] = first.disturbance_sorted;
    t["disturbance_total"] = first.disturbance_total;
    std::vector<int> max_degree;
    for (const TrialResult& tr : trials)
      max_degree.push_back(tr.topologies.at(name).max_degree);
    t["max_degree_per_seed"] = max_degree;
    if (first.is_overlay) {
      std::vector<long long> as_counts;
      std::vector<int> levels, layers;
      long long violations = 0;
      std::vector<std::string> samples;
      for (const TrialResult& tr : trials) {
        const TopoSample& ts = tr.topologies.at(name);
        as_counts.push_back(ts.as_count);
        levels.push_back(ts.level_count);
        layers.push_back(ts.layer_count);
        violations += ts.violations;
        for (const std::string& s : ts.violation_samples)
          if (samples.size() < 5) samples.push_back(s);
      }
      t["as_count_per_seed"] = as_counts;
      t["level_count_per_seed"] = levels;
      t["layer_count_per_seed"] = layers;
      t["structure_violations"] = violations;
      t["violation_samples"] = samples;
    }
    topologies[name] = t;
  }

  nlohmann::json report;
  report["config"] = cfg.to_json();
  report["notes"] = cfg.calibration_notes;
  report["cells"] = cells;
  report["topologies"] = topologies;
  return report;
}

nlohmann::json churn_experiment(const ExperimentConfig& raw) {
  ExperimentConfig cfg = raw;
  cfg.resolve();
  cfg.validate();
  cfg.algorithms = {cfg.churn_algorithm};
  cfg.ttls = {cfg.churn_ttl};
  return run_experiment(cfg);
}

namespace {

std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const std::filesystem::path& path,
                const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

}  // namespace

void emit_report(const nlohmann::json& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + out_dir + "': " +
                      ec.message());

  const nlohmann::json cells =
      report.contains("cells") ? report.at("cells") : nlohmann::json::array();
  const nlohmann::json topologies = report.contains("topologies")
                                        ? report.at("topologies")
                                        : nlohmann::json::object();
  std::string ref_algorithm = "flood_unrepeated";
  if (report.contains("config") &&
      report.at("config").contains("churn_algorithm"))
    ref_algorithm =
        report.at("config").at("churn_algorithm").get<std::string>();

  write_file(dir / "report.json", report.dump(2) + "\n");

  {
    std::string csv = "topology,rank,degree\n";
    for (const auto& [name, t] : topologies.items()) {
      int rank = 1;
      for (const auto& deg : t.value("degree_histogram",
                                     std::vector<long long>{})) {
        csv += name + "," + std::to_string(rank++) + "," +
               std::to_string(deg) + "\n";
      }
    }
    write_file(dir / "fig4_degrees.csv", csv);
  }
  {
    std::string csv = "topology,algorithm,ttl,success_mean,success_std\n";
    for (const auto& c : cells) {
      if (c.at("stage") != "base") continue;
      csv += c.at("topology").get<std::string>() + "," +
             c.at("algorithm").get<std::string>() + "," +
             std::to_string(c.at("ttl").get<int>()) + "," +
             csv_num(c.at("success").at("mean").get<double>()) + "," +
             csv_num(c.at("success").at("std").get<double>()) + "\n";
    }
    write_file(dir / "fig5_success.csv", csv);
  }
  {
    std::string csv = "topology,ttl,success_mean,success_std\n";
    for (const auto& c : cells) {
      if (c.at("stage") != "base" || c.at("algorithm") != ref_algorithm)
        continue;
      csv += c.at("topology").get<std::string>() + "," +
             std::to_string(c.at("ttl").get<int>()) + "," +
             csv_num(c.at("success").at("mean").get<double>()) + "," +
             csv_num(c.at("success").at("std").get<double>()) + "\n";
    }
    write_file(dir / "fig6_success_by_topology.csv", csv);
  }
  {
    std::string csv = "topology,ttl,messages_mean,messages_std\n";
    for (const auto& c : cells) {
      if (c.at("stage") != "base" || c.at("algorithm") != ref_algorithm)
        continue;
      csv += c.at("topology").get<std::string>() + "," +
             std::to_string(c.at("ttl").get<int>()) + "," +
             csv_num(c.at("messages").at("mean").get<double>()) + "," +
             csv_num(c.at("messages").at("std").get<double>()) + "\n";
    }
    write_file(dir / "fig7_cost.csv", csv);
  }
  {
    std::string csv = "topology,node_rank,disturbance\n";
    for (const auto& [name, t] : topologies.items()) {
      int rank = 1;
      for (const auto& d : t.value("disturbance_sorted",
                                   std::vector<long long>{})) {
        csv += name + "," + std::to_string(rank++) + "," +
               std::to_string(d) + "\n";
      }
    }
    write_file(dir / "fig8_disturbance.csv", csv);
  }
  {
    std::string csv =
        "topology,churn_fraction,success_mean,success_std,hops_mean,"
        "hops_std,messages_mean,messages_std\n";
    for (const auto& c : cells) {
      if (c.at("stage") != "churn") continue;
      csv += c.at("topology").get<std::string>() + "," +
             csv_num(c.at("churn_fraction").get<double>()) + "," +
             csv_num(c.at("success").at("mean").get<double>()) + "," +
             csv_num(c.at("success").at("std").get<double>()) + "," +
             csv_num(c.at("hops").at("mean").get<double>()) + "," +
             csv_num(c.at("hops").at("std").get<double>()) + "," +
             csv_num(c.at("messages").at("mean").get<double>()) + "," +
             csv_num(c.at("messages").at("std").get<double>()) + "\n";
    }
    write_file(dir / "fig9_churn.csv", csv);
  }
}

}  // namespace mpo
