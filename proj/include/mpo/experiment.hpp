#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpo/catalog.hpp"
#include "mpo/churn.hpp"
#include "mpo/graph.hpp"
#include "mpo/overlay.hpp"
#include "mpo/rng.hpp"
#include "mpo/search.hpp"
#include "mpo/topologies.hpp"

namespace mpo {

// Raised for any malformed configuration or input file. The message always
// names the offending key (and list index where applicable). Callers map it
// to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration text. `#` starts a comment (full line or
// trailing); blank lines are ignored; duplicate keys are an error. Values
// are free-form strings that the typed getters parse on demand.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_text(const std::string& text);

  bool has(const std::string& key) const;
  std::vector<std::string> keys() const;  // sorted

  // Typed getters return `fallback` when the key is absent and throw
  // ConfigError naming the key when the stored value does not parse.
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_real(const std::string& key, double fallback) const;
  // Comma-separated lists; an explicitly empty value yields an empty list.
  std::vector<std::string> get_string_list(
      const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<long long> get_int_list(
      const std::string& key, const std::vector<long long>& fallback) const;
  std::vector<double> get_real_list(const std::string& key,
                                    const std::vector<double>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

// Everything one experiment run needs. Zeros on the `0 means auto` fields
// select size-calibrated defaults (see resolve()).
struct ExperimentConfig {
  std::vector<std::string> topologies{"rtpl", "supernode", "squareroot",
                                      "mpo"};
  int n = 500;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int n_queries = 12000;
  std::vector<int> ttls{1, 2, 3, 4, 5};
  std::vector<Algorithm> algorithms{Algorithm::flood_repeated,
                                    Algorithm::flood_unrepeated,
                                    Algorithm::random_walk};
  int walks = 4;
  int stop_after = 1;

  // Churn sweep: each fraction removes round(fraction * n) nodes and reruns
  // the reference cell (churn_algorithm at churn_ttl) on the survivors.
  std::vector<double> churn_fractions;
  ChurnMode churn_mode = ChurnMode::crash;
  Algorithm churn_algorithm = Algorithm::flood_unrepeated;
  int churn_ttl = 4;

  // Shared workload catalog.
  int catalog_files = 300;
  double catalog_alpha = 0.726;
  int catalog_replicas = 0;  // 0 means auto: round(2.081 * n)

  // Cluster-lattice overlay.
  int mpo_d = 0;     // 0 means auto by n
  int mpo_fill = 0;  // 0 means auto by n
  double mpo_spread = 1000.0;
  int mpo_region_cells = 1;
  int mpo_warmup_exchanges = 0;  // 0 means auto: 4 * n

  // Power-law baseline.
  double rtpl_omega = 0.0;  // 0 means auto by n
  double rtpl_alpha = 0.8;

  SupernodeParams supernode;

  SquareRootParams squareroot{.d_max = 0};  // d_max 0 means auto by n
  int squareroot_warmup = 10000;

  std::string out_dir = "out";

  // Human-readable record of every auto field resolve() filled in.
  std::vector<std::string> calibration_notes;

  // Parses, resolves and validates; rejects unknown keys.
  static ExperimentConfig from_kv(const KvConfig& kv);
  // Built-in defaults resolved for n = 500.
  static ExperimentConfig defaults();

  // Fills every `0 means auto` field from the size-calibration table and
  // records what it chose in calibration_notes. Idempotent.
  void resolve();
  // Throws ConfigError naming the offending field. Call after resolve().
  void validate() const;

  nlohmann::json to_json() const;
};

// Builds the shared workload catalog for one trial seed. Streams are split
// off `root` by tag, so call order does not matter.
FileCatalog trial_catalog(const ExperimentConfig& cfg, const RngStream& root);

// Builds the named topology for one trial seed, with hosted content
// attached from the catalog. For "mpo" the constructed overlay (already
// warmed up: service exchanges, bursts, re-election) is moved into
// `*overlay_out` when that pointer is non-null, and the returned graph is
// its link-class projection.
Graph build_topology(const ExperimentConfig& cfg, const std::string& name,
                     const FileCatalog& catalog, const RngStream& root,
                     std::optional<Overlay>* overlay_out = nullptr);

// Runs the full experiment: per seed (in parallel) builds each topology,
// runs every (algorithm, ttl) cell on a shared pre-sampled workload, then
// reruns the reference cell after each churn fraction. Returns the
// aggregated report as canonical JSON:
//   cells:      one entry per (topology, stage, algorithm, ttl, fraction)
//               with mean/std/per-seed success, messages, hops,
//               max-disturbance and per-seed total messages
//   topologies: per-name degree histogram (first seed), per-seed max
//               degree, reference-cell per-node disturbance (first seed,
//               sorted descending) and, for the overlay, per-seed cluster /
//               tier counts plus structure-check results
//   config:     the resolved configuration echo
//   notes:      calibration decisions taken
nlohmann::json run_experiment(const ExperimentConfig& cfg);

// Churn-focused wrapper: same machinery restricted to the reference
// algorithm and ttl, so the report contains exactly the base reference cell
// plus one churn cell per fraction.
nlohmann::json churn_experiment(const ExperimentConfig& cfg);

// Writes report.json plus the six figure CSVs into out_dir (created if
// missing). Operates on the JSON alone so saved reports can be re-emitted.
//   fig4_degrees.csv              topology,rank,degree
//   fig5_success.csv              topology,algorithm,ttl,success_mean,
//                                 success_std
//   fig6_success_by_topology.csv  topology,ttl,success_mean,success_std
//                                 (reference algorithm only)
//   fig7_cost.csv                 topology,ttl,messages_mean,messages_std
//                                 (reference algorithm only)
//   fig8_disturbance.csv          topology,node_rank,disturbance
//   fig9_churn.csv                topology,churn_fraction,success_mean,
//                                 success_std,hops_mean,hops_std,
//                                 messages_mean,messages_std
void emit_report(const nlohmann::json& report, const std::string& out_dir);

}  // namespace mpo
