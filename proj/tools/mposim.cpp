#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpo/experiment.hpp"
#include "mpo/overlay.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  long long seed = -1;
  std::string out;
  std::string topology;
  int ttl = -1;
  std::string algorithm;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path,
                  "Path to a key = value configuration file");
  cmd->add_option("--seed", f.seed, "Run only this seed");
  cmd->add_option("--out", f.out, "Output directory (overrides out_dir)");
  cmd->add_option("--topology", f.topology,
                  "Restrict to one topology (rtpl, supernode, squareroot, "
                  "mpo)");
  cmd->add_option("--ttl", f.ttl, "Restrict to one ttl");
  cmd->add_option("--algorithm", f.algorithm,
                  "Restrict to one search algorithm");
}

mpo::ExperimentConfig load_config(const CommonFlags& f) {
  mpo::ExperimentConfig cfg =
      f.config_path.empty()
          ? mpo::ExperimentConfig::defaults()
          : mpo::ExperimentConfig::from_kv(
                mpo::KvConfig::parse_file(f.config_path));
  if (f.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(f.seed)};
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.topology.empty()) cfg.topologies = {f.topology};
  if (f.ttl >= 0) {
    cfg.ttls = {f.ttl};
    cfg.churn_ttl = f.ttl;
  }
  if (!f.algorithm.empty()) {
    mpo::Algorithm alg;
    if (!mpo::parse_algorithm(f.algorithm, alg))
      throw mpo::ConfigError("config: --algorithm: unknown algorithm '" +
                             f.algorithm + "'");
    cfg.algorithms = {alg};
    cfg.churn_algorithm = alg;
  }
  cfg.resolve();
  cfg.validate();
  return cfg;
}

void write_text(const std::filesystem::path& path,
                const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw mpo::ConfigError("cannot write '" + path.string() + "'");
  f << content;
  if (!f)
    throw mpo::ConfigError("write failed for '" + path.string() + "'");
}

// Builds every selected topology once and writes its edge list, degree
// histogram, and (for the overlay) a full snapshot. Returns 2 when the
// overlay structure check reports violations.
int cmd_generate(const CommonFlags& flags) {
  const mpo::ExperimentConfig cfg = load_config(flags);
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw mpo::ConfigError("cannot create output directory '" + cfg.out_dir +
                           "': " + ec.message());

  const mpo::RngStream root(cfg.seeds.front());
  const mpo::FileCatalog catalog = mpo::trial_catalog(cfg, root);
  int violations = 0;
  for (const std::string& name : cfg.topologies) {
    std::optional<mpo::Overlay> overlay;
    const mpo::Graph g =
        mpo::build_topology(cfg, name, catalog, root, &overlay);
    write_text(dir / (name + "_edges.txt"), g.to_edge_list());
    std::string csv = "rank,degree\n";
    int rank = 1;
    for (int deg : g.degree_histogram())
      csv += std::to_string(rank++) + "," + std::to_string(deg) + "\n";
    write_text(dir / (name + "_degrees.csv"), csv);
    std::cout << name << ": " << g.node_count() << " nodes, "
              << g.edge_count() << " edges\n";
    if (overlay.has_value()) {
      write_text(dir / "mpo_snapshot.json",
                 overlay->to_json().dump(2) + "\n");
      const mpo::StructureReport rep = overlay->check_structure();
      for (const std::string& v : rep.violations) {
        std::cerr << "violation: " << v << "\n";
        ++violations;
      }
    }
  }
  return violations == 0 ? 0 : 2;
}

// Runs the experiment (full or churn-focused), emits the report bundle, and
// surfaces overlay structure violations through the exit code.
int cmd_run(const CommonFlags& flags, bool churn_only) {
  const mpo::ExperimentConfig cfg = load_config(flags);
  const nlohmann::json report =
      churn_only ? mpo::churn_experiment(cfg) : mpo::run_experiment(cfg);
  mpo::emit_report(report, cfg.out_dir);
  long long violations = 0;
  for (const auto& [name, t] : report.at("topologies").items()) {
    violations += t.value("structure_violations", 0LL);
    for (const auto& s :
         t.value("violation_samples", std::vector<std::string>{}))
      std::cerr << name << " violation: " << s << "\n";
  }
  std::cout << "report written to " << cfg.out_dir << " ("
            << report.at("cells").size() << " cells)\n";
  return violations == 0 ? 0 : 2;
}

int cmd_check(const std::string& snapshot_path) {
  std::ifstream f(snapshot_path);
  if (!f) {
    std::cerr << "error: cannot open '" << snapshot_path << "'\n";
    return 1;
  }
  nlohmann::json snapshot;
  try {
    snapshot = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << snapshot_path << ": " << e.what() << "\n";
    return 1;
  }
  const mpo::StructureReport rep = mpo::check_snapshot(snapshot);
  for (const std::string& v : rep.violations)
    std::cerr << "violation: " << v << "\n";
  if (!rep.ok()) return 2;
  std::cout << "ok: " << rep.as_count << " clusters, max degree "
            << rep.max_degree << ", " << rep.level_count << " levels, "
            << rep.layer_count << " layers\n";
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& out) {
  std::ifstream f(report_path);
  if (!f) {
    std::cerr << "error: cannot open '" << report_path << "'\n";
    return 1;
  }
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << report_path << ": " << e.what() << "\n";
    return 1;
  }
  std::string dir = out;
  if (dir.empty() && report.contains("config") &&
      report.at("config").contains("out_dir"))
    dir = report.at("config").at("out_dir").get<std::string>();
  if (dir.empty()) dir = "out";
  mpo::emit_report(report, dir);
  std::cout << "report re-emitted to " << dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic peer-to-peer topology and search simulator"};
  app.require_subcommand(1);

  CommonFlags gen_flags, run_flags, churn_flags;
  std::string check_path, report_path, report_out;

  CLI::App* gen = app.add_subcommand(
      "generate", "Build topologies; write edge lists, degree histograms "
                  "and the overlay snapshot");
  add_common_flags(gen, gen_flags);

  CLI::App* run = app.add_subcommand(
      "run", "Run the experiment and emit report.json plus the figure CSVs");
  add_common_flags(run, run_flags);

  CLI::App* churn = app.add_subcommand(
      "churn", "Run the churn sweep on the reference algorithm and ttl");
  add_common_flags(churn, churn_flags);

  CLI::App* check = app.add_subcommand(
      "check", "Verify the structural invariants of a saved overlay "
               "snapshot");
  check->add_option("snapshot", check_path, "Path to mpo_snapshot.json")
      ->required();

  CLI::App* report = app.add_subcommand(
      "report", "Re-emit the figure CSVs from a saved report.json");
  report->add_option("report_json", report_path, "Path to report.json")
      ->required();
  report->add_option("--out", report_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_flags);
    if (run->parsed()) return cmd_run(run_flags, false);
    if (churn->parsed()) return cmd_run(churn_flags, true);
    if (check->parsed()) return cmd_check(check_path);
    if (report->parsed()) return cmd_report(report_path, report_out);
  } catch (const mpo::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
