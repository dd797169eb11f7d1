// Acceptance suite: one PASS/FAIL line per criterion (C1..C13), nonzero
// exit when any criterion fails. Every tolerance is pinned here in code:
//   C1  degree cap d+4 under randomized churn fuzz (zero tolerance, < 300 s)
//   C2  level/layer height bounds under the same fuzz (zero tolerance)
//   C3  calibrated max degrees at n=500/2000 within ±20% of the targets;
//       the cluster overlay additionally at its exact cap (zero tolerance)
//   C4  per-cell success ordering repeated >= unrepeated >= random walk,
//       1 percentage point slack on the first inequality only
//   C5  unrepeated-flood success >= 0.95 at ttl 4, n = 2000
//   C6  cluster overlay strictly leads every topology at ttl 1
//   C7  cluster overlay message cost at ttl 4 below both hierarchies and
//       cost growth ttl 1->6 below half of the super-node growth
//   C8  max per-node disturbance below super-node's; some nodes untouched
//   C9  churn: hops drift <= +10% up to 50% departures; square-root
//       success strictly decreasing across 10%..90% departures
//   C10 formula oracles, >= 100 randomized instances each, 1e-12 relative
//   C11 100 full-head-loss crash recoveries, lossless index, zero failures
//   C12 distant-join rejection / free-rider displacement / rank resumption
//   C13 byte-identical report on rerun with identical config and seeds
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mpo/experiment.hpp"
#include "mpo/geometry.hpp"
#include "mpo/overlay.hpp"
#include "mpo/ranking.hpp"
#include "mpo/rng.hpp"
#include "mpo/topologies.hpp"

namespace {

using nlohmann::json;

// --- reporting -------------------------------------------------------------

struct Line {
  bool pass = true;
  std::string detail;

  void fail(const std::string& msg) {
    pass = false;
    if (detail.size() > 400) return;  // keep the line readable
    if (!detail.empty()) detail += "; ";
    detail += msg;
  }
  void note(const std::string& msg) {  // shown only when passing
    if (!pass) return;
    if (!detail.empty()) detail += "; ";
    detail += msg;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// --- report JSON helpers -----------------------------------------------------

const json* find_cell(const json& rep, std::string_view topo,
                      std::string_view stage, std::string_view alg, int ttl,
                      double fraction) {
  for (const auto& c : rep.at("cells")) {
    if (c.at("topology").get_ref<const std::string&>() == topo &&
        c.at("stage").get_ref<const std::string&>() == stage &&
        c.at("algorithm").get_ref<const std::string&>() == alg &&
        c.at("ttl").get<int>() == ttl &&
        std::abs(c.at("churn_fraction").get<double>() - fraction) < 1e-9)
      return &c;
  }
  return nullptr;
}

double cell_mean(const json& cell, const char* metric) {
  return cell.at(metric).at("mean").get<double>();
}

std::vector<double> cell_per_seed(const json& cell, const char* metric) {
  return cell.at(metric).at("per_seed").get<std::vector<double>>();
}

mpo::ExperimentConfig make_cfg(int n, std::vector<std::uint64_t> seeds,
                               std::vector<int> ttls, int n_queries) {
  mpo::ExperimentConfig cfg;  // untouched auto fields; resolve() calibrates
  cfg.n = n;
  cfg.seeds = std::move(seeds);
  cfg.ttls = std::move(ttls);
  cfg.n_queries = n_queries;
  cfg.resolve();
  cfg.validate();
  return cfg;
}

// --- C1 / C2: structural fuzz ------------------------------------------------

bool pow_below(int base, int exp, long long m) {
  long long v = 1;
  for (int i = 0; i < exp; ++i) {
    v *= base;
    if (v >= m) return false;
  }
  return v < m;
}

struct FuzzResult {
  long long ops = 0;
  int peak_peers = 0;
  int worst_degree = 0;
  Line c1, c2;
};

void fuzz_one(int d, int start_n, int lo, int hi, int ops, FuzzResult& out) {
  mpo::RngStream rng =
      mpo::RngStream(2026).split("fuzz", static_cast<std::uint64_t>(d));
  mpo::RngStream coord_rng = rng.split("coords");
  const auto coords = mpo::place_nodes(start_n, coord_rng, 1000.0);
  std::vector<mpo::PeerSeed> peers(static_cast<std::size_t>(start_n));
  for (int i = 0; i < start_n; ++i) {
    auto& p = peers[static_cast<std::size_t>(i)];
    p.key = i;
    p.coord = coords[static_cast<std::size_t>(i)];
    p.hosted = {i % 97};
  }
  mpo::OverlayParams params;
  params.d = d;
  mpo::Overlay ov = mpo::Overlay::bootstrap(peers, params);
  int next_key = start_n;
  std::vector<int> offline;  // keys eligible for a rejoin

  const auto audit = [&](const char* what) {
    const auto rep = ov.check_structure();
    out.peak_peers = std::max(out.peak_peers, ov.peer_count());
    out.worst_degree = std::max(out.worst_degree, rep.max_degree);
    if (out.c1.pass && (!rep.ok() || rep.max_degree > d + 4)) {
      const std::string why =
          rep.violations.empty()
              ? "degree " + std::to_string(rep.max_degree) + " > " +
                    std::to_string(d + 4)
              : rep.violations.front();
      out.c1.fail("d=" + std::to_string(d) + " op " + std::to_string(out.ops) +
                  " (" + what + "): " + why);
    }
    if (out.c2.pass && rep.as_count >= d &&
        (!pow_below(d, rep.level_count - 1, rep.as_count) ||
         !pow_below(d, rep.layer_count - 1, rep.as_count))) {
      out.c2.fail("d=" + std::to_string(d) + " op " + std::to_string(out.ops) +
                  ": " + std::to_string(rep.level_count) + " levels / " +
                  std::to_string(rep.layer_count) + " layers for " +
                  std::to_string(rep.as_count) + " clusters");
    }
  };

  audit("bootstrap");
  for (int i = 0; i < ops && (out.c1.pass || out.c2.pass); ++i) {
    const int live_n = ov.peer_count();
    std::uint64_t p = rng.below(100);
    if (live_n >= hi) p = 40 + rng.below(55);  // force a departure
    if (live_n <= lo) p = rng.below(40);       // force a join
    const char* what = "join";
    if (p < 40) {
      mpo::PeerSeed s;
      if (!offline.empty() && rng.chance(0.25)) {
        const auto j = static_cast<std::size_t>(rng.below(offline.size()));
        s.key = offline[j];
        offline.erase(offline.begin() + static_cast<std::ptrdiff_t>(j));
      } else {
        s.key = next_key++;
      }
      s.coord = {rng.uniform_real(-1000.0, 1000.0),
                 rng.uniform_real(-1000.0, 1000.0)};
      s.hosted = {s.key % 97};
      const auto rep = ov.join(s);
      if (rep.kind == mpo::JoinReport::Kind::rejected_whitewasher)
        offline.push_back(s.key);
    } else if (p < 70 && live_n > 1) {
      what = "leave";
      const auto live = ov.live_keys();
      const int k = live[static_cast<std::size_t>(rng.below(live.size()))];
      ov.leave_normal(k);
      offline.push_back(k);
    } else if (p < 95 && live_n > 1) {
      what = "crash";
      const auto live = ov.live_keys();
      const auto cap = std::min<std::uint64_t>(4, live.size() - 1);
      const auto nv = 1 + rng.below(cap);
      std::set<int> victims;
      while (victims.size() < nv)
        victims.insert(live[static_cast<std::size_t>(rng.below(live.size()))]);
      ov.crash({victims.begin(), victims.end()});
      for (int v : victims) offline.push_back(v);
    } else {
      what = "status";
      const auto live = ov.live_keys();
      const int k = live[static_cast<std::size_t>(rng.below(live.size()))];
      constexpr mpo::NodeStatus kStatuses[3] = {
          mpo::NodeStatus::busy, mpo::NodeStatus::free, mpo::NodeStatus::normal};
      ov.burst_update(k, kStatuses[rng.below(3)]);
    }
    ++out.ops;
    audit(what);
  }
}

// --- C10: independent formula oracles ---------------------------------------

bool close12(double got, long double want) {
  const long double diff = std::fabs(static_cast<long double>(got) - want);
  if (want == 0.0L) return diff <= 1e-12L;
  return diff / std::fabs(want) <= 1e-12L;
}

long double oracle_pair_eval(const std::vector<std::pair<double, double>>& recs,
                             double alpha) {
  if (recs.empty()) return 0.0L;
  long double s = 0.0L, t = 0.0L;
  for (const auto& [q, dur] : recs) {
    s += std::pow(static_cast<long double>(q), static_cast<long double>(alpha));
    t += dur;
  }
  return s * static_cast<long double>(recs.size()) / t;
}

// --- C12 helpers --------------------------------------------------------------

// Two size-6 clusters: one around the origin, one around (far_x, 0); the
// bootstrap packs them exactly this way because it sorts by distance to the
// origin anchor.
mpo::Overlay two_cluster_overlay(mpo::RngStream& rng, double far_x,
                                 long long& near_birth, long long& far_birth) {
  std::vector<mpo::PeerSeed> peers;
  for (int i = 0; i < 12; ++i) {
    mpo::PeerSeed p;
    p.key = i;
    const double cx = i < 6 ? 0.0 : far_x;
    p.coord = {cx + rng.uniform_real(-1.0, 1.0), rng.uniform_real(-1.0, 1.0)};
    p.hosted = {i};
    peers.push_back(std::move(p));
  }
  mpo::OverlayParams params;
  params.d = 3;  // capacity 6: both clusters start full
  mpo::Overlay ov = mpo::Overlay::bootstrap(peers, params);
  near_birth = ov.as_of(0)->birth;
  far_birth = ov.as_of(6)->birth;
  return ov;
}

}  // namespace

int main() {
  const auto t_start = std::chrono::steady_clock::now();
  std::vector<std::pair<int, Line>> lines;

  // ---- C1 / C2: randomized operation fuzz ---------------------------------
  {
    const auto t0 = std::chrono::steady_clock::now();
    FuzzResult fz;
    // One long randomized sequence per branching factor; populations are
    // held inside a band so clusters keep splitting and merging.
    fuzz_one(2, 500, 380, 700, 3400, fz);
    fuzz_one(3, 1200, 900, 1500, 3400, fz);
    fuzz_one(4, 1900, 1500, 2000, 3400, fz);
    const double secs = seconds_since(t0);
    if (secs >= 300.0)
      fz.c1.fail("fuzz took " + fmt(secs) + " s (budget 300 s)");
    fz.c1.note(std::to_string(fz.ops) + " ops over d in {2,3,4}, peak " +
               std::to_string(fz.peak_peers) + " peers, worst degree " +
               std::to_string(fz.worst_degree) + ", " + fmt(secs) + " s");
    fz.c2.note("height bounds re-checked after each of " +
               std::to_string(fz.ops) + " ops");
    lines.emplace_back(1, fz.c1);
    lines.emplace_back(2, fz.c2);
  }

  // ---- shared experiment runs for C3..C8 -----------------------------------
  const auto cfg_a = make_cfg(500, {1, 2}, {1, 2, 3, 4, 5}, 12000);
  const auto cfg_b = make_cfg(2000, {1}, {1, 2, 3, 4, 5, 6}, 12000);
  const json run_a = mpo::run_experiment(cfg_a);
  const json run_b = mpo::run_experiment(cfg_b);
  const char* kTopos[4] = {"rtpl", "supernode", "squareroot", "mpo"};

  // ---- C3: calibrated max degrees -------------------------------------------
  {
    Line c3;
    struct Target {
      const char* topo;
      double want500, want2000;
    };
    const Target targets[4] = {{"rtpl", 18.0, 36.0},
                               {"supernode", 25.0, 32.0},
                               {"squareroot", 8.0, 22.0},
                               {"mpo", 11.0, 18.0}};
    std::string measured;
    const auto check = [&](const json& rep, bool big,
                           const mpo::ExperimentConfig& cfg) {
      for (const auto& t : targets) {
        const double want = big ? t.want2000 : t.want500;
        const auto seeds = rep.at("topologies")
                               .at(t.topo)
                               .at("max_degree_per_seed")
                               .get<std::vector<double>>();
        std::string vals;
        for (double got : seeds) {
          vals += (vals.empty() ? "" : "/") + fmt(got);
          if (std::abs(got - want) > 0.2 * want + 1e-9)
            c3.fail(std::string(t.topo) + " n=" + (big ? "2000" : "500") +
                    " max degree " + fmt(got) + " outside +-20% of " +
                    fmt(want));
          if (std::string_view(t.topo) == "mpo" && got > cfg.mpo_d + 4)
            c3.fail("overlay n=" + std::string(big ? "2000" : "500") +
                    " degree " + fmt(got) + " above exact cap " +
                    std::to_string(cfg.mpo_d + 4));
        }
        measured += std::string(t.topo) + (big ? "@2000 " : "@500 ") + vals +
                    " (target " + fmt(want) + "); ";
      }
    };
    check(run_a, false, cfg_a);
    check(run_b, true, cfg_b);
    if (measured.size() > 2) measured.resize(measured.size() - 2);
    c3.note(measured);
    lines.emplace_back(3, c3);
  }

  // ---- C4: per-cell algorithm ordering --------------------------------------
  {
    Line c4;
    int triples = 0;
    double worst_first = 0.0, worst_second = 0.0;
    const auto check = [&](const json& rep, const char* scale) {
      for (const char* topo : kTopos) {
        for (int ttl = 1; ttl <= 5; ++ttl) {
          const json* r = find_cell(rep, topo, "base", "flood_repeated", ttl, 0);
          const json* u =
              find_cell(rep, topo, "base", "flood_unrepeated", ttl, 0);
          const json* w = find_cell(rep, topo, "base", "random_walk", ttl, 0);
          if (!r || !u || !w) {
            c4.fail(std::string(topo) + " " + scale + " ttl " +
                    std::to_string(ttl) + ": cell missing");
            continue;
          }
          const auto rs = cell_per_seed(*r, "success");
          const auto us = cell_per_seed(*u, "success");
          const auto ws = cell_per_seed(*w, "success");
          for (std::size_t s = 0; s < rs.size(); ++s) {
            ++triples;
            worst_first = std::max(worst_first, us[s] - rs[s]);
            worst_second = std::max(worst_second, ws[s] - us[s]);
            if (rs[s] < us[s] - 0.01 - 1e-12)
              c4.fail(std::string(topo) + " " + scale + " ttl " +
                      std::to_string(ttl) + " seed#" + std::to_string(s) +
                      ": repeated " + fmt(rs[s]) + " < unrepeated " +
                      fmt(us[s]) + " - 1pp");
            if (us[s] < ws[s] - 1e-12)
              c4.fail(std::string(topo) + " " + scale + " ttl " +
                      std::to_string(ttl) + " seed#" + std::to_string(s) +
                      ": unrepeated " + fmt(us[s]) + " < walk " + fmt(ws[s]));
          }
        }
      }
    };
    check(run_a, "n=500");
    check(run_b, "n=2000");
    c4.note(std::to_string(triples) +
            " (topology,ttl,seed) triples; worst unrepeated-repeated gap " +
            fmt(worst_first) + ", worst walk-unrepeated gap " +
            fmt(worst_second));
    lines.emplace_back(4, c4);
  }

  // ---- C5: ttl-4 saturation at n=2000 ---------------------------------------
  {
    Line c5;
    std::string vals;
    for (const char* topo : {"supernode", "squareroot", "mpo"}) {
      const json* cell = find_cell(run_b, topo, "base", "flood_unrepeated", 4, 0);
      const double got = cell ? cell_mean(*cell, "success") : -1.0;
      vals += std::string(topo) + " " + fmt(got) + " ";
      if (got < 0.95)
        c5.fail(std::string(topo) + " unrepeated ttl-4 success " + fmt(got) +
                " < 0.95");
    }
    c5.note(vals + "(floor 0.95, 12000 queries)");
    lines.emplace_back(5, c5);
  }

  // ---- C6: strict lead at ttl = 1 -------------------------------------------
  {
    Line c6;
    const auto check = [&](const json& rep, const char* scale) {
      const json* m = find_cell(rep, "mpo", "base", "flood_unrepeated", 1, 0);
      const auto ms = cell_per_seed(*m, "success");
      std::string vals = "overlay " + fmt(cell_mean(*m, "success"));
      for (const char* topo : {"rtpl", "supernode", "squareroot"}) {
        const json* o = find_cell(rep, topo, "base", "flood_unrepeated", 1, 0);
        const auto os = cell_per_seed(*o, "success");
        vals += std::string(" vs ") + topo + " " + fmt(cell_mean(*o, "success"));
        for (std::size_t s = 0; s < ms.size(); ++s)
          if (!(ms[s] > os[s]))
            c6.fail(std::string(scale) + " seed#" + std::to_string(s) +
                    ": overlay " + fmt(ms[s]) + " not above " + topo + " " +
                    fmt(os[s]));
      }
      c6.note(std::string(scale) + ": " + vals);
    };
    check(run_a, "n=500");
    check(run_b, "n=2000");
    lines.emplace_back(6, c6);
  }

  // ---- C7: message cost at ttl 4 and growth ttl 1 -> 6 -----------------------
  {
    Line c7;
    const auto msgs = [&](const char* topo, int ttl) {
      const json* c = find_cell(run_b, topo, "base", "flood_unrepeated", ttl, 0);
      return c ? cell_mean(*c, "messages") : -1.0;
    };
    const double m_mpo = msgs("mpo", 4);
    const double m_sup = msgs("supernode", 4);
    const double m_sqr = msgs("squareroot", 4);
    if (!(m_mpo < m_sup))
      c7.fail("ttl-4 messages: overlay " + fmt(m_mpo) + " not below super-node " +
              fmt(m_sup));
    if (!(m_mpo < m_sqr))
      c7.fail("ttl-4 messages: overlay " + fmt(m_mpo) +
              " not below square-root " + fmt(m_sqr));
    const double g_mpo = msgs("mpo", 6) - msgs("mpo", 1);
    const double g_sup = msgs("supernode", 6) - msgs("supernode", 1);
    if (!(g_mpo < 0.5 * g_sup))
      c7.fail("growth ttl 1->6: overlay " + fmt(g_mpo) +
              " not below half of super-node " + fmt(g_sup));
    c7.note("ttl-4 messages/query overlay " + fmt(m_mpo) + " vs super-node " +
            fmt(m_sup) + " / square-root " + fmt(m_sqr) + "; growth " +
            fmt(g_mpo) + " vs cap " + fmt(0.5 * g_sup));
    lines.emplace_back(7, c7);
  }

  // ---- C8: disturbance balance ----------------------------------------------
  {
    Line c8;
    const auto sorted = [&](const char* topo) {
      return run_b.at("topologies")
          .at(topo)
          .at("disturbance_sorted")
          .get<std::vector<long long>>();
    };
    const auto mpo_d = sorted("mpo");
    const auto sup_d = sorted("supernode");
    if (mpo_d.size() != 2000 || sup_d.size() != 2000)
      c8.fail("disturbance vector sizes " + std::to_string(mpo_d.size()) +
              "/" + std::to_string(sup_d.size()) + " != 2000");
    const long long mpo_max = mpo_d.empty() ? -1 : mpo_d.front();
    const long long sup_max = sup_d.empty() ? -1 : sup_d.front();
    if (!(mpo_max < sup_max))
      c8.fail("max disturbance: overlay " + std::to_string(mpo_max) +
              " not below super-node " + std::to_string(sup_max));
    const long long zeros = static_cast<long long>(
        std::count(mpo_d.begin(), mpo_d.end(), 0LL));
    if (zeros < 1) c8.fail("no overlay node with zero disturbance");
    c8.note("max disturbance overlay " + std::to_string(mpo_max) +
            " vs super-node " + std::to_string(sup_max) + "; " +
            std::to_string(zeros) + " overlay nodes untouched");
    lines.emplace_back(8, c8);
  }

  // ---- C9: behavior under churn ----------------------------------------------
  {
    Line c9;
    auto churn_cfg = [&](const char* topo, std::vector<double> fractions) {
      mpo::ExperimentConfig cfg;
      cfg.n = 2000;
      cfg.seeds = {1, 2, 3};
      cfg.n_queries = 6000;
      cfg.topologies = {topo};
      cfg.churn_fractions = std::move(fractions);
      cfg.churn_mode = mpo::ChurnMode::crash;
      cfg.churn_algorithm = mpo::Algorithm::flood_unrepeated;
      cfg.churn_ttl = 4;
      cfg.resolve();
      cfg.validate();
      return cfg;
    };
    const json rep_m =
        mpo::churn_experiment(churn_cfg("mpo", {0.1, 0.2, 0.3, 0.4, 0.5}));
    const json* base =
        find_cell(rep_m, "mpo", "base", "flood_unrepeated", 4, 0);
    const double hops0 = cell_mean(*base, "hops");
    std::string hseq = fmt(hops0);
    for (double f : {0.1, 0.2, 0.3, 0.4, 0.5}) {
      const json* c = find_cell(rep_m, "mpo", "churn", "flood_unrepeated", 4, f);
      const double h = cell_mean(*c, "hops");
      const double ok = cell_mean(*c, "success");
      hseq += " " + fmt(h);
      if (h > 1.1 * hops0 + 1e-12)
        c9.fail("overlay hops at " + fmt(f) + " departures: " + fmt(h) +
                " above +10% of baseline " + fmt(hops0));
      if (ok <= 0.5)
        c9.fail("overlay success at " + fmt(f) + " departures " + fmt(ok) +
                " too low for a meaningful hop count");
    }
    const json rep_s = mpo::churn_experiment(churn_cfg(
        "squareroot", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}));
    std::string sseq;
    double prev = 2.0;
    for (double f : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
      const json* c =
          find_cell(rep_s, "squareroot", "churn", "flood_unrepeated", 4, f);
      const double s = cell_mean(*c, "success");
      sseq += (sseq.empty() ? "" : " ") + fmt(s);
      if (!(s < prev))
        c9.fail("square-root success not strictly decreasing at fraction " +
                fmt(f) + " (" + fmt(s) + " >= " + fmt(prev) + ")");
      prev = s;
    }
    c9.note("overlay hops 0->50%: " + hseq + " (cap " + fmt(1.1 * hops0) +
            "); square-root success 10..90%: " + sseq);
    lines.emplace_back(9, c9);
  }

  // ---- C10: formula oracles ---------------------------------------------------
  {
    Line c10;
    long double worst = 0.0L;
    const auto track = [&](double got, long double want, const char* name,
                           int i) {
      const long double diff = std::fabs(static_cast<long double>(got) - want);
      const long double rel =
          want == 0.0L ? diff : diff / std::fabs(want);
      worst = std::max(worst, rel);
      if (!close12(got, want))
        c10.fail(std::string(name) + " instance " + std::to_string(i) +
                 ": got " + fmt(got) + " want " +
                 fmt(static_cast<double>(want)));
    };
    constexpr int kN = 120;

    {  // similarity of requirement bitmasks: |a&b| / sqrt(|a||b|)
      mpo::RngStream rng = mpo::RngStream(7).split("oracle_similarity");
      for (int i = 0; i < kN; ++i) {
        const int universe = 1 + static_cast<int>(rng.below(64));
        const auto draw = [&] {
          mpo::QueryVector q;
          q.universe = universe;
          for (int b = 0; b < universe; ++b)
            if (rng.chance(0.3)) q.bits |= (1ull << b);
          if (q.bits == 0) q.bits = 1ull << rng.below(universe);
          return q;
        };
        const auto a = draw(), b = draw();
        int na = 0, nb = 0, both = 0;
        for (int bit = 0; bit < universe; ++bit) {
          na += (a.bits >> bit) & 1;
          nb += (b.bits >> bit) & 1;
          both += ((a.bits & b.bits) >> bit) & 1;
        }
        const long double want =
            both / std::sqrt(static_cast<long double>(na) * nb);
        track(mpo::query_similarity(a, b), want, "similarity", i);
      }
    }

    {  // pair evaluation: sum(qsim^alpha) * exchanges / time
      mpo::RngStream rng = mpo::RngStream(7).split("oracle_pair");
      for (int i = 0; i < kN; ++i) {
        const double alpha = rng.uniform_real(0.25, 3.0);
        mpo::PairHistory h;
        std::vector<std::pair<double, double>> recs;
        if (!rng.chance(0.1)) {
          const int k = 1 + static_cast<int>(rng.below(20));
          for (int j = 0; j < k; ++j)
            recs.emplace_back(rng.uniform_real(), rng.uniform_real(0.1, 5.0));
        }
        for (const auto& [q, dur] : recs) {
          h.answered_similarities.push_back(q);
          h.n_exchanges += 1;
          h.exchange_time += dur;
        }
        track(mpo::evaluate_pair(h, alpha), oracle_pair_eval(recs, alpha),
              "pair-eval", i);
      }
    }

    {  // source rank: distance-discounted weighted mean of pair evaluations
      mpo::RngStream rng = mpo::RngStream(7).split("oracle_rank");
      for (int i = 0; i < kN; ++i) {
        const double alpha = rng.uniform_real(0.5, 3.0);
        mpo::RngStream crng = rng.split("coords", static_cast<std::uint64_t>(i));
        const auto coords = mpo::place_nodes(8, crng, 400.0);
        const int target = static_cast<int>(rng.below(8));
        std::vector<int> evaluators;
        std::map<int, std::vector<std::pair<double, double>>> shadow;
        mpo::ExchangeHistory hist;
        for (int v = 0; v < 8; ++v) {
          if (!rng.chance(0.7)) continue;
          evaluators.push_back(v);  // may include the target: must be skipped
          if (v == target || !rng.chance(0.6)) continue;
          const int k = 1 + static_cast<int>(rng.below(4));
          for (int j = 0; j < k; ++j) {
            const double q = rng.uniform_real();
            const double dur = rng.uniform_real(0.1, 3.0);
            hist.record(v, target, q, dur);
            shadow[v].emplace_back(q, dur);
          }
        }
        long double num = 0.0L, den = 0.0L;
        for (int v : evaluators) {
          if (v == target) continue;
          const long double ev = oracle_pair_eval(shadow[v], alpha);
          const long double dist = std::hypot(
              coords[static_cast<std::size_t>(v)].x -
                  coords[static_cast<std::size_t>(target)].x,
              coords[static_cast<std::size_t>(v)].y -
                  coords[static_cast<std::size_t>(target)].y);
          const long double w = 1.0L / (1.0L + dist);
          num += ev * w;
          den += w;
        }
        const long double want = den == 0.0L ? 0.0L : num / den;
        track(mpo::source_rank(target, evaluators, hist, coords, alpha), want,
              "source-rank", i);
      }
    }

    {  // gate distance: weighted mean over role pairs present on both sides
      mpo::RngStream rng = mpo::RngStream(7).split("oracle_gate");
      int checked = 0;
      for (int i = 0; i < kN; ++i) {
        const auto make_view = [&](int key_base) {
          mpo::AsView v;
          for (int k = 0; k < 3; ++k) {
            mpo::MemberView m;
            m.key = key_base + k;
            m.coord = {rng.uniform_real(-500.0, 500.0),
                       rng.uniform_real(-500.0, 500.0)};
            v.members.push_back(m);
          }
          v.ic_local = rng.chance(0.8) ? key_base + 0 : -1;
          v.ic_level = rng.chance(0.8) ? key_base + 1 : -1;
          v.ic_layer = rng.chance(0.8) ? key_base + 2 : -1;
          return v;
        };
        const auto a = make_view(0);
        const auto b = make_view(10);
        const std::array<double, 3> weights = {rng.uniform_real(0.1, 3.0),
                                               rng.uniform_real(0.1, 3.0),
                                               rng.uniform_real(0.1, 3.0)};
        const auto coord_of = [](const mpo::AsView& v, int key) {
          for (const auto& m : v.members)
            if (m.key == key) return m.coord;
          return mpo::Coordinate{};
        };
        long double num = 0.0L, den = 0.0L;
        const std::array<std::pair<int, int>, 3> roles{
            std::pair<int, int>{a.ic_local, b.ic_local},
            std::pair<int, int>{a.ic_level, b.ic_level},
            std::pair<int, int>{a.ic_layer, b.ic_layer}};
        for (int r = 0; r < 3; ++r) {
          const auto [ka, kb] = roles[static_cast<std::size_t>(r)];
          if (ka < 0 || kb < 0) continue;
          const auto ca = coord_of(a, ka), cb = coord_of(b, kb);
          num += weights[static_cast<std::size_t>(r)] *
                 static_cast<long double>(std::hypot(ca.x - cb.x, ca.y - cb.y));
          den += weights[static_cast<std::size_t>(r)];
        }
        if (den == 0.0L) {  // every role vacant somewhere: the call must throw
          bool threw = false;
          try {
            (void)mpo::threshold_distance(a, b, weights);
          } catch (const std::invalid_argument&) {
            threw = true;
          }
          if (!threw) c10.fail("gate-distance: no-common-role case not rejected");
          continue;
        }
        ++checked;
        track(mpo::threshold_distance(a, b, weights), num / den,
              "gate-distance", i);
      }
      if (checked < 100)
        c10.fail("gate-distance: only " + std::to_string(checked) +
                 " value instances (< 100)");
    }

    {  // adaptive-degree target: round(d_max * sqrt(match/total)), clamped
      mpo::RngStream rng = mpo::RngStream(7).split("oracle_degree");
      for (int i = 0; i < kN; ++i) {
        mpo::SquareRootParams p;
        p.d_max = 8 + static_cast<int>(rng.below(192));
        p.d_min = 1 + static_cast<int>(rng.below(6));
        p.d0 = 1 + static_cast<int>(rng.below(8));
        long long total = static_cast<long long>(rng.below(1000001));
        if (i % 10 == 0) total = 0;  // no traffic yet: must return d0
        const long long match =
            total == 0
                ? static_cast<long long>(rng.below(100))
                : static_cast<long long>(
                      rng.below(static_cast<std::uint64_t>(total) * 6 / 5 + 1));
        int want;
        if (total <= 0) {
          want = p.d0;
        } else {
          const long long v = std::llround(
              p.d_max * std::sqrt(static_cast<double>(match) /
                                  static_cast<double>(total)));
          want = v <= p.d_min
                     ? p.d_min
                     : static_cast<int>(std::min<long long>(v, p.d_max));
        }
        const int got = mpo::ideal_sqrt_degree(match, total, p);
        if (got != want)
          c10.fail("degree-target instance " + std::to_string(i) + ": got " +
                   std::to_string(got) + " want " + std::to_string(want));
      }
    }

    c10.note("5 formulas x 120 randomized instances, worst relative error " +
             fmt(static_cast<double>(worst)));
    lines.emplace_back(10, c10);
  }

  // ---- C11: full head-loss recovery -------------------------------------------
  {
    Line c11;
    int recovered = 0;
    for (int i = 0; i < 100 && c11.pass; ++i) {
      mpo::RngStream rng =
          mpo::RngStream(11).split("recovery", static_cast<std::uint64_t>(i));
      const int n = 120 + static_cast<int>(rng.below(181));
      const int d = 3 + static_cast<int>(rng.below(2));
      mpo::RngStream crng = rng.split("coords");
      const auto coords = mpo::place_nodes(n, crng, 1000.0);
      std::vector<mpo::PeerSeed> peers(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) {
        auto& p = peers[static_cast<std::size_t>(k)];
        p.key = k;
        p.coord = coords[static_cast<std::size_t>(k)];
        const int nf = 1 + static_cast<int>(rng.below(3));
        for (int f = 0; f < nf; ++f)
          p.hosted.push_back(static_cast<int>(rng.below(200)));
      }
      mpo::OverlayParams params;
      params.d = d;
      mpo::Overlay ov = mpo::Overlay::bootstrap(peers, params);

      // Pick a cluster with three distinct heads and >= 6 members, so at
      // least three survivors remain after the heads die.
      const auto views = ov.ases();
      std::vector<const mpo::AsView*> cands;
      for (const auto& v : views)
        if (v.members.size() >= 6 && v.ic_level >= 0 && v.ic_local >= 0 &&
            v.ic_layer >= 0)
          cands.push_back(&v);
      if (cands.empty()) {
        c11.fail("instance " + std::to_string(i) + ": no eligible cluster");
        break;
      }
      const mpo::AsView& target =
          *cands[static_cast<std::size_t>(rng.below(cands.size()))];
      std::set<int> heads{target.ic_level, target.ic_local, target.ic_layer};
      std::set<int> survivors;
      std::vector<int> expected_files;
      for (const auto& m : target.members) {
        if (heads.count(m.key)) continue;
        survivors.insert(m.key);
        expected_files.insert(expected_files.end(), m.hosted.begin(),
                              m.hosted.end());
      }
      std::sort(expected_files.begin(), expected_files.end());
      expected_files.erase(
          std::unique(expected_files.begin(), expected_files.end()),
          expected_files.end());

      std::vector<int> victims(heads.begin(), heads.end());
      if (rng.chance(0.5)) {
        // Mix in unrelated normal-node losses, but only from clusters large
        // enough to stay above the 3-member floor, so no rebalancing moves
        // members around and the expected file set stays exact.
        std::vector<int> other_nns;
        for (const auto& v : views) {
          if (v.birth == target.birth || v.members.size() < 5) continue;
          for (const auto& m : v.members)
            if (m.role == mpo::Role::nn) other_nns.push_back(m.key);
        }
        for (int e = 0; e < 2 && !other_nns.empty(); ++e) {
          const auto j = static_cast<std::size_t>(rng.below(other_nns.size()));
          victims.push_back(other_nns[j]);
          other_nns.erase(other_nns.begin() + static_cast<std::ptrdiff_t>(j));
        }
      }

      const auto rec = ov.crash(victims);
      const mpo::RecoveryReport::Recovered* entry = nullptr;
      int hits = 0;
      for (const auto& r : rec.full_recoveries)
        if (r.birth == target.birth) {
          entry = &r;
          ++hits;
        }
      if (hits != 1) {
        c11.fail("instance " + std::to_string(i) + ": " + std::to_string(hits) +
                 " recovery records for the stricken cluster");
        break;
      }
      if (entry->restored_from != "level_backup" &&
          entry->restored_from != "layer_backup" &&
          entry->restored_from != "self") {
        c11.fail("instance " + std::to_string(i) + ": unknown restore path '" +
                 entry->restored_from + "'");
        break;
      }
      const std::set<int> fresh{entry->ic_level, entry->ic_local,
                                entry->ic_layer};
      if (fresh.size() != 3 || fresh.count(-1) ||
          !std::all_of(fresh.begin(), fresh.end(),
                       [&](int k) { return survivors.count(k) > 0; })) {
        c11.fail("instance " + std::to_string(i) +
                 ": heads not three distinct survivors");
        break;
      }
      const auto g = ov.as_graph();
      if (g.answerable(entry->ic_local) != expected_files) {
        c11.fail("instance " + std::to_string(i) +
                 ": recovered index lost files");
        break;
      }
      const auto after = ov.as_of(entry->ic_local);
      if (!after || after->birth != target.birth) {
        c11.fail("instance " + std::to_string(i) +
                 ": recovered head not in the original cluster");
        break;
      }
      const bool level_linked =
          after->level_parent >= 0 || !after->level_children.empty();
      const bool layer_linked = after->layer_parent >= 0 ||
                                !after->layer_children.empty() ||
                                !after->bridge_links.empty();
      if (after->members.size() < 3 || !level_linked || !layer_linked) {
        c11.fail("instance " + std::to_string(i) +
                 ": neighbor link classes incomplete after recovery");
        break;
      }
      const auto chk = ov.check_structure();
      if (!chk.ok() || chk.max_degree > d + 4 ||
          (chk.as_count >= d &&
           (!pow_below(d, chk.level_count - 1, chk.as_count) ||
            !pow_below(d, chk.layer_count - 1, chk.as_count)))) {
        c11.fail("instance " + std::to_string(i) + ": post-recovery audit: " +
                 (chk.violations.empty() ? "bounds" : chk.violations.front()));
        break;
      }
      ++recovered;
    }
    c11.note(std::to_string(recovered) +
             "/100 full head-loss recoveries clean (lossless index, fresh "
             "head triple, all link classes)");
    lines.emplace_back(11, c11);
  }

  // ---- C12: admission-control properties --------------------------------------
  {
    Line c12;
    int ww = 0, riders = 0, resumed = 0;

    for (int i = 0; i < 50 && c12.pass; ++i) {  // distant joins rejected
      mpo::RngStream rng =
          mpo::RngStream(12).split("whitewash", static_cast<std::uint64_t>(i));
      long long near_b = -1, far_b = -1;
      const double far_x = 2000.0 + rng.uniform_real(0.0, 3000.0);
      mpo::Overlay ov = two_cluster_overlay(rng, far_x, near_b, far_b);
      mpo::PeerSeed joiner;
      joiner.key = 100;
      joiner.coord = {-(50.0 + rng.uniform_real(0.0, 200.0)),
                      rng.uniform_real(-1.0, 1.0)};
      const int before = ov.peer_count();
      // Even instances aim at the far cluster directly; odd ones go through
      // the free join flow, whose nearest candidate (the full origin
      // cluster) cannot take the peer, leaving only the far cluster, which
      // sits beyond the gate.
      const auto rep = (i % 2 == 0) ? ov.join_targeting(joiner, far_b)
                                    : ov.join(joiner);
      if (rep.kind != mpo::JoinReport::Kind::rejected_whitewasher)
        c12.fail("distant join " + std::to_string(i) + " not rejected");
      else if (ov.live(joiner.key) || ov.peer_count() != before)
        c12.fail("rejected joiner " + std::to_string(i) + " left state behind");
      else
        ++ww;
    }

    for (int i = 0; i < 50 && c12.pass; ++i) {  // free rider displaced
      mpo::RngStream rng =
          mpo::RngStream(12).split("rider", static_cast<std::uint64_t>(i));
      std::vector<mpo::PeerSeed> peers;
      for (int k = 0; k < 6; ++k) {
        mpo::PeerSeed p;
        p.key = k;
        p.coord = {rng.uniform_real(-5.0, 5.0), rng.uniform_real(-5.0, 5.0)};
        p.hosted = {k};
        peers.push_back(std::move(p));
      }
      mpo::OverlayParams params;
      params.d = 3;
      mpo::Overlay ov = mpo::Overlay::bootstrap(peers, params);
      const long long birth = ov.as_of(0)->birth;
      const int rider = static_cast<int>(rng.below(6));
      for (int k = 0; k < 6; ++k) {  // everyone except the rider serves
        if (k == rider) continue;
        for (int round = 0; round < 2; ++round) {
          int client = static_cast<int>(rng.below(6));
          if (client == k) client = (client + 1) % 6;
          ov.record_service(client, k, rng.uniform_real(0.4, 0.9),
                            rng.uniform_real(0.5, 2.0));
        }
      }
      ov.reelect_all();
      if (ov.role_of(rider) != mpo::Role::nn || ov.sr_of(rider) != 0.0) {
        c12.fail("rider setup " + std::to_string(i) + " broken");
        continue;
      }
      mpo::PeerSeed joiner;
      joiner.key = 100;
      joiner.coord = {rng.uniform_real(-5.0, 5.0), rng.uniform_real(-5.0, 5.0)};
      const auto rep = ov.join_targeting(joiner, birth);
      if (rep.kind != mpo::JoinReport::Kind::accepted ||
          rep.as_birth != birth || rep.displaced.size() != 1 ||
          rep.displaced[0] != rider)
        c12.fail("full-cluster join " + std::to_string(i) +
                 " did not drop exactly the free rider");
      else if (!ov.live(rider) || ov.as_of(rider)->birth == birth ||
               !ov.live(joiner.key) || !ov.check_structure().ok())
        c12.fail("rider relocation " + std::to_string(i) + " inconsistent");
      else
        ++riders;
    }

    for (int i = 0; i < 50 && c12.pass; ++i) {  // archived rank resumes
      mpo::RngStream rng =
          mpo::RngStream(12).split("resume", static_cast<std::uint64_t>(i));
      std::vector<mpo::PeerSeed> peers;
      for (int k = 0; k < 6; ++k) {
        mpo::PeerSeed p;
        p.key = k;
        p.coord = {rng.uniform_real(-5.0, 5.0), rng.uniform_real(-5.0, 5.0)};
        p.hosted = {k};
        peers.push_back(std::move(p));
      }
      mpo::OverlayParams params;
      params.d = 3;
      mpo::Overlay ov = mpo::Overlay::bootstrap(peers, params);
      const int departer = static_cast<int>(rng.below(6));
      for (int round = 0; round < 3; ++round) {
        int client = static_cast<int>(rng.below(6));
        if (client == departer) client = (client + 1) % 6;
        ov.record_service(client, departer, rng.uniform_real(0.3, 1.0),
                          rng.uniform_real(0.5, 2.0));
      }
      const double sr0 = ov.sr_of(departer);
      if (!(sr0 > 0.0)) {
        c12.fail("resume setup " + std::to_string(i) + ": rank not positive");
        continue;
      }
      ov.leave_normal(departer);
      const auto archived = ov.archived_sr(departer);
      if (!archived || *archived != sr0) {
        c12.fail("departure " + std::to_string(i) + " did not archive the rank");
        continue;
      }
      mpo::PeerSeed back;
      back.key = departer;
      back.coord = {rng.uniform_real(-5.0, 5.0), rng.uniform_real(-5.0, 5.0)};
      back.hosted = {departer};
      const auto rep = ov.join(back);
      if (rep.kind == mpo::JoinReport::Kind::rejected_whitewasher ||
          !rep.resumed_sr || ov.sr_of(departer) != sr0 ||
          ov.archived_sr(departer).has_value())
        c12.fail("rejoin " + std::to_string(i) +
                 " did not resume the archived rank exactly");
      else
        ++resumed;
    }

    c12.note(std::to_string(ww) + "/50 distant joins rejected, " +
             std::to_string(riders) + "/50 free riders displaced, " +
             std::to_string(resumed) + "/50 ranks resumed exactly");
    lines.emplace_back(12, c12);
  }

  // ---- C13: deterministic reruns ----------------------------------------------
  {
    Line c13;
    mpo::ExperimentConfig cfg;
    cfg.n = 200;
    cfg.seeds = {1, 2};
    cfg.n_queries = 1500;
    cfg.ttls = {1, 4};
    cfg.churn_fractions = {0.0, 0.3};
    cfg.catalog_files = 100;
    cfg.resolve();
    cfg.validate();
    const std::string first = mpo::run_experiment(cfg).dump(2);
    const std::string second = mpo::run_experiment(cfg).dump(2);
    if (first != second)
      c13.fail("rerun diverged (" + std::to_string(first.size()) + " vs " +
               std::to_string(second.size()) + " bytes)");
    c13.note("two runs, " + std::to_string(first.size()) +
             " report bytes, byte-identical");
    lines.emplace_back(13, c13);
  }

  bool all_ok = true;
  for (const auto& [id, line] : lines) {
    std::printf("C%d %s - %s\n", id, line.pass ? "PASS" : "FAIL",
                line.detail.c_str());
    all_ok = all_ok && line.pass;
  }
  std::printf("ACCEPTANCE %s (13 criteria, %.1f s)\n",
              all_ok ? "PASS" : "FAIL", seconds_since(t_start));
  return all_ok ? 0 : 1;
}
