#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mpo/geometry.hpp"
#include "mpo/graph.hpp"
#include "mpo/node_id.hpp"
#include "mpo/ranking.hpp"

namespace mpo {

// Activity status of a peer; the transition (busy|normal) -> free triggers
// an information exchange with the cluster's local head (burst trigger).
enum class NodeStatus { normal, busy, free };

// Role of a peer inside its cluster. Every cluster (autonomous system, AS)
// holds up to d normal nodes (nn) plus three information centers:
//   ic_local — intra-cluster hub: every nn links only to it;
//   ic_level — carries the level-tree links and the full child backups;
//   ic_layer — carries the layer-tree links, slim backups, bridge links.
enum class Role { nn, ic_local, ic_level, ic_layer };

std::string role_name(Role r);
Role parse_role(const std::string& name);

struct OverlayParams {
  int d = 2;                // max normal nodes per cluster; capacity d + 3
  int as_fill_target = 0;   // bootstrap members per cluster; 0 means d + 3
  double alpha_sim = 2.0;   // similarity exponent in pair evaluations
  double load_factor = 0.1; // free-rider threshold = factor x mean rank
  // Weights of the {local, level, layer} head distances in the
  // threshold-distance gate that rejects whitewashing joins.
  std::array<double, 3> role_weights{1.0, 1.0, 1.0};
  int join_relocation_cap = 8;  // displaced-member rejoin recursion guard
  int region_cells = 1;         // grid for the shared-prefix region labels
  double spread = 1000.0;       // coordinate half-extent for region labels
  // When > 0, levels grow as fixed-width rows of this many clusters
  // (compatibility growth mode); 0 selects the canonical balanced shape
  // that keeps both height bounds valid as the overlay grows.
  int legacy_level_width = 0;
};

// Input description of a peer for bootstrap and join.
struct PeerSeed {
  int key = 0;  // persistent external identity (catalog host index)
  Coordinate coord{};
  std::vector<int> hosted;  // file ranks this peer stores
  double tolerance = std::numeric_limits<double>::infinity();
};

// Read-only view of one cluster member.
struct MemberView {
  int key = 0;
  std::uint32_t node_index = 0;
  double sr = 0.0;
  Role role = Role::nn;
  NodeStatus status = NodeStatus::normal;
  Coordinate coord{};
  std::vector<int> hosted;
};

// Read-only view of one cluster and its lattice links (by cluster birth id).
struct AsView {
  long long birth = 0;
  std::uint32_t layer = 0;
  std::uint32_t level = 0;
  std::uint32_t as_index = 0;
  int ic_level = -1;  // member keys; -1 marks a vacant role
  int ic_local = -1;
  int ic_layer = -1;
  long long level_parent = -1;
  long long layer_parent = -1;
  std::vector<long long> level_children;
  std::vector<long long> layer_children;
  std::vector<long long> bridge_links;  // extra layer-head bridge edges
  std::vector<MemberView> members;
};

struct JoinReport {
  enum class Kind { accepted, seeded, rejected_whitewasher };
  Kind kind = Kind::accepted;
  long long as_birth = -1;      // final cluster (accepted / seeded)
  std::vector<int> displaced;   // members dropped to make room, relocated
  bool resumed_sr = false;      // archived rank restored on rejoin
};

struct LeaveReport {
  Role vacated = Role::nn;
  int promoted = -1;   // key promoted into the vacated head role, or -1
  int notified = 0;    // neighbor clusters whose cached head view updated
};

struct RecoveryReport {
  struct Recovered {
    long long birth = 0;
    // Which stored copy rebuilt the cluster after all three heads died:
    // "level_backup" (full, from the level parent), "layer_backup" (slim,
    // from the layer parent) or "self" (survivors reorganize alone).
    std::string restored_from;
    int ic_level = -1;
    int ic_local = -1;
    int ic_layer = -1;
  };
  std::vector<long long> defunct;            // clusters that lost everyone
  std::vector<Recovered> full_recoveries;    // all-heads-dead recoveries
  std::vector<std::pair<long long, int>> promotions;  // (birth, new head)
};

struct StructureReport {
  int max_degree = 0;
  long long as_count = 0;
  int level_count = 0;
  int layer_count = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Emitted by burst_update: the peer refreshes the local head's records.
struct ExchangeEvent {
  int node = 0;
  int ic_local = 0;
};

// Pure head election: order members by (rank desc, node_index asc) and
// assign roles in priority ic_level, ic_local, ic_layer; with fewer than
// three members the trailing roles stay vacant (-1).
struct Election {
  int ic_level = -1;
  int ic_local = -1;
  int ic_layer = -1;
};
struct ElectionCandidate {
  int key = 0;
  double sr = 0.0;
  std::uint32_t node_index = 0;
};
Election elect_heads(const std::vector<ElectionCandidate>& members);

// Gate distance between two clusters: weighted mean of the coordinate
// distances between their same-role heads, vacant roles dropped from both
// sums. Weights order {local, level, layer}.
double threshold_distance(const AsView& a, const AsView& b,
                          const std::array<double, 3>& role_weights);

// Structural audit of an exported snapshot (see Overlay::to_json): per-role
// degree caps, height bounds, identifier uniqueness.
StructureReport check_snapshot(const nlohmann::json& snapshot);

// The cluster lattice. All operations are deterministic: no randomness is
// consumed anywhere, so identical call sequences rebuild identical state.
class Overlay {
 public:
  explicit Overlay(OverlayParams params);

  // Places every peer at once: peers are sorted by distance to the origin
  // anchor and packed into clusters of as_fill_target; the anchor itself
  // keeps no state afterwards (joins use head-relative distances only).
  static Overlay bootstrap(const std::vector<PeerSeed>& peers,
                           OverlayParams params);

  // --- mutations -------------------------------------------------------
  JoinReport join(const PeerSeed& peer);
  // Join aimed at one specific cluster; distant targets are rejected as
  // whitewashing (gate against the nearest candidate's threshold).
  JoinReport join_targeting(const PeerSeed& peer, long long as_birth);
  // Graceful departure: heads hand over to the highest-ranked normal node
  // and notify exactly their linked neighbor classes; normal nodes are
  // marked offline in the local head's records.
  LeaveReport leave_normal(int key);
  // Abrupt loss of a set of peers, then recovery: surviving heads promote
  // replacements; clusters that lost all three heads are rebuilt from the
  // level parent's full backup (or the layer parent's slim one, or by the
  // survivors alone); empty clusters turn defunct and the lattice reshapes.
  RecoveryReport crash(const std::vector<int>& keys);
  // Status change; (busy|normal) -> free emits one exchange event with the
  // peer's local head and refreshes the stored records.
  std::vector<ExchangeEvent> burst_update(int key, NodeStatus status);
  // Record one answered query: `server` answered `client` with similarity
  // qsim after `duration` time units; the server's source rank updates.
  void record_service(int client, int server, double qsim, double duration);
  // Re-run head elections in every cluster (used once ranks exist).
  void reelect_all();

  // --- inspection ------------------------------------------------------
  StructureReport check_structure() const;
  // Exported search graph over peer keys: nn–ic_local star, head triangle,
  // level/layer tree edges, bridge edges. Heads answer for the content
  // they index: every head indexes its own cluster; ic_level additionally
  // indexes the level children's clusters.
  Graph as_graph(int min_size = 0) const;
  std::map<int, NodeId> node_ids() const;
  std::vector<AsView> ases() const;
  std::optional<AsView> as_of(int key) const;
  long long as_count() const;
  int peer_count() const;
  std::vector<int> live_keys() const;
  bool live(int key) const;
  double sr_of(int key) const;
  Role role_of(int key) const;
  NodeStatus status_of(int key) const;
  std::optional<double> archived_sr(int key) const;
  // Cached neighbor-head views of one cluster (keyed by neighbor birth).
  std::map<long long, int> known_level_heads(long long birth) const;
  std::map<long long, int> known_layer_heads(long long birth) const;
  const OverlayParams& params() const { return params_; }
  int level_count() const;
  int layer_count() const;

  // Snapshot with nodes, roles, edges, ranks and lattice links; canonical
  // (sorted keys) so equal states serialize byte-identically.
  nlohmann::json to_json() const;

 private:
  struct Member {
    int key = 0;
    std::uint32_t node_index = 0;
    Coordinate coord{};
    int region = 0;
    double tolerance = 0.0;
    NodeStatus status = NodeStatus::normal;
    double sr = 0.0;
    std::vector<int> hosted;
  };

  struct BackupEntry {
    int key = 0;
    double sr = 0.0;
    std::vector<int> files;
    Role role = Role::nn;
    bool offline = false;
  };
  struct SlimBackupEntry {  // layer path carries identity and rank only
    int key = 0;
    double sr = 0.0;
  };

  struct As {
    long long birth = 0;
    std::vector<Member> members;
    int ic_level = -1;
    int ic_local = -1;
    int ic_layer = -1;
    // Derived placement, recomputed whenever the cluster set changes:
    std::uint32_t layer = 0;
    std::uint32_t level = 0;
    std::uint32_t as_index = 0;
    long long level_parent = -1;
    long long layer_parent = -1;
    std::vector<long long> level_children;
    std::vector<long long> layer_children;
    std::vector<long long> bridge_links;
    // Stored copies:
    std::map<int, BackupEntry> member_backup;  // kept by ic_local
    std::map<long long, std::vector<BackupEntry>> level_child_backup;
    std::map<long long, std::vector<SlimBackupEntry>> layer_child_backup;
    // Cached head keys of each linked neighbor cluster, refreshed only by
    // the notification paths (handovers, recoveries, reshapes, bursts):
    // level links use the neighbor's ic_level, layer and bridge links its
    // ic_layer. Staleness here is a structural violation.
    std::map<long long, int> known_level_heads;
    std::map<long long, int> known_layer_heads;
  };

  struct RetiredRecord {
    double sr = 0.0;
    Packed128 last_id = 0;
  };

  // state
  OverlayParams params_;
  std::map<long long, As> ases_;
  std::vector<long long> order_;  // live cluster births, ascending
  std::map<int, long long> peer_as_;
  std::map<int, RetiredRecord> retired_;
  ExchangeHistory history_;
  std::vector<Coordinate> coords_;  // indexed by peer key
  long long next_birth_ = 0;

  // internals
  As& as_at(long long birth);
  const As& as_at(long long birth) const;
  Member& member_at(As& as, int key);
  const Member* find_member(const As& as, int key) const;
  Role role_in(const As& as, int key) const;
  bool is_head(const As& as, int key) const;
  int acting_head(const As& as, Role role) const;
  double mean_head_distance(const Coordinate& c, const As& as) const;
  std::uint32_t next_node_index(const As& as) const;
  void insert_member(As& as, Member m);
  Member remove_member(As& as, int key);
  void vacancy_election(As& as);
  int promote_into(As& as, Role role, int& notified);
  void notify_level_neighbors(const As& as, int& notified);
  void notify_layer_neighbors(const As& as, int& notified);
  std::vector<long long> level_neighbors(const As& as) const;
  std::vector<long long> layer_neighbors(const As& as) const;
  void rebuild_all_caches();
  void refresh_backups();
  void update_backup_entry(As& as, int key);
  void recompute_sr(As& as, int key);
  long long seed_new_as(Member m);
  JoinReport join_impl(const PeerSeed& peer, double archived,
                       std::set<long long> excluded, int depth,
                       std::vector<int>& displaced, bool& dirty);
  // One admission attempt against one cluster: accept into a free slot,
  // displace the lowest-ranked free rider, or displace the farthest member
  // when the newcomer is closer; nullopt when the cluster keeps everyone.
  std::optional<JoinReport> try_accept_into(As& as, Member& m,
                                            const std::set<long long>& excluded,
                                            int depth,
                                            std::vector<int>& displaced,
                                            bool& dirty);
  void relocate(Member m, std::set<long long> excluded, int depth,
                std::vector<int>& displaced, bool& dirty);
  bool consolidate_small_ases();
  void reshape();
  void reshape_canonical();
  void reshape_legacy();
  void erase_as(long long birth);
  void epilogue(bool dirty);
  AsView view_of(const As& as) const;
  std::vector<int> cluster_index(const As& as) const;
};

}  // namespace mpo
