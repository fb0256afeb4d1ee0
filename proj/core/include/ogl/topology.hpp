#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ogl::topology {

struct SlotGraph {
  std::vector<int> nodes;               // present this slot, sorted
  std::map<int, std::vector<int>> adj;  // sorted neighbor lists
};

/// Immutable per-slot contact graph sequence. Construction validates that
/// every slot's adjacency is symmetric, irreflexive, and confined to the
/// slot's present nodes.
class ContactSchedule {
 public:
  ContactSchedule() = default;
  explicit ContactSchedule(std::vector<SlotGraph> slots);

  int slots() const { return static_cast<int>(slots_.size()); }
  bool present(int v, int t) const;
  const std::vector<int>& neighbors(int v, int t) const;  // empty when absent
  const std::vector<int>& present_nodes(int t) const;
  std::vector<int> all_nodes() const;

  /// Mean neighbor count over all (present node, slot) pairs.
  double mean_degree() const;

 private:
  std::vector<SlotGraph> slots_;
};

struct ErdosRenyiConfig {
  int node_count = 0;
  double edge_prob = 0.0;
  int slots = 0;
  std::uint64_t seed = 0;
};

/// Independent G(n,p) per slot; all nodes present in every slot.
ContactSchedule erdos_renyi_schedule(const ErdosRenyiConfig& cfg);

/// Position-trace contacts: CSV `time_s,node_id,x_m,y_m`, per-node timestamps
/// strictly increasing. A node is present in slot t when its records cover
/// [t, t+1) x slot_length; positions are linearly interpolated at slot starts
/// and nodes within contact_radius become neighbors.
ContactSchedule trace_schedule(const std::string& trace_path, double contact_radius_m,
                               double slot_length_s);

struct ChurnConfig {
  double arrival_rate_per_min = 0.0;
  double mean_sojourn_min = 0.0;
  double duration_min = 0.0;
  double contact_radius_m = 0.0;
  double area_side_m = 0.0;
  double slot_length_s = 0.0;
  double speed_mps = 8.0;
  std::uint64_t seed = 0;
};

/// M/M/inf population over a square area: Poisson arrivals, exponential
/// sojourns, and a stationary initial population (Poisson(rate x sojourn)
/// nodes with memoryless residual sojourns) so the very first slot already
/// sits at the long-run operating point. Nodes move by random waypoint;
/// presence and contacts are sampled at slot starts. Node ids are unique and
/// never reused.
ContactSchedule synthetic_churn_schedule(const ChurnConfig& cfg);

/// Contact-list CSV `slot,node_a,node_b`, one row per undirected edge.
/// Lossy for nodes with no contacts in a slot: only edge endpoints count as
/// present on re-import.
void write_contact_list(const ContactSchedule& schedule, std::ostream& out);
ContactSchedule read_contact_list(std::istream& in);

}  // namespace ogl::topology
