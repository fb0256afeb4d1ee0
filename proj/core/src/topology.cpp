#include "ogl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include "ogl/csv.hpp"
#include "ogl/rng.hpp"

namespace ogl::topology {

namespace {

const std::vector<int> kNoNeighbors;

double dist2(double ax, double ay, double bx, double by) {
  return (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
}

/// Builds one slot's graph from point positions: edge iff within radius.
SlotGraph slot_from_positions(const std::vector<std::pair<int, std::pair<double, double>>>& pts,
                              double radius) {
  SlotGraph g;
  for (const auto& [id, pos] : pts) {
    g.nodes.push_back(id);
    g.adj[id];
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  double r2 = radius * radius;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (dist2(pts[i].second.first, pts[i].second.second, pts[j].second.first,
                pts[j].second.second) <= r2) {
        g.adj[pts[i].first].push_back(pts[j].first);
        g.adj[pts[j].first].push_back(pts[i].first);
      }
    }
  }
  for (auto& [id, nbrs] : g.adj) std::sort(nbrs.begin(), nbrs.end());
  return g;
}

}  // namespace

ContactSchedule::ContactSchedule(std::vector<SlotGraph> slots) : slots_(std::move(slots)) {
  for (std::size_t t = 0; t < slots_.size(); ++t) {
    auto& g = slots_[t];
    std::sort(g.nodes.begin(), g.nodes.end());
    if (std::adjacent_find(g.nodes.begin(), g.nodes.end()) != g.nodes.end()) {
      throw std::logic_error("topology: duplicate node in slot " + std::to_string(t));
    }
    for (auto& [v, nbrs] : g.adj) {
      if (!std::binary_search(g.nodes.begin(), g.nodes.end(), v)) {
        throw std::logic_error("topology: adjacency for absent node in slot " +
                               std::to_string(t));
      }
      std::sort(nbrs.begin(), nbrs.end());
      for (int u : nbrs) {
        if (u == v) throw std::logic_error("topology: self-loop in slot " + std::to_string(t));
        auto it = g.adj.find(u);
        if (it == g.adj.end() ||
            !std::binary_search(it->second.begin(), it->second.end(), v)) {
          throw std::logic_error("topology: asymmetric edge in slot " + std::to_string(t));
        }
      }
    }
  }
}

bool ContactSchedule::present(int v, int t) const {
  if (t < 0 || t >= slots()) return false;
  const auto& nodes = slots_[static_cast<std::size_t>(t)].nodes;
  return std::binary_search(nodes.begin(), nodes.end(), v);
}

const std::vector<int>& ContactSchedule::neighbors(int v, int t) const {
  if (t < 0 || t >= slots()) return kNoNeighbors;
  const auto& adj = slots_[static_cast<std::size_t>(t)].adj;
  auto it = adj.find(v);
  return it == adj.end() ? kNoNeighbors : it->second;
}

const std::vector<int>& ContactSchedule::present_nodes(int t) const {
  static const std::vector<int> kNone;
  if (t < 0 || t >= slots()) return kNone;
  return slots_[static_cast<std::size_t>(t)].nodes;
}

std::vector<int> ContactSchedule::all_nodes() const {
  std::set<int> ids;
  for (const auto& g : slots_) ids.insert(g.nodes.begin(), g.nodes.end());
  return {ids.begin(), ids.end()};
}

double ContactSchedule::mean_degree() const {
  long long pairs = 0;
  long long degree_sum = 0;
  for (const auto& g : slots_) {
    for (int v : g.nodes) {
      ++pairs;
      auto it = g.adj.find(v);
      degree_sum += it == g.adj.end() ? 0 : static_cast<long long>(it->second.size());
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(degree_sum) / static_cast<double>(pairs);
}

ContactSchedule erdos_renyi_schedule(const ErdosRenyiConfig& cfg) {
  if (cfg.node_count < 0 || cfg.slots < 0 || cfg.edge_prob < 0.0 || cfg.edge_prob > 1.0) {
    throw std::invalid_argument("topology: bad Erdos-Renyi config");
  }
  Rng rng(cfg.seed);
  std::vector<SlotGraph> slots(static_cast<std::size_t>(cfg.slots));
  for (auto& g : slots) {
    for (int v = 0; v < cfg.node_count; ++v) {
      g.nodes.push_back(v);
      g.adj[v];
    }
    for (int i = 0; i < cfg.node_count; ++i) {
      for (int j = i + 1; j < cfg.node_count; ++j) {
        if (rng.bernoulli(cfg.edge_prob)) {
          g.adj[i].push_back(j);
          g.adj[j].push_back(i);
        }
      }
    }
  }
  return ContactSchedule(std::move(slots));
}

ContactSchedule trace_schedule(const std::string& trace_path, double contact_radius_m,
                               double slot_length_s) {
  if (contact_radius_m <= 0 || slot_length_s <= 0) {
    throw std::invalid_argument("topology: radius and slot length must be positive");
  }
  csv::Table t = csv::read_table_file(trace_path);
  int c_time = t.column("time_s");
  int c_node = t.column("node_id");
  int c_x = t.column("x_m");
  int c_y = t.column("y_m");
  if (c_time < 0 || c_node < 0 || c_x < 0 || c_y < 0) {
    throw std::runtime_error("topology: trace needs columns time_s,node_id,x_m,y_m");
  }

  struct Record {
    double time, x, y;
  };
  std::map<int, std::vector<Record>> tracks;
  double max_time = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::size_t row = i + 2;
    int node = static_cast<int>(csv::parse_int(t.rows[i][static_cast<std::size_t>(c_node)], row,
                                               static_cast<std::size_t>(c_node + 1)));
    Record r{csv::parse_double(t.rows[i][static_cast<std::size_t>(c_time)], row,
                               static_cast<std::size_t>(c_time + 1)),
             csv::parse_double(t.rows[i][static_cast<std::size_t>(c_x)], row,
                               static_cast<std::size_t>(c_x + 1)),
             csv::parse_double(t.rows[i][static_cast<std::size_t>(c_y)], row,
                               static_cast<std::size_t>(c_y + 1))};
    auto& track = tracks[node];
    if (!track.empty() && r.time <= track.back().time) {
      throw std::runtime_error("topology: non-monotone timestamps for node " +
                               std::to_string(node) + " at row " + std::to_string(row));
    }
    track.push_back(r);
    max_time = std::max(max_time, r.time);
  }

  int slot_count = static_cast<int>(std::floor(max_time / slot_length_s));
  std::vector<SlotGraph> slots;
  for (int s = 0; s < slot_count; ++s) {
    double sample_t = s * slot_length_s;
    double slot_end = (s + 1) * slot_length_s;
    std::vector<std::pair<int, std::pair<double, double>>> pts;
    for (const auto& [node, track] : tracks) {
      if (track.front().time > sample_t || track.back().time < slot_end) continue;
      auto it = std::lower_bound(track.begin(), track.end(), sample_t,
                                 [](const Record& r, double tt) { return r.time < tt; });
      double x, y;
      if (it->time == sample_t || it == track.begin()) {
        x = it->x;
        y = it->y;
      } else {
        auto prev = it - 1;
        double f = (sample_t - prev->time) / (it->time - prev->time);
        x = prev->x + f * (it->x - prev->x);
        y = prev->y + f * (it->y - prev->y);
      }
      pts.emplace_back(node, std::make_pair(x, y));
    }
    slots.push_back(slot_from_positions(pts, contact_radius_m));
  }
  return ContactSchedule(std::move(slots));
}

ContactSchedule synthetic_churn_schedule(const ChurnConfig& cfg) {
  if (cfg.arrival_rate_per_min < 0 || cfg.mean_sojourn_min <= 0 || cfg.duration_min <= 0 ||
      cfg.contact_radius_m <= 0 || cfg.area_side_m <= 0 || cfg.slot_length_s <= 0 ||
      cfg.speed_mps < 0) {
    throw std::invalid_argument("topology: bad churn config");
  }

  struct Visit {
    int id;
    double enter_s, depart_s;
  };
  Rng rng(derive_seed(cfg.seed, "churn-arrivals"));
  double duration_s = cfg.duration_min * 60.0;
  double sojourn_s = cfg.mean_sojourn_min * 60.0;
  std::vector<Visit> visits;
  int next_id = 0;

  // Stationary start: the population already in the area follows
  // Poisson(rate x sojourn), each with a memoryless residual stay.
  int initial = rng.poisson(cfg.arrival_rate_per_min * cfg.mean_sojourn_min);
  for (int i = 0; i < initial; ++i) {
    visits.push_back({next_id++, 0.0, rng.exponential(sojourn_s)});
  }

  int arrivals = rng.poisson(cfg.arrival_rate_per_min * cfg.duration_min);
  std::vector<double> times(static_cast<std::size_t>(arrivals));
  for (auto& tt : times) tt = rng.uniform(0.0, duration_s);
  std::sort(times.begin(), times.end());
  for (double enter : times) {
    visits.push_back({next_id++, enter, enter + rng.exponential(sojourn_s)});
  }

  int slot_count = static_cast<int>(std::llround(duration_s / cfg.slot_length_s));

  // Random-waypoint tracks, one independent stream per node so trajectories
  // do not depend on the rest of the population.
  struct Track {
    std::vector<std::pair<double, double>> pos;  // per present slot, in order
    int first_slot = 0;
  };
  std::map<int, Track> tracks;
  for (const auto& v : visits) {
    Rng node_rng(derive_seed(cfg.seed, "churn-node", static_cast<std::uint64_t>(v.id)));
    double x = node_rng.uniform(0.0, cfg.area_side_m);
    double y = node_rng.uniform(0.0, cfg.area_side_m);
    double wx = node_rng.uniform(0.0, cfg.area_side_m);
    double wy = node_rng.uniform(0.0, cfg.area_side_m);

    Track track;
    track.first_slot = -1;
    for (int s = 0; s < slot_count; ++s) {
      double sample_t = s * cfg.slot_length_s;
      if (sample_t >= v.depart_s) break;
      if (v.enter_s > sample_t) continue;
      if (track.first_slot < 0) track.first_slot = s;
      track.pos.emplace_back(x, y);

      double step = cfg.speed_mps * cfg.slot_length_s;
      for (int hop = 0; step > 0 && hop < 64; ++hop) {
        double d = std::sqrt(dist2(x, y, wx, wy));
        if (d > step) {
          x += (wx - x) / d * step;
          y += (wy - y) / d * step;
          break;
        }
        x = wx;
        y = wy;
        step -= d;
        wx = node_rng.uniform(0.0, cfg.area_side_m);
        wy = node_rng.uniform(0.0, cfg.area_side_m);
      }
    }
    if (track.first_slot >= 0) tracks[v.id] = std::move(track);
  }

  std::vector<SlotGraph> slots;
  for (int s = 0; s < slot_count; ++s) {
    std::vector<std::pair<int, std::pair<double, double>>> pts;
    for (const auto& [id, track] : tracks) {
      int k = s - track.first_slot;
      if (k >= 0 && k < static_cast<int>(track.pos.size())) {
        pts.emplace_back(id, track.pos[static_cast<std::size_t>(k)]);
      }
    }
    slots.push_back(slot_from_positions(pts, cfg.contact_radius_m));
  }
  return ContactSchedule(std::move(slots));
}

void write_contact_list(const ContactSchedule& schedule, std::ostream& out) {
  csv::Writer w(out);
  w.header({"slot", "node_a", "node_b"});
  for (int t = 0; t < schedule.slots(); ++t) {
    for (int v : schedule.present_nodes(t)) {
      for (int u : schedule.neighbors(v, t)) {
        if (u > v) {
          w.cell(t).cell(v).cell(u);
          w.end_row();
        }
      }
    }
  }
}

ContactSchedule read_contact_list(std::istream& in) {
  csv::Table t = csv::read_table(in);
  int c_slot = t.column("slot");
  int c_a = t.column("node_a");
  int c_b = t.column("node_b");
  if (c_slot < 0 || c_a < 0 || c_b < 0) {
    throw std::runtime_error("topology: contact list needs columns slot,node_a,node_b");
  }
  std::map<int, std::set<std::pair<int, int>>> edges;
  int max_slot = -1;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::size_t row = i + 2;
    int slot = static_cast<int>(csv::parse_int(t.rows[i][static_cast<std::size_t>(c_slot)], row,
                                               static_cast<std::size_t>(c_slot + 1)));
    int a = static_cast<int>(csv::parse_int(t.rows[i][static_cast<std::size_t>(c_a)], row,
                                            static_cast<std::size_t>(c_a + 1)));
    int b = static_cast<int>(csv::parse_int(t.rows[i][static_cast<std::size_t>(c_b)], row,
                                            static_cast<std::size_t>(c_b + 1)));
    if (slot < 0 || a == b) {
      throw std::runtime_error("topology: bad contact row " + std::to_string(row));
    }
    edges[slot].insert({std::min(a, b), std::max(a, b)});
    max_slot = std::max(max_slot, slot);
  }
  std::vector<SlotGraph> slots(static_cast<std::size_t>(max_slot + 1));
  for (const auto& [slot, pairs] : edges) {
    auto& g = slots[static_cast<std::size_t>(slot)];
    std::set<int> nodes;
    for (const auto& [a, b] : pairs) {
      nodes.insert(a);
      nodes.insert(b);
      g.adj[a].push_back(b);
      g.adj[b].push_back(a);
    }
    g.nodes.assign(nodes.begin(), nodes.end());
  }
  return ContactSchedule(std::move(slots));
}

}  // namespace ogl::topology
