#include "ogl/energy.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "ogl/csv.hpp"

namespace ogl::energy {

void EnergyLedger::record_training(int v, int t, int z, long long d, const CostParams& p) {
  if (z < 0 || d < 0) throw std::invalid_argument("energy: negative training record");
  if (!train_seen_.insert({v, t}).second) {
    throw std::invalid_argument("energy: duplicate training record for node " +
                                std::to_string(v) + " slot " + std::to_string(t));
  }
  double delta = static_cast<double>(z) * static_cast<double>(d) * (p.e_g + p.e_s);
  s_total_ += delta;
  per_node_[v].s += delta;
  events_.push_back({t, v, EnergyEvent::Kind::train, z, d, 0, 0, 0, 0, delta});
}

void EnergyLedger::record_evaluation(int v, int t, long long s, const CostParams& p) {
  if (s < 0) throw std::invalid_argument("energy: negative evaluation record");
  if (!eval_seen_.insert({v, t}).second) {
    throw std::invalid_argument("energy: duplicate evaluation record for node " +
                                std::to_string(v) + " slot " + std::to_string(t));
  }
  double delta = static_cast<double>(s) * (p.e_e + p.e_es);
  gamma_total_ += delta;
  per_node_[v].gamma += delta;
  events_.push_back({t, v, EnergyEvent::Kind::eval, 0, 0, s, 0, 0, 0, delta});
}

void EnergyLedger::record_communication(int v, int t, int h, int k, const CostParams& p) {
  if (h < 0 || k < 0 || k > h) {
    throw std::invalid_argument("energy: need 0 <= k <= h at node " + std::to_string(v) +
                                " slot " + std::to_string(t));
  }
  double delta = p.c_d2d * (static_cast<double>(h) * static_cast<double>(p.L) +
                            static_cast<double>(k) * static_cast<double>(p.M + p.R));
  c_total_ += delta;
  per_node_[v].c += delta;
  events_.push_back({t, v, EnergyEvent::Kind::comm, 0, 0, 0, h, k, 0, delta});
}

void EnergyLedger::record_infra(int v, int t, long long bytes, const CostParams& p) {
  if (bytes < 0) throw std::invalid_argument("energy: negative infra bytes");
  double delta = p.c_infra * static_cast<double>(bytes);
  infra_total_ += delta;
  events_.push_back({t, v, EnergyEvent::Kind::infra, 0, 0, 0, 0, 0, bytes, delta});
}

double EnergyLedger::objective(const CostParams& p) const {
  return c_total_ + p.beta * (s_total_ + gamma_total_);
}

double EnergyLedger::node_cost(int v, const CostParams& p) const {
  auto it = per_node_.find(v);
  if (it == per_node_.end()) return 0.0;
  return it->second.c + p.beta * (it->second.s + it->second.gamma);
}

void EnergyLedger::export_csv(std::ostream& out) const {
  csv::Writer w(out);
  w.header({"slot", "node", "event", "z", "d", "s", "h", "k", "delta"});
  for (const auto& e : events_) {
    if (e.kind == EnergyEvent::Kind::infra) continue;
    const char* name = e.kind == EnergyEvent::Kind::train  ? "train"
                       : e.kind == EnergyEvent::Kind::eval ? "eval"
                                                           : "comm";
    w.cell(e.slot).cell(e.node).cell(std::string(name));
    w.cell(e.z).cell(e.d).cell(e.s).cell(e.h).cell(e.k).cell(e.delta);
    w.end_row();
  }
}

}  // namespace ogl::energy
