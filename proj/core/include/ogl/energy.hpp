#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace ogl::energy {

struct CostParams {
  double e_g = 1e-3;   // training compute, per sample per epoch
  double e_s = 5e-4;   // training memory, per sample per epoch
  double e_e = 2e-4;   // evaluation compute, per sample
  double e_es = 1e-4;  // evaluation memory, per sample
  double c_d2d = 1e-9;     // device-to-device cost per byte
  double c_infra = 4e-9;   // infrastructure cost per byte
  long long L = 64;        // loss advertisement bytes
  long long R = 64;        // model request bytes
  long long M = 320000;    // model bytes
  double beta = 1.0;
};

struct EnergyEvent {
  enum class Kind { train, eval, comm, infra };
  int slot = 0;
  int node = 0;
  Kind kind = Kind::train;
  int z = 0;          // training epochs
  long long d = 0;    // training samples
  long long s = 0;    // evaluation samples
  int h = 0;          // neighbors advertised to
  int k = 0;          // models requested
  long long bytes = 0;  // infra only
  double delta = 0.0;
};

/// Append-only per-node per-slot cost ledger. Training energy accrues to S,
/// evaluation energy to Gamma, device-to-device bytes to C; infrastructure
/// bytes (tuner-model dissemination) sit in a separate counter outside the
/// objective. Totals always equal the sum of the event-log deltas.
class EnergyLedger {
 public:
  /// S += z * d * (e_g + e_s). One training record per (node, slot).
  void record_training(int v, int t, int z, long long d, const CostParams& p);

  /// Gamma += s * (e_e + e_es). One evaluation record per (node, slot).
  void record_evaluation(int v, int t, long long s, const CostParams& p);

  /// C += c_d2d * (h*L + k*(M+R)), charged to the requesting node.
  void record_communication(int v, int t, int h, int k, const CostParams& p);

  /// Infrastructure bytes, charged at c_infra; excluded from objective().
  void record_infra(int v, int t, long long bytes, const CostParams& p);

  double training_total() const { return s_total_; }
  double evaluation_total() const { return gamma_total_; }
  double communication_total() const { return c_total_; }
  double infra_total() const { return infra_total_; }

  /// C + beta * (S + Gamma).
  double objective(const CostParams& p) const;

  /// This node's cumulative objective contribution, C_v + beta*(S_v + Gamma_v).
  double node_cost(int v, const CostParams& p) const;

  const std::vector<EnergyEvent>& events() const { return events_; }

  /// CSV `slot,node,event{train|eval|comm},z,d,s,h,k,delta`. Infra events are
  /// bookkeeping outside the cost model and are not exported.
  void export_csv(std::ostream& out) const;

 private:
  struct NodeTotals {
    double s = 0.0, gamma = 0.0, c = 0.0;
  };

  std::vector<EnergyEvent> events_;
  std::set<std::pair<int, int>> train_seen_;
  std::set<std::pair<int, int>> eval_seen_;
  std::map<int, NodeTotals> per_node_;
  double s_total_ = 0.0;
  double gamma_total_ = 0.0;
  double c_total_ = 0.0;
  double infra_total_ = 0.0;
};

}  // namespace ogl::energy
