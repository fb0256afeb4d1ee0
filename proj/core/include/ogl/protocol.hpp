#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ogl/dataset.hpp"
#include "ogl/energy.hpp"
#include "ogl/nn.hpp"
#include "ogl/topology.hpp"
#include "ogl/tuner.hpp"

namespace ogl::protocol {

struct StoppingRule {
  int max_rounds = 600;
  int patience = 20;
  double min_improvement = 0.005;
};

/// Plateau detector: stop after `patience` consecutive rounds without the
/// mean accuracy improving on the best seen so far by more than
/// `min_improvement`, or after max_rounds.
class StoppingTracker {
 public:
  explicit StoppingTracker(StoppingRule rule);

  /// Feeds one round's mean accuracy; returns true when the run should stop
  /// after this round.
  bool observe(double mean_acc);
  int rounds_seen() const { return rounds_; }

 private:
  StoppingRule rule_;
  double best_ = -1.0;
  int since_improvement_ = 0;
  int rounds_ = 0;
};

struct RoundMetrics {
  int round = 0;  // 1-based
  int present_nodes = 0;
  double mean_acc = 0.0;
  double mean_loss = 0.0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double s = 0.0;          // cumulative training energy
  double gamma = 0.0;      // cumulative evaluation energy
  double c = 0.0;          // cumulative communication cost
  double objective = 0.0;  // c + beta * (s + gamma)
};

/// CSV rows `round,present_nodes,mean_acc,mean_loss,macro_f1,macro_precision,
/// macro_recall,S,Gamma,C,objective`; a nonempty scheme appends a `scheme`
/// column (used by the baseline runners).
void write_metrics_csv(const std::vector<RoundMetrics>& rounds, std::ostream& out,
                       const std::string& scheme = "");
std::vector<RoundMetrics> read_metrics_csv(std::istream& in);

struct NodeState {
  int id = -1;
  nn::DenseNetwork model;
  dataset::LocalDataset local;
  double last_loss = 0.0;
  bool has_loss = false;
};

struct SlotMessages {
  struct LossAd {
    int from, to;
    double loss;
  };
  struct Request {
    int from, to;
  };
  struct Response {
    int from, to;
  };
  int slot = 0;
  std::vector<LossAd> loss_ads;
  std::vector<Request> requests;
  std::vector<Response> responses;
};

/// One (node, slot) feature snapshot with the action actually executed;
/// tau is the largest advertised loss among the merged neighbors, or -1
/// when nothing was merged. This is the raw material for tuner training.
struct ActionRecord {
  int node = -1;
  int slot = 0;
  tuner::TunerFeatures features;
  int z = 0;
  double tau = -1.0;
};

struct EngineConfig {
  std::vector<nn::LayerSpec> model_spec;
  nn::OptimizerConfig optimizer;
  nn::Loss loss = nn::Loss::cross_entropy;
  int z_max = 5;
  double initial_budget = 10.0;
  double compute_power = 1.0;
  energy::CostParams cost;
  StoppingRule stopping;
  std::uint64_t master_seed = 0;
  bool record_messages = true;
  bool record_actions = true;
};

struct RunResult {
  std::vector<RoundMetrics> rounds;
  std::vector<SlotMessages> messages;
  std::vector<ActionRecord> actions;
  energy::EnergyLedger ledger;
  int cutoff_round = 0;
  double final_mean_acc = 0.0;
  std::uint64_t manifest_hash = 0;
};

/// The per-slot gossip state machine. Each slot runs three globally
/// barriered phases over the nodes present in the contact schedule:
///   (a) tuner decision on previous-slot information, Z local epochs,
///       validation loss l_v, energy records;
///   (b) loss advertisement to every neighbor, selection K resolved against
///       the same slot's advertised losses, model requests;
///   (c) inverse-loss weighted merge of the own model with the requested
///       ones, all from this slot's post-training snapshots.
/// Arrivals join with the shared initial model and a reserve-backed local
/// dataset before the slot runs; departures drop out of states and metrics.
class GossipEngine {
 public:
  GossipEngine(const dataset::SourceDataset& source, dataset::Partition partition,
               const dataset::PartitionConfig& partition_cfg,
               const topology::ContactSchedule& schedule, const tuner::Policy& policy,
               EngineConfig cfg);

  RunResult run();

  const std::map<int, NodeState>& states() const { return states_; }

 private:
  void handle_churn(int t);
  void run_slot(int t);
  RoundMetrics round_metrics(int t) const;

  const dataset::SourceDataset& source_;
  dataset::Partition partition_;
  dataset::PartitionConfig partition_cfg_;
  const topology::ContactSchedule& schedule_;
  const tuner::Policy& policy_;
  EngineConfig cfg_;

  nn::DenseNetwork w0_;
  double default_loss_ = 0.0;
  std::map<int, NodeState> states_;
  Rng reserve_rng_;
  RunResult result_;
  bool warned_clamp_ = false;
};

}  // namespace ogl::protocol
