#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ogl/dataset.hpp"
#include "ogl/energy.hpp"
#include "ogl/nn.hpp"
#include "ogl/protocol.hpp"

namespace ogl::baselines {

struct BaselineConfig {
  std::vector<nn::LayerSpec> model_spec;
  nn::OptimizerConfig optimizer;
  nn::Loss loss = nn::Loss::cross_entropy;
  int local_epochs = 1;
  energy::CostParams cost;
  protocol::StoppingRule stopping;
  std::uint64_t master_seed = 0;
};

/// Baseline runs reuse RoundMetrics; for FedAvg the C column carries the
/// infrastructure byte cost (client/server traffic priced at c_infra) and the
/// objective is C_infra + beta * (S + Gamma).
struct BaselineResult {
  std::vector<protocol::RoundMetrics> rounds;
  energy::EnergyLedger ledger;
  int cutoff_round = 0;
  double final_mean_acc = 0.0;
  std::vector<nn::DenseNetwork> final_models;  // one per worker; one for server schemes
};

/// One worker training every round on the full training set. Uses the same
/// initial model and per-(node 0, slot) training streams as the distributed
/// schemes, so degenerate single-node setups compare exactly.
BaselineResult run_centralized(std::span<const nn::Sample> train,
                               std::span<const nn::Sample> test,
                               const BaselineConfig& cfg);

/// Parameter-server rounds: sample clients_per_round nodes uniformly without
/// replacement, each trains local_epochs from the current global model, and
/// the server merges with weights proportional to the clients' training-set
/// sizes. Upload and broadcast bytes (M each way per participant) are charged
/// at the infrastructure rate.
BaselineResult run_fedavg(const std::vector<dataset::LocalDataset>& locals,
                          std::span<const nn::Sample> test, int clients_per_round,
                          const BaselineConfig& cfg);

/// Every node trains alone each round; nothing is ever exchanged.
BaselineResult run_local_only(const std::vector<dataset::LocalDataset>& locals,
                              std::span<const nn::Sample> test,
                              const BaselineConfig& cfg);

}  // namespace ogl::baselines
