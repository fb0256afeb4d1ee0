#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ogl/dataset.hpp"
#include "ogl/protocol.hpp"
#include "ogl/tuner.hpp"

namespace ogl::orchestrator {

/// One training example for the tuner: a feature snapshot labeled with the
/// action the best rollout of its scenario took there. tau_label keeps the
/// -1 sentinel for slots where that rollout merged nobody.
struct LabeledSample {
  tuner::TunerFeatures features;
  double z_label = 0.0;
  double tau_label = -1.0;
  std::string scenario;
  int node = -1;
  int slot = 0;
  int rollout = 0;
};

void write_corpus_csv(const std::vector<LabeledSample>& corpus, std::ostream& out);
std::vector<LabeledSample> read_corpus_csv(std::istream& in);
void write_corpus_file(const std::vector<LabeledSample>& corpus, const std::string& path);
std::vector<LabeledSample> read_corpus_file(const std::string& path);

/// One sampled system configuration: dataset, partition, ER topology, and the
/// engine settings rollouts run under. Rollouts share all of this; only the
/// per-rollout master seed and exploration policy vary.
struct CorpusScenario {
  std::string id;
  std::string dataset;  // load_source() spec
  int node_count = 6;
  double edge_prob = 1.0;
  int slots = 40;
  std::uint64_t topology_seed = 0;
  dataset::PartitionConfig partition;
  protocol::EngineConfig engine;
  double target_accuracy = 0.8;
};

/// Exploration policy corpus rollouts run under. Each slot draws Z uniform in
/// {0..z_max} and an independent half subset of the present neighbors, like
/// the runtime random policy, except that a per-rollout loss floor (drawn
/// once from policy_seed, zero for half the rollouts) forces Z = 0 while the
/// node's own validation loss sits at or below it. Rollouts that throttle and
/// still reach the accuracy target are exactly the trajectories the corpus
/// scoring rewards, so the winning labels tie Z to the loss features instead
/// of averaging out to a constant.
std::unique_ptr<tuner::Policy> rollout_policy(int z_max, int num_classes,
                                              std::uint64_t policy_seed);

/// Runs rollouts_per_config exploration rollouts per scenario (see
/// rollout_policy), scores each rollout (reaching the accuracy target
/// dominates, then lower objective; otherwise higher accuracy), and labels
/// every (node, slot) snapshot with the winning rollout's action. Output is
/// sorted by (scenario, node, slot, rollout) and is a pure function of the
/// seed.
std::vector<LabeledSample> generate_corpus(const std::vector<CorpusScenario>& space,
                                           int rollouts_per_config,
                                           std::uint64_t seed);

struct MtuneTrainConfig {
  int folds = 10;
  int patience = 10;
  int max_epochs = 500;
  std::vector<int> hidden = {64, 32, 16};
  nn::OptimizerConfig adam;

  MtuneTrainConfig() {
    adam.kind = nn::OptimizerConfig::Kind::adam;
    adam.learning_rate = 1e-3;
    adam.batch_size = 32;
  }
};

struct FoldReport {
  int fold = 0;
  double best_mse = 0.0;
  int best_epoch = 0;   // 1-based epoch whose checkpoint won
  int epochs_run = 0;
  bool stopped_early = false;
};

struct CvReport {
  std::vector<FoldReport> folds;
  double mean_mse = 0.0;
  double std_mse = 0.0;        // sample std over folds
  int median_best_epoch = 0;   // lower median
  double final_mse = 0.0;      // retrained model on the full corpus
};

struct MtuneTrainResult {
  tuner::MtuneModel model;
  CvReport report;
};

/// 10-fold CV with per-fold early stopping and best-epoch checkpointing;
/// the shipped model is retrained on the whole corpus for the median
/// best-epoch count. The scaler (per-feature mean/std of the corpus)
/// travels with the model.
MtuneTrainResult train_mtune(const std::vector<LabeledSample>& corpus,
                             const MtuneTrainConfig& cfg, std::uint64_t seed);

/// Serialization wrappers; export updates model.serialized_bytes to the
/// on-disk size, which is what arriving nodes get charged for.
void export_mtune(tuner::MtuneModel& model, const std::string& path);
tuner::MtuneModel import_mtune(const std::string& path);

}  // namespace ogl::orchestrator
