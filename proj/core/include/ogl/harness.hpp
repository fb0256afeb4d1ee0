#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ogl/baselines.hpp"
#include "ogl/dataset.hpp"
#include "ogl/energy.hpp"
#include "ogl/nn.hpp"
#include "ogl/protocol.hpp"
#include "ogl/topology.hpp"

namespace ogl::harness {

/// One experiment cell's fixed world: topology, data, node model, cost model,
/// stopping rule, and the policy the "ogl" scheme should run.
struct ScenarioConfig {
  std::string name = "custom";

  std::string topology = "er";  // er | trace | churn
  int node_count = 6;           // er
  double edge_prob = 1.0;       // er
  int slots = 600;              // er (trace/churn derive slots from duration)
  std::string trace_path;                  // trace
  double contact_radius_m = 150.0;         // trace
  double trace_slot_length_s = 20.0;       // trace
  topology::ChurnConfig churn;             // churn

  std::string dataset = "blobs:n=600,classes=3,dim=8,seed=7";
  dataset::PartitionConfig partition;

  std::vector<nn::LayerSpec> model;
  nn::OptimizerConfig optimizer;
  nn::Loss loss = nn::Loss::cross_entropy;
  int z_max = 5;
  double initial_budget = 10.0;
  double compute_power = 1.0;
  energy::CostParams cost;
  protocol::StoppingRule stopping;

  std::string policy = "random";  // what scheme "ogl" runs
  double target_accuracy = 0.8;
  std::uint64_t master_seed = 1;

  /// Throws std::invalid_argument on out-of-range or inconsistent fields.
  void validate() const;
};

/// Fully-populated §4-style scenario by name; unknown names raise an error
/// that lists every available preset.
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// JSON round-trip. Serialization writes every field; parsing accepts partial
/// objects (missing fields keep their defaults) and rejects unknown keys. A
/// top-level "preset" key seeds the config before the other keys override it.
std::string scenario_to_json(const ScenarioConfig& cfg, int indent = 2);
ScenarioConfig scenario_from_json(const std::string& text);

/// Resolves a dataset path: absolute paths and existing files pass through;
/// otherwise the OGL_DATA_DIR environment variable (default "data") prefixes
/// the name. Builtin specs ("blobs:...") pass through untouched.
std::string resolve_data_path(const std::string& spec);

/// One (scheme, seed) run. Schemes:
///   ogl                  gossip engine with the scenario's policy
///   random | dp | fixed:<Z>,<k> | mtune:<path>   gossip engine, that policy
///   centralized | fedavg | local                 server/solo baselines
/// FedAvg samples round(mean contact degree) clients per round, at least 1.
/// Every stochastic stream (topology, partition, training) fans out from the
/// given seed, so schemes at one seed share the same data split and contacts.
struct SchemeRun {
  std::string scheme;
  std::uint64_t seed = 0;
  std::vector<protocol::RoundMetrics> rounds;
  int cutoff_round = 0;
  double final_mean_acc = 0.0;
  std::uint64_t manifest_hash = 0;
};

SchemeRun run_scheme(const ScenarioConfig& cfg, const std::string& scheme,
                     std::uint64_t seed);

struct SuiteConfig {
  ScenarioConfig scenario;
  std::vector<std::string> schemes = {"ogl"};
  std::vector<std::uint64_t> seeds = {1};
  double confidence = 0.95;
  int jobs = 0;  // worker threads; 0 picks the hardware concurrency
};

std::string suite_to_json(const SuiteConfig& cfg, int indent = 2);
SuiteConfig suite_from_json(const std::string& text);
SuiteConfig load_suite_file(const std::string& path);

/// One suite cell's outcome. Failed cells carry the error text and keep the
/// suite running.
struct CellOutcome {
  std::string scheme;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  protocol::RoundMetrics final_row;
  int cutoff_round = 0;
  std::uint64_t manifest_hash = 0;
  std::string dir;  // cell output directory, relative to the suite root
};

/// Per-scheme aggregate of the cells' final rows: mean and Student-t
/// confidence half-width per metric, over the successful cells.
struct SummaryRow {
  std::string scheme;
  int n = 0;       // successful cells
  int failed = 0;  // failed cells
  double acc_mean = 0.0, acc_hw = 0.0;
  double loss_mean = 0.0, loss_hw = 0.0;
  double f1_mean = 0.0, f1_hw = 0.0;
  double s_mean = 0.0, s_hw = 0.0;
  double gamma_mean = 0.0, gamma_hw = 0.0;
  double c_mean = 0.0, c_hw = 0.0;
  double objective_mean = 0.0, objective_hw = 0.0;
  double cutoff_mean = 0.0, cutoff_hw = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<CellOutcome>& cells,
                                  double confidence);
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

struct SuiteResult {
  std::vector<CellOutcome> cells;
  std::vector<SummaryRow> summary;
};

/// Runs every (scheme, seed) cell, in parallel up to cfg.jobs workers. Each
/// cell writes <out_root>/<scheme>/seed-<seed>/{metrics.csv,run_info.json};
/// the suite writes <out_root>/summary.csv. Cell failures are recorded in the
/// cell's run_info.json and the returned outcomes; the suite keeps going.
SuiteResult run_suite(const SuiteConfig& cfg, const std::string& out_root);

/// Rebuilds the summary by re-reading every cell's files under `root` (the
/// run_info.json/metrics.csv layout run_suite produces).
std::vector<SummaryRow> report_directory(const std::string& root, double confidence);

}  // namespace ogl::harness
