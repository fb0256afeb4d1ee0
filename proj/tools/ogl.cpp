#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ogl/harness.hpp"
#include "ogl/orchestrator.hpp"
#include "ogl/rng.hpp"
#include "ogl/tuner.hpp"

namespace fs = std::filesystem;
using namespace ogl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;

std::string default_out_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const char* env = std::getenv("OGL_OUT_DIR");
  if (env && *env) return env;
  return "ogl-out";
}

void print_summary(const std::vector<harness::SummaryRow>& rows) {
  std::printf("%-24s %4s %6s  %-19s %-19s %-22s %s\n", "scheme", "n", "failed",
              "accuracy", "macro-f1", "objective", "cutoff");
  for (const auto& r : rows) {
    std::printf("%-24s %4d %6d  %8.4f +-%8.4f %8.4f +-%8.4f %10.5g +-%10.5g %6.1f\n",
                r.scheme.c_str(), r.n, r.failed, r.acc_mean, r.acc_hw, r.f1_mean,
                r.f1_hw, r.objective_mean, r.objective_hw, r.cutoff_mean);
  }
}

harness::ScenarioConfig load_scenario(const std::string& preset_name,
                                      const std::string& config_path) {
  if (!preset_name.empty() && !config_path.empty())
    throw std::invalid_argument("pass either --preset or --config, not both");
  if (!preset_name.empty()) return harness::preset(preset_name);
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open config '" + config_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return harness::scenario_from_json(buf.str());
  }
  throw std::invalid_argument("one of --preset or --config is required");
}

std::vector<nn::LayerSpec> layers_for(int input_dim, const std::vector<int>& hidden,
                                      int classes) {
  std::vector<nn::LayerSpec> spec;
  int prev = input_dim;
  for (int width : hidden) {
    spec.push_back({prev, width, nn::Activation::relu});
    prev = width;
  }
  spec.push_back({prev, classes, nn::Activation::softmax});
  return spec;
}

int cmd_run(const std::string& preset_name, const std::string& config_path,
            const std::string& scheme, const std::string& policy, std::uint64_t seed,
            bool seed_set, const std::string& out_flag) {
  harness::ScenarioConfig scenario = load_scenario(preset_name, config_path);
  if (!policy.empty()) scenario.policy = policy;
  // Reject a bad scheme or policy spec up front so typos exit as config
  // errors instead of surfacing as a failed cell.
  if (scheme != "centralized" && scheme != "fedavg" && scheme != "local") {
    const std::string& spec = scheme == "ogl" ? scenario.policy : scheme;
    if (spec.rfind("mtune:", 0) != 0) tuner::make_policy(spec, scenario.z_max);
  }
  harness::SuiteConfig suite;
  suite.scenario = scenario;
  suite.schemes = {scheme};
  suite.seeds = {seed_set ? seed : scenario.master_seed};
  suite.jobs = 1;
  std::string root = default_out_root(out_flag);
  harness::SuiteResult res = harness::run_suite(suite, root);
  const harness::CellOutcome& cell = res.cells.at(0);
  if (!cell.ok) {
    std::cerr << "run failed: " << cell.error << "\n";
    return kExitRun;
  }
  std::printf("wrote %s\n", (fs::path(root) / cell.dir).string().c_str());
  std::printf("rounds=%d cutoff=%d acc=%.4f loss=%.4f objective=%.6g\n",
              cell.final_row.round, cell.cutoff_round, cell.final_row.mean_acc,
              cell.final_row.mean_loss, cell.final_row.objective);
  return kExitOk;
}

int cmd_suite(const std::string& config_path, const std::string& out_flag, int jobs,
              double confidence, bool confidence_set) {
  harness::SuiteConfig suite = harness::load_suite_file(config_path);
  if (jobs > 0) suite.jobs = jobs;
  if (confidence_set) suite.confidence = confidence;
  std::string root = default_out_root(out_flag);
  harness::SuiteResult res = harness::run_suite(suite, root);
  print_summary(res.summary);
  std::printf("summary: %s\n", (fs::path(root) / "summary.csv").string().c_str());
  bool any_failed = false;
  for (const auto& cell : res.cells)
    if (!cell.ok) {
      any_failed = true;
      std::fprintf(stderr, "cell %s/seed-%llu failed: %s\n", cell.scheme.c_str(),
                   static_cast<unsigned long long>(cell.seed), cell.error.c_str());
    }
  return any_failed ? kExitRun : kExitOk;
}

int cmd_corpus_generate(const std::string& dataset, const std::vector<int>& nodes,
                        const std::vector<double>& probs, int slots, int rollouts,
                        std::uint64_t seed, double target, const std::vector<int>& hidden,
                        double lr, double momentum, int batch, int z_max,
                        const dataset::PartitionConfig& partition,
                        const std::string& out_path) {
  std::string resolved = harness::resolve_data_path(dataset);
  dataset::SourceDataset src = dataset::load_source(resolved);
  std::vector<orchestrator::CorpusScenario> space;
  std::size_t index = 0;
  for (int n : nodes) {
    for (double p : probs) {
      orchestrator::CorpusScenario sc;
      std::ostringstream id;
      id << std::filesystem::path(src.name).filename().string() << "-er-" << n
         << "-p" << p;
      sc.id = id.str();
      sc.dataset = resolved;
      sc.node_count = n;
      sc.edge_prob = p;
      sc.slots = slots;
      sc.topology_seed = derive_seed(seed, "corpus-topology", index);
      sc.partition = partition;
      sc.partition.seed = derive_seed(seed, "corpus-partition", index);
      sc.engine.model_spec = layers_for(src.feature_dim, hidden, src.num_classes);
      sc.engine.optimizer.kind = nn::OptimizerConfig::Kind::sgd_momentum;
      sc.engine.optimizer.learning_rate = lr;
      sc.engine.optimizer.momentum = momentum;
      sc.engine.optimizer.batch_size = batch;
      sc.engine.z_max = z_max;
      // No plateau cut inside corpus rollouts: a throttling winner's zero-z
      // tail is exactly the label mass the tuner needs, so let it run the
      // whole horizon instead of being trimmed twenty slots in.
      sc.engine.stopping = {slots, slots, 0.0};
      sc.target_accuracy = target;
      space.push_back(std::move(sc));
      ++index;
    }
  }
  std::vector<orchestrator::LabeledSample> corpus =
      orchestrator::generate_corpus(space, rollouts, seed);
  orchestrator::write_corpus_file(corpus, out_path);
  std::printf("wrote %zu samples from %zu scenarios to %s\n", corpus.size(),
              space.size(), out_path.c_str());
  return kExitOk;
}

int cmd_mtune_train(const std::string& corpus_path, const std::string& out_path,
                    int folds, int patience, int max_epochs,
                    const std::vector<int>& hidden, double lr, int batch,
                    std::uint64_t seed) {
  std::vector<orchestrator::LabeledSample> corpus =
      orchestrator::read_corpus_file(corpus_path);
  orchestrator::MtuneTrainConfig cfg;
  cfg.folds = folds;
  cfg.patience = patience;
  cfg.max_epochs = max_epochs;
  cfg.hidden = hidden;
  cfg.adam.learning_rate = lr;
  cfg.adam.batch_size = batch;
  orchestrator::MtuneTrainResult res = orchestrator::train_mtune(corpus, cfg, seed);
  for (const auto& f : res.report.folds)
    std::printf("fold %d: best mse %.6f at epoch %d (%d epochs%s)\n", f.fold,
                f.best_mse, f.best_epoch, f.epochs_run,
                f.stopped_early ? ", early stop" : "");
  std::printf("cv mse %.6f +- %.6f, median best epoch %d, final mse %.6f\n",
              res.report.mean_mse, res.report.std_mse, res.report.median_best_epoch,
              res.report.final_mse);
  orchestrator::export_mtune(res.model, out_path);
  std::printf("wrote %s (%lld bytes)\n", out_path.c_str(), res.model.serialized_bytes);
  return kExitOk;
}

int cmd_mtune_inspect(const std::string& model_path) {
  tuner::MtuneModel model = orchestrator::import_mtune(model_path);
  std::printf("layers:");
  for (const auto& l : model.net.layers)
    std::printf(" %dx%d(%s)", l.input_dim, l.output_dim,
                l.activation == nn::Activation::relu       ? "relu"
                : l.activation == nn::Activation::softmax  ? "softmax"
                                                           : "identity");
  std::printf("\nparams: %d\nserialized bytes: %lld\nscaler mean:", model.net.param_count(),
              model.serialized_bytes);
  for (double m : model.scaler.mean) std::printf(" %.4g", m);
  std::printf("\nscaler std: ");
  for (double s : model.scaler.std_dev) std::printf(" %.4g", s);
  std::printf("\n");
  return kExitOk;
}

int cmd_report(const std::string& in_dir, double confidence) {
  std::vector<harness::SummaryRow> rows =
      harness::report_directory(in_dir, confidence);
  print_summary(rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ogl: energy-aware gossip learning simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one scheme on a scenario");
  std::string run_preset, run_config, run_scheme_name = "ogl", run_policy, run_out;
  std::uint64_t run_seed = 0;
  run->add_option("--preset", run_preset, "Scenario preset name");
  run->add_option("--config", run_config, "Scenario JSON file");
  run->add_option("--scheme", run_scheme_name,
                  "ogl | random | dp | fixed:Z,k | mtune:PATH | centralized | fedavg | local");
  run->add_option("--policy", run_policy, "Policy the ogl scheme runs (overrides config)");
  auto* run_seed_opt = run->add_option("--seed", run_seed, "Master seed");
  run->add_option("--out", run_out, "Output root (default $OGL_OUT_DIR or ogl-out)");

  // suite
  auto* suite = app.add_subcommand("suite", "Run a scheme x seed suite from a config");
  std::string suite_config, suite_out;
  int suite_jobs = 0;
  double suite_confidence = 0.95;
  suite->add_option("--config", suite_config, "Suite JSON file")->required();
  suite->add_option("--out", suite_out, "Output root (default $OGL_OUT_DIR or ogl-out)");
  suite->add_option("--jobs", suite_jobs, "Parallel cells (default config/jobs)");
  auto* suite_conf_opt =
      suite->add_option("--confidence", suite_confidence, "CI level, e.g. 0.95 or 0.98");

  // corpus generate
  auto* corpus = app.add_subcommand("corpus", "Decision-corpus commands");
  corpus->require_subcommand(1);
  auto* gen = corpus->add_subcommand("generate", "Roll out scenarios and label decisions");
  std::string gen_dataset = "digits.csv", gen_out = "corpus.csv";
  std::vector<int> gen_nodes = {4, 6, 8};
  std::vector<double> gen_probs = {0.5, 1.0};
  std::vector<int> gen_hidden = {32};
  int gen_slots = 200, gen_rollouts = 4, gen_batch = 32, gen_zmax = 5;
  double gen_target = 0.8, gen_lr = 0.003, gen_momentum = 0.9;
  std::uint64_t gen_seed = 1;
  gen->add_option("--dataset", gen_dataset, "Dataset file or blobs spec");
  gen->add_option("--nodes", gen_nodes, "Node counts")->delimiter(',');
  gen->add_option("--probs", gen_probs, "Edge probabilities")->delimiter(',');
  gen->add_option("--slots", gen_slots, "Slots per rollout");
  gen->add_option("--rollouts", gen_rollouts, "Rollouts per scenario");
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--target", gen_target, "Target accuracy for rollout scoring");
  gen->add_option("--hidden", gen_hidden, "Node-model hidden widths")->delimiter(',');
  gen->add_option("--lr", gen_lr, "Node-model learning rate");
  gen->add_option("--momentum", gen_momentum, "Node-model momentum");
  gen->add_option("--batch", gen_batch, "Node-model batch size");
  gen->add_option("--z-max", gen_zmax, "Epoch cap");
  dataset::PartitionConfig gen_partition;
  gen->add_option("--global-size", gen_partition.global_size,
                  "Total training samples across nodes (0 = unscaled)");
  gen->add_option("--per-node-min", gen_partition.per_node_min, "Per-node size floor");
  gen->add_option("--per-node-max", gen_partition.per_node_max, "Per-node size cap");
  gen->add_option("--val-fraction", gen_partition.validation_fraction,
                  "Per-node validation share");
  gen->add_option("--test-fraction", gen_partition.test_fraction, "Global test share");
  gen->add_option("--out", gen_out, "Corpus CSV path");

  // mtune
  auto* mtune = app.add_subcommand("mtune", "Tuner-model commands");
  mtune->require_subcommand(1);
  auto* train = mtune->add_subcommand("train", "Cross-validated tuner training");
  std::string train_corpus, train_out = "mtune.oglm";
  int train_folds = 10, train_patience = 10, train_max_epochs = 500, train_batch = 32;
  std::vector<int> train_hidden = {64, 32, 16};
  double train_lr = 1e-3;
  std::uint64_t train_seed = 1;
  train->add_option("--corpus", train_corpus, "Corpus CSV")->required();
  train->add_option("--out", train_out, "Model output path");
  train->add_option("--folds", train_folds, "CV folds");
  train->add_option("--patience", train_patience, "Early-stop patience (epochs)");
  train->add_option("--max-epochs", train_max_epochs, "Epoch cap per fold");
  train->add_option("--hidden", train_hidden, "Hidden widths")->delimiter(',');
  train->add_option("--lr", train_lr, "Adam learning rate");
  train->add_option("--batch", train_batch, "Batch size");
  train->add_option("--seed", train_seed, "Training seed");

  auto* inspect = mtune->add_subcommand("inspect", "Print a tuner model's shape");
  std::string inspect_model;
  inspect->add_option("--model", inspect_model, "Model path")->required();

  // report
  auto* report = app.add_subcommand("report", "Summarize a suite output directory");
  std::string report_in;
  double report_confidence = 0.95;
  report->add_option("--in", report_in, "Suite output root")->required();
  report->add_option("--confidence", report_confidence, "CI level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed())
      return cmd_run(run_preset, run_config, run_scheme_name, run_policy, run_seed,
                     run_seed_opt->count() > 0, run_out);
    if (suite->parsed())
      return cmd_suite(suite_config, suite_out, suite_jobs, suite_confidence,
                       suite_conf_opt->count() > 0);
    if (corpus->parsed() && gen->parsed())
      return cmd_corpus_generate(gen_dataset, gen_nodes, gen_probs, gen_slots,
                                 gen_rollouts, gen_seed, gen_target, gen_hidden, gen_lr,
                                 gen_momentum, gen_batch, gen_zmax, gen_partition,
                                 gen_out);
    if (mtune->parsed() && train->parsed())
      return cmd_mtune_train(train_corpus, train_out, train_folds, train_patience,
                             train_max_epochs, train_hidden, train_lr, train_batch,
                             train_seed);
    if (mtune->parsed() && inspect->parsed()) return cmd_mtune_inspect(inspect_model);
    if (report->parsed()) return cmd_report(report_in, report_confidence);
    std::cerr << "no command\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run error: " << e.what() << "\n";
    return kExitRun;
  }
}
