#include "ogl/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "ogl/csv.hpp"
#include "ogl/model_io.hpp"
#include "ogl/rng.hpp"
#include "ogl/stats.hpp"
#include "ogl/topology.hpp"

namespace ogl::orchestrator {

namespace {

const std::vector<std::string> kCorpusHeader = {
    "h",        "d",        "s",
    "own_loss", "min_neighbor_loss", "mean_neighbor_loss",
    "cum_cost", "budget_remaining",  "compute_power",
    "slot_fraction", "z_label", "tau_label",
    "scenario", "node",     "slot",
    "rollout"};

}  // namespace

void write_corpus_csv(const std::vector<LabeledSample>& corpus, std::ostream& out) {
  csv::Writer w(out);
  w.header(kCorpusHeader);
  for (const auto& row : corpus) {
    for (double x : row.features.to_vector()) w.cell(x);
    w.cell(row.z_label)
        .cell(row.tau_label)
        .cell(row.scenario)
        .cell(row.node)
        .cell(row.slot)
        .cell(row.rollout);
    w.end_row();
  }
}

std::vector<LabeledSample> read_corpus_csv(std::istream& in) {
  csv::Table t = csv::read_table(in);
  if (t.header != kCorpusHeader)
    throw std::runtime_error("corpus csv: unexpected header");
  std::vector<LabeledSample> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::size_t r = i + 2;
    std::vector<double> f(tuner::kFeatureDim);
    for (int j = 0; j < tuner::kFeatureDim; ++j)
      f[static_cast<std::size_t>(j)] =
          csv::parse_double(row[static_cast<std::size_t>(j)], r, static_cast<std::size_t>(j) + 1);
    LabeledSample s;
    s.features.h = f[0];
    s.features.d = f[1];
    s.features.s = f[2];
    s.features.own_loss = f[3];
    s.features.min_neighbor_loss = f[4];
    s.features.mean_neighbor_loss = f[5];
    s.features.cum_cost = f[6];
    s.features.budget_remaining = f[7];
    s.features.compute_power = f[8];
    s.features.slot_fraction = f[9];
    s.z_label = csv::parse_double(row[10], r, 11);
    s.tau_label = csv::parse_double(row[11], r, 12);
    s.scenario = row[12];
    s.node = static_cast<int>(csv::parse_int(row[13], r, 14));
    s.slot = static_cast<int>(csv::parse_int(row[14], r, 15));
    s.rollout = static_cast<int>(csv::parse_int(row[15], r, 16));
    out.push_back(std::move(s));
  }
  return out;
}

void write_corpus_file(const std::vector<LabeledSample>& corpus,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("corpus: cannot open '" + path + "' for writing");
  write_corpus_csv(corpus, out);
  if (!out.good()) throw std::runtime_error("corpus: write to '" + path + "' failed");
}

std::vector<LabeledSample> read_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("corpus: cannot open '" + path + "'");
  return read_corpus_csv(in);
}

namespace {

/// Uniform (Z, K) draws behind a fixed loss floor: Z collapses to 0 once the
/// node's own loss is at or below the floor. floor = 0 never triggers on a
/// positive loss, so those rollouts explore the plain uniform policy.
class RolloutExplorer : public tuner::Policy {
 public:
  RolloutExplorer(int z_max, double loss_floor) : z_max_(z_max), floor_(loss_floor) {
    spec_ = "rollout-explorer";
  }

  tuner::TunerDecision decide(const tuner::TunerFeatures& features,
                              const std::vector<int>& neighbors, Rng& rng) const override {
    tuner::TunerDecision d;
    d.epochs = features.own_loss <= floor_
                   ? 0
                   : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(z_max_) + 1));
    d.selection = tuner::TunerDecision::Selection::explicit_set;
    for (int n : neighbors) {
      if (rng.bernoulli(0.5)) d.selected.push_back(n);
    }
    return d;
  }

 private:
  int z_max_;
  double floor_;
};

}  // namespace

std::unique_ptr<tuner::Policy> rollout_policy(int z_max, int num_classes,
                                              std::uint64_t policy_seed) {
  if (z_max < 0) throw std::invalid_argument("corpus: z_max must be nonnegative");
  Rng g(policy_seed);
  bool gated = g.bernoulli(0.5);
  // Cross-entropy of a uniform prediction is ln(classes); floors span the
  // band between early-training and near-converged losses on that scale.
  double scale = std::log(static_cast<double>(std::max(2, num_classes)));
  double floor = gated ? g.uniform(0.15, 0.45) * scale : 0.0;
  return std::make_unique<RolloutExplorer>(z_max, floor);
}

std::vector<LabeledSample> generate_corpus(const std::vector<CorpusScenario>& space,
                                           int rollouts_per_config,
                                           std::uint64_t seed) {
  if (space.empty()) throw std::invalid_argument("corpus: empty scenario space");
  if (rollouts_per_config < 1)
    throw std::invalid_argument("corpus: rollouts_per_config must be >= 1");

  std::vector<LabeledSample> corpus;
  for (std::size_t ci = 0; ci < space.size(); ++ci) {
    const CorpusScenario& sc = space[ci];
    try {
      dataset::SourceDataset src = dataset::load_source(sc.dataset);
      std::vector<int> ids(static_cast<std::size_t>(sc.node_count));
      std::iota(ids.begin(), ids.end(), 0);
      dataset::Partition part = dataset::partition(src, ids, sc.partition);
      topology::ContactSchedule schedule = topology::erdos_renyi_schedule(
          {sc.node_count, sc.edge_prob, sc.slots, sc.topology_seed});
      int classes = sc.engine.model_spec.empty() ? 2 : sc.engine.model_spec.back().output_dim;

      int best = -1;
      bool best_reached = false;
      double best_key = 0.0;  // -objective when reached, accuracy otherwise
      protocol::RunResult best_run;
      for (int j = 0; j < rollouts_per_config; ++j) {
        auto policy = rollout_policy(
            sc.engine.z_max, classes,
            derive_seed(seed, "rollout-policy", static_cast<std::uint64_t>(ci),
                        static_cast<std::uint64_t>(j)));
        protocol::EngineConfig ecfg = sc.engine;
        ecfg.master_seed = derive_seed(seed, "rollout", static_cast<std::uint64_t>(ci),
                                       static_cast<std::uint64_t>(j));
        protocol::GossipEngine engine(src, part, sc.partition, schedule, *policy, ecfg);
        protocol::RunResult run = engine.run();
        bool reached = run.final_mean_acc >= sc.target_accuracy;
        double key = reached ? -run.rounds.back().objective : run.final_mean_acc;
        if (best < 0 || std::make_pair(reached, key) > std::make_pair(best_reached, best_key)) {
          best = j;
          best_reached = reached;
          best_key = key;
          best_run = std::move(run);
        }
      }

      for (const auto& a : best_run.actions) {
        LabeledSample s;
        s.features = a.features;
        s.z_label = static_cast<double>(a.z);
        s.tau_label = a.tau;
        s.scenario = sc.id;
        s.node = a.node;
        s.slot = a.slot;
        s.rollout = best;
        corpus.push_back(std::move(s));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus: scenario '" + sc.id + "' failed: " + e.what());
    }
  }

  std::sort(corpus.begin(), corpus.end(), [](const LabeledSample& a, const LabeledSample& b) {
    return std::tie(a.scenario, a.node, a.slot, a.rollout) <
           std::tie(b.scenario, b.node, b.slot, b.rollout);
  });
  return corpus;
}

namespace {

std::vector<nn::LayerSpec> mtune_spec(const MtuneTrainConfig& cfg) {
  std::vector<nn::LayerSpec> spec;
  int prev = tuner::kFeatureDim;
  for (int width : cfg.hidden) {
    spec.push_back({prev, width, nn::Activation::relu});
    prev = width;
  }
  spec.push_back({prev, 2, nn::Activation::identity});
  return spec;
}

tuner::Scaler fit_scaler(const std::vector<LabeledSample>& corpus) {
  tuner::Scaler sc;
  sc.mean.assign(tuner::kFeatureDim, 0.0);
  sc.std_dev.assign(tuner::kFeatureDim, 0.0);
  const double n = static_cast<double>(corpus.size());
  for (const auto& row : corpus) {
    std::vector<double> x = row.features.to_vector();
    for (int j = 0; j < tuner::kFeatureDim; ++j)
      sc.mean[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(j)] / n;
  }
  for (const auto& row : corpus) {
    std::vector<double> x = row.features.to_vector();
    for (int j = 0; j < tuner::kFeatureDim; ++j) {
      double d = x[static_cast<std::size_t>(j)] - sc.mean[static_cast<std::size_t>(j)];
      sc.std_dev[static_cast<std::size_t>(j)] += d * d / n;
    }
  }
  for (double& v : sc.std_dev) v = std::sqrt(v);
  return sc;
}

struct EpochLoop {
  double best_mse = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool stopped_early = false;
  nn::DenseNetwork best_net;
};

/// One continuous training run with per-epoch validation, checkpointing the
/// epoch with the lowest validation MSE and stopping after `patience` epochs
/// without a new best.
EpochLoop run_epochs(const nn::DenseNetwork& start, std::span<const nn::Sample> train,
                     std::span<const nn::Sample> val, const MtuneTrainConfig& cfg,
                     std::uint64_t train_seed, const std::string& what) {
  EpochLoop loop;
  loop.best_net = start;
  int since_best = 0;
  nn::train_epochs(
      start, train, cfg.max_epochs, cfg.adam, nn::Loss::mse, train_seed,
      [&](int e, const nn::DenseNetwork& net) {
        double mse = nn::mean_loss(net, val, nn::Loss::mse);
        if (!std::isfinite(mse))
          throw std::runtime_error("train_mtune: non-finite validation MSE in " + what +
                                   " at epoch " + std::to_string(e));
        loop.epochs_run = e;
        if (loop.best_epoch == 0 || mse < loop.best_mse) {
          loop.best_mse = mse;
          loop.best_epoch = e;
          loop.best_net = net;
          since_best = 0;
        } else if (++since_best >= cfg.patience) {
          loop.stopped_early = true;
          return false;
        }
        return true;
      });
  return loop;
}

}  // namespace

MtuneTrainResult train_mtune(const std::vector<LabeledSample>& corpus,
                             const MtuneTrainConfig& cfg, std::uint64_t seed) {
  if (cfg.folds < 2) throw std::invalid_argument("train_mtune: folds must be >= 2");
  if (static_cast<int>(corpus.size()) < cfg.folds)
    throw std::invalid_argument("train_mtune: corpus smaller than fold count");
  if (cfg.patience < 1 || cfg.max_epochs < 1)
    throw std::invalid_argument("train_mtune: patience and max_epochs must be >= 1");

  tuner::Scaler scaler = fit_scaler(corpus);
  std::vector<nn::Sample> data;
  data.reserve(corpus.size());
  for (const auto& row : corpus) {
    nn::Sample s;
    s.x = scaler.apply(row.features.to_vector());
    s.y = {row.z_label, row.tau_label};
    data.push_back(std::move(s));
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(seed, "cv-split"));
  split_rng.shuffle(order);

  std::vector<nn::LayerSpec> spec = mtune_spec(cfg);
  MtuneTrainResult out;
  std::vector<double> fold_mses;
  std::vector<int> best_epochs;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<nn::Sample> train, val;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (static_cast<int>(i % static_cast<std::size_t>(cfg.folds)) == f)
        val.push_back(data[order[i]]);
      else
        train.push_back(data[order[i]]);
    }
    nn::DenseNetwork start =
        nn::init_network(spec, derive_seed(seed, "fold-init", static_cast<std::uint64_t>(f)));
    EpochLoop loop = run_epochs(start, train, val, cfg,
                                derive_seed(seed, "fold-train", static_cast<std::uint64_t>(f)),
                                "fold " + std::to_string(f));
    out.report.folds.push_back(
        {f, loop.best_mse, loop.best_epoch, loop.epochs_run, loop.stopped_early});
    fold_mses.push_back(loop.best_mse);
    best_epochs.push_back(loop.best_epoch);
  }

  out.report.mean_mse = stats::mean(fold_mses);
  out.report.std_mse = fold_mses.size() > 1 ? stats::sample_std(fold_mses) : 0.0;
  std::sort(best_epochs.begin(), best_epochs.end());
  out.report.median_best_epoch = best_epochs[(best_epochs.size() - 1) / 2];

  nn::DenseNetwork final_net = nn::train_epochs(
      nn::init_network(spec, derive_seed(seed, "final-init")), data,
      out.report.median_best_epoch, cfg.adam, nn::Loss::mse,
      derive_seed(seed, "final-train"));
  out.report.final_mse = nn::mean_loss(final_net, data, nn::Loss::mse);
  if (!std::isfinite(out.report.final_mse))
    throw std::runtime_error("train_mtune: non-finite MSE after the final retrain");

  out.model.net = std::move(final_net);
  out.model.scaler = std::move(scaler);
  out.model.serialized_bytes = 0;
  return out;
}

void export_mtune(tuner::MtuneModel& model, const std::string& path) {
  model.serialized_bytes = model_io::save_mtune(model, path);
}

tuner::MtuneModel import_mtune(const std::string& path) {
  return model_io::load_mtune(path);
}

}  // namespace ogl::orchestrator
