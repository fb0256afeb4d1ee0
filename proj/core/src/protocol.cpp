#include "ogl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "ogl/csv.hpp"
#include "ogl/rng.hpp"

namespace ogl::protocol {

StoppingTracker::StoppingTracker(StoppingRule rule) : rule_(rule) {
  if (rule.max_rounds < 1) throw std::invalid_argument("stopping: max_rounds must be >= 1");
  if (rule.patience < 1) throw std::invalid_argument("stopping: patience must be >= 1");
  if (rule.min_improvement < 0.0)
    throw std::invalid_argument("stopping: min_improvement must be >= 0");
  best_ = -std::numeric_limits<double>::infinity();
}

bool StoppingTracker::observe(double mean_acc) {
  ++rounds_;
  if (mean_acc > best_ + rule_.min_improvement) {
    best_ = mean_acc;
    since_improvement_ = 0;
  } else {
    ++since_improvement_;
  }
  return since_improvement_ >= rule_.patience || rounds_ >= rule_.max_rounds;
}

void write_metrics_csv(const std::vector<RoundMetrics>& rounds, std::ostream& out,
                       const std::string& scheme) {
  csv::Writer w(out);
  std::vector<std::string> names = {"round",   "present_nodes",   "mean_acc",
                                    "mean_loss", "macro_f1",      "macro_precision",
                                    "macro_recall", "S",          "Gamma",
                                    "C",       "objective"};
  if (!scheme.empty()) names.push_back("scheme");
  w.header(names);
  for (const auto& r : rounds) {
    w.cell(r.round)
        .cell(r.present_nodes)
        .cell(r.mean_acc)
        .cell(r.mean_loss)
        .cell(r.macro_f1)
        .cell(r.macro_precision)
        .cell(r.macro_recall)
        .cell(r.s)
        .cell(r.gamma)
        .cell(r.c)
        .cell(r.objective);
    if (!scheme.empty()) w.cell(scheme);
    w.end_row();
  }
}

std::vector<RoundMetrics> read_metrics_csv(std::istream& in) {
  csv::Table t = csv::read_table(in);
  auto col = [&](const std::string& name) {
    int c = t.column(name);
    if (c < 0) throw std::runtime_error("metrics csv: missing column '" + name + "'");
    return static_cast<std::size_t>(c);
  };
  std::size_t c_round = col("round"), c_present = col("present_nodes"),
              c_acc = col("mean_acc"), c_loss = col("mean_loss"), c_f1 = col("macro_f1"),
              c_prec = col("macro_precision"), c_rec = col("macro_recall"), c_s = col("S"),
              c_gamma = col("Gamma"), c_c = col("C"), c_obj = col("objective");
  std::vector<RoundMetrics> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    RoundMetrics r;
    r.round = static_cast<int>(csv::parse_int(row[c_round], i + 2, c_round + 1));
    r.present_nodes = static_cast<int>(csv::parse_int(row[c_present], i + 2, c_present + 1));
    r.mean_acc = csv::parse_double(row[c_acc], i + 2, c_acc + 1);
    r.mean_loss = csv::parse_double(row[c_loss], i + 2, c_loss + 1);
    r.macro_f1 = csv::parse_double(row[c_f1], i + 2, c_f1 + 1);
    r.macro_precision = csv::parse_double(row[c_prec], i + 2, c_prec + 1);
    r.macro_recall = csv::parse_double(row[c_rec], i + 2, c_rec + 1);
    r.s = csv::parse_double(row[c_s], i + 2, c_s + 1);
    r.gamma = csv::parse_double(row[c_gamma], i + 2, c_gamma + 1);
    r.c = csv::parse_double(row[c_c], i + 2, c_c + 1);
    r.objective = csv::parse_double(row[c_obj], i + 2, c_obj + 1);
    out.push_back(r);
  }
  return out;
}

namespace {

void check_local(const dataset::LocalDataset& local) {
  if (local.train.empty())
    throw std::invalid_argument("protocol: node " + std::to_string(local.node) +
                                " has an empty training set");
  if (local.validation.empty())
    throw std::invalid_argument("protocol: node " + std::to_string(local.node) +
                                " has an empty validation set");
}

}  // namespace

GossipEngine::GossipEngine(const dataset::SourceDataset& source,
                           dataset::Partition partition,
                           const dataset::PartitionConfig& partition_cfg,
                           const topology::ContactSchedule& schedule,
                           const tuner::Policy& policy, EngineConfig cfg)
    : source_(source),
      partition_(std::move(partition)),
      partition_cfg_(partition_cfg),
      schedule_(schedule),
      policy_(policy),
      cfg_(std::move(cfg)),
      reserve_rng_(derive_seed(cfg_.master_seed, "reserve")) {
  if (cfg_.z_max < 0) throw std::invalid_argument("protocol: z_max must be >= 0");
  StoppingTracker validate(cfg_.stopping);  // throws on a bad rule
  nn::validate_layers(cfg_.model_spec);
  w0_ = nn::init_network(cfg_.model_spec, derive_seed(cfg_.master_seed, "w0"));
  if (w0_.input_dim() != source_.feature_dim)
    throw std::invalid_argument("protocol: model input dim " +
                                std::to_string(w0_.input_dim()) +
                                " != dataset feature dim " +
                                std::to_string(source_.feature_dim));
  if (cfg_.loss == nn::Loss::cross_entropy && w0_.output_dim() != source_.num_classes)
    throw std::invalid_argument("protocol: model output dim " +
                                std::to_string(w0_.output_dim()) +
                                " != class count " + std::to_string(source_.num_classes));
  default_loss_ = cfg_.loss == nn::Loss::cross_entropy
                      ? std::log(static_cast<double>(std::max(2, source_.num_classes)))
                      : 1.0;
  result_.manifest_hash = dataset::manifest_hash(partition_.manifest);
}

void GossipEngine::handle_churn(int t) {
  for (auto it = states_.begin(); it != states_.end();) {
    if (!schedule_.present(it->first, t))
      it = states_.erase(it);
    else
      ++it;
  }
  for (int v : schedule_.present_nodes(t)) {
    if (states_.count(v)) continue;
    NodeState st;
    st.id = v;
    st.model = w0_;
    auto pre = std::find_if(partition_.locals.begin(), partition_.locals.end(),
                            [&](const dataset::LocalDataset& l) { return l.node == v; });
    if (pre != partition_.locals.end()) {
      st.local = *pre;
      partition_.locals.erase(pre);
    } else {
      st.local = dataset::draw_from_reserve(partition_, source_, v, partition_cfg_,
                                            reserve_rng_);
    }
    check_local(st.local);
    long long bytes = policy_.dissemination_bytes();
    if (bytes > 0) result_.ledger.record_infra(v, t, bytes, cfg_.cost);
    states_.emplace(v, std::move(st));
  }
}

void GossipEngine::run_slot(int t) {
  SlotMessages msgs;
  msgs.slot = t;

  std::unordered_map<int, double> prev_loss;
  for (const auto& [id, st] : states_)
    prev_loss[id] = st.has_loss ? st.last_loss : default_loss_;

  // (a) tune, train, evaluate
  std::unordered_map<int, tuner::TunerDecision> decisions;
  std::unordered_map<int, std::size_t> action_index;
  for (auto& [v, st] : states_) {
    const std::vector<int>& nbrs = schedule_.neighbors(v, t);
    std::vector<double> nbr_losses;
    nbr_losses.reserve(nbrs.size());
    for (int u : nbrs) nbr_losses.push_back(prev_loss.at(u));
    double cum = result_.ledger.node_cost(v, cfg_.cost);
    tuner::TunerFeatures feats = tuner::make_features(
        static_cast<int>(nbrs.size()), static_cast<int>(st.local.train.size()),
        static_cast<int>(st.local.validation.size()), prev_loss.at(v), nbr_losses, cum,
        cfg_.initial_budget - cum, cfg_.compute_power,
        static_cast<double>(t) / cfg_.stopping.max_rounds);
    Rng policy_rng(derive_seed(cfg_.master_seed, "policy", static_cast<std::uint64_t>(v),
                               static_cast<std::uint64_t>(t)));
    tuner::TunerDecision dec = policy_.decide(feats, nbrs, policy_rng);
    if (dec.epochs < 0 || dec.epochs > cfg_.z_max) {
      if (!warned_clamp_) {
        std::cerr << "warning: tuner epochs " << dec.epochs << " clamped to [0, "
                  << cfg_.z_max << "]\n";
        warned_clamp_ = true;
      }
      dec.epochs = std::clamp(dec.epochs, 0, cfg_.z_max);
    }
    st.model = nn::train_epochs(st.model, st.local.train, dec.epochs, cfg_.optimizer,
                                cfg_.loss,
                                derive_seed(cfg_.master_seed, "train",
                                            static_cast<std::uint64_t>(v),
                                            static_cast<std::uint64_t>(t)));
    st.last_loss = nn::mean_loss(st.model, st.local.validation, cfg_.loss);
    st.has_loss = true;
    result_.ledger.record_training(v, t, dec.epochs,
                                   static_cast<long long>(st.local.train.size()),
                                   cfg_.cost);
    result_.ledger.record_evaluation(
        v, t, static_cast<long long>(st.local.validation.size()), cfg_.cost);
    if (cfg_.record_actions) {
      result_.actions.push_back({v, t, feats, dec.epochs, -1.0});
      action_index[v] = result_.actions.size() - 1;
    }
    decisions.emplace(v, std::move(dec));
  }

  // (b) advertise fresh losses, resolve K, request models
  std::unordered_map<int, std::vector<tuner::NeighborLoss>> inbox;
  for (const auto& [v, st] : states_) {
    for (int u : schedule_.neighbors(v, t)) {
      msgs.loss_ads.push_back({v, u, st.last_loss});
      inbox[u].push_back({v, st.last_loss});
    }
  }
  std::unordered_map<int, std::vector<int>> selections;
  for (const auto& [v, st] : states_) {
    const std::vector<int>& nbrs = schedule_.neighbors(v, t);
    const tuner::TunerDecision& dec = decisions.at(v);
    if (dec.selection == tuner::TunerDecision::Selection::explicit_set) {
      for (int u : dec.selected) {
        if (!std::binary_search(nbrs.begin(), nbrs.end(), u)) {
          if (!warned_clamp_) {
            std::cerr << "warning: tuner selected non-neighbor " << u
                      << "; selection clamped to the neighborhood\n";
            warned_clamp_ = true;
          }
        }
      }
    }
    std::vector<int> k = dec.resolve(inbox[v]);
    for (int u : k) msgs.requests.push_back({v, u});
    result_.ledger.record_communication(v, t, static_cast<int>(nbrs.size()),
                                        static_cast<int>(k.size()), cfg_.cost);
    selections.emplace(v, std::move(k));
  }

  // (c) merge; every input is this slot's post-training snapshot
  std::unordered_map<int, nn::DenseNetwork> merged;
  for (const auto& [v, st] : states_) {
    const std::vector<int>& chosen = selections.at(v);
    if (chosen.empty()) continue;
    std::vector<nn::DenseNetwork> models;
    std::vector<double> losses;
    models.reserve(chosen.size() + 1);
    losses.reserve(chosen.size() + 1);
    models.push_back(st.model);
    losses.push_back(st.last_loss);
    double tau = -1.0;
    for (int u : chosen) {
      const NodeState& peer = states_.at(u);
      models.push_back(peer.model);
      losses.push_back(peer.last_loss);
      tau = std::max(tau, peer.last_loss);
      msgs.responses.push_back({u, v});
    }
    merged.emplace(v, nn::merge_models(models, nn::dfed_pow_weights(losses)));
    if (cfg_.record_actions) result_.actions[action_index.at(v)].tau = tau;
  }
  for (auto& [v, model] : merged) states_.at(v).model = std::move(model);

  if (cfg_.record_messages) result_.messages.push_back(std::move(msgs));
}

RoundMetrics GossipEngine::round_metrics(int t) const {
  RoundMetrics rm;
  rm.round = t + 1;
  rm.present_nodes = static_cast<int>(states_.size());
  if (!partition_.global_test.empty()) {
    for (const auto& [v, st] : states_) {
      nn::EvalMetrics em = nn::evaluate(st.model, partition_.global_test, cfg_.loss);
      rm.mean_acc += em.accuracy;
      rm.mean_loss += em.mean_loss;
      rm.macro_f1 += em.macro_f1;
      rm.macro_precision += em.macro_precision;
      rm.macro_recall += em.macro_recall;
    }
  }
  if (rm.present_nodes > 0) {
    rm.mean_acc /= rm.present_nodes;
    rm.mean_loss /= rm.present_nodes;
    rm.macro_f1 /= rm.present_nodes;
    rm.macro_precision /= rm.present_nodes;
    rm.macro_recall /= rm.present_nodes;
  }
  rm.s = result_.ledger.training_total();
  rm.gamma = result_.ledger.evaluation_total();
  rm.c = result_.ledger.communication_total();
  rm.objective = result_.ledger.objective(cfg_.cost);
  return rm;
}

RunResult GossipEngine::run() {
  StoppingTracker stop(cfg_.stopping);
  int limit = std::min(cfg_.stopping.max_rounds, schedule_.slots());
  for (int t = 0; t < limit; ++t) {
    handle_churn(t);
    run_slot(t);
    RoundMetrics rm = round_metrics(t);
    result_.rounds.push_back(rm);
    if (stop.observe(rm.mean_acc)) break;
  }
  result_.cutoff_round = static_cast<int>(result_.rounds.size());
  result_.final_mean_acc =
      result_.rounds.empty() ? 0.0 : result_.rounds.back().mean_acc;
  return std::move(result_);
}

}  // namespace ogl::protocol
