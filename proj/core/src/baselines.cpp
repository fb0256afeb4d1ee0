#include "ogl/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ogl/rng.hpp"

namespace ogl::baselines {

namespace {

nn::DenseNetwork shared_init(const BaselineConfig& cfg) {
  nn::validate_layers(cfg.model_spec);
  return nn::init_network(cfg.model_spec, derive_seed(cfg.master_seed, "w0"));
}

std::uint64_t train_seed(const BaselineConfig& cfg, int node, int t) {
  return derive_seed(cfg.master_seed, "train", static_cast<std::uint64_t>(node),
                     static_cast<std::uint64_t>(t));
}

void fill_eval(protocol::RoundMetrics& rm, const nn::EvalMetrics& em, int models) {
  rm.mean_acc += em.accuracy / models;
  rm.mean_loss += em.mean_loss / models;
  rm.macro_f1 += em.macro_f1 / models;
  rm.macro_precision += em.macro_precision / models;
  rm.macro_recall += em.macro_recall / models;
}

}  // namespace

BaselineResult run_centralized(std::span<const nn::Sample> train,
                               std::span<const nn::Sample> test,
                               const BaselineConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("centralized: empty training set");
  if (test.empty()) throw std::invalid_argument("centralized: empty test set");
  BaselineResult res;
  nn::DenseNetwork model = shared_init(cfg);
  protocol::StoppingTracker stop(cfg.stopping);
  for (int t = 0; t < cfg.stopping.max_rounds; ++t) {
    model = nn::train_epochs(model, train, cfg.local_epochs, cfg.optimizer, cfg.loss,
                             train_seed(cfg, 0, t));
    res.ledger.record_training(0, t, cfg.local_epochs,
                               static_cast<long long>(train.size()), cfg.cost);
    protocol::RoundMetrics rm;
    rm.round = t + 1;
    rm.present_nodes = 1;
    fill_eval(rm, nn::evaluate(model, test, cfg.loss), 1);
    rm.s = res.ledger.training_total();
    rm.objective = rm.c + cfg.cost.beta * (rm.s + rm.gamma);
    res.rounds.push_back(rm);
    if (stop.observe(rm.mean_acc)) break;
  }
  res.cutoff_round = static_cast<int>(res.rounds.size());
  res.final_mean_acc = res.rounds.back().mean_acc;
  res.final_models.push_back(std::move(model));
  return res;
}

BaselineResult run_fedavg(const std::vector<dataset::LocalDataset>& locals,
                          std::span<const nn::Sample> test, int clients_per_round,
                          const BaselineConfig& cfg) {
  if (locals.empty()) throw std::invalid_argument("fedavg: no local datasets");
  if (test.empty()) throw std::invalid_argument("fedavg: empty test set");
  if (clients_per_round < 1 || clients_per_round > static_cast<int>(locals.size()))
    throw std::invalid_argument("fedavg: clients_per_round must be in [1, |V|]");
  for (const auto& l : locals)
    if (l.train.empty())
      throw std::invalid_argument("fedavg: node " + std::to_string(l.node) +
                                  " has an empty training set");

  BaselineResult res;
  nn::DenseNetwork global = shared_init(cfg);
  protocol::StoppingTracker stop(cfg.stopping);
  for (int t = 0; t < cfg.stopping.max_rounds; ++t) {
    std::vector<int> order(locals.size());
    std::iota(order.begin(), order.end(), 0);
    Rng sampler(derive_seed(cfg.master_seed, "fedavg-sample",
                            static_cast<std::uint64_t>(t)));
    sampler.shuffle(order);
    order.resize(static_cast<std::size_t>(clients_per_round));
    std::sort(order.begin(), order.end());

    std::vector<nn::DenseNetwork> updates;
    std::vector<double> weights;
    double total = 0.0;
    for (int idx : order) {
      const dataset::LocalDataset& l = locals[static_cast<std::size_t>(idx)];
      updates.push_back(nn::train_epochs(global, l.train, cfg.local_epochs,
                                         cfg.optimizer, cfg.loss,
                                         train_seed(cfg, l.node, t)));
      weights.push_back(static_cast<double>(l.train.size()));
      total += static_cast<double>(l.train.size());
      res.ledger.record_training(l.node, t, cfg.local_epochs,
                                 static_cast<long long>(l.train.size()), cfg.cost);
      res.ledger.record_infra(l.node, t, 2 * cfg.cost.M, cfg.cost);
    }
    for (double& w : weights) w /= total;
    global = nn::merge_models(updates, weights);

    protocol::RoundMetrics rm;
    rm.round = t + 1;
    rm.present_nodes = static_cast<int>(locals.size());
    fill_eval(rm, nn::evaluate(global, test, cfg.loss), 1);
    rm.s = res.ledger.training_total();
    rm.c = res.ledger.infra_total();
    rm.objective = rm.c + cfg.cost.beta * (rm.s + rm.gamma);
    res.rounds.push_back(rm);
    if (stop.observe(rm.mean_acc)) break;
  }
  res.cutoff_round = static_cast<int>(res.rounds.size());
  res.final_mean_acc = res.rounds.back().mean_acc;
  res.final_models.push_back(std::move(global));
  return res;
}

BaselineResult run_local_only(const std::vector<dataset::LocalDataset>& locals,
                              std::span<const nn::Sample> test,
                              const BaselineConfig& cfg) {
  if (locals.empty()) throw std::invalid_argument("local-only: no local datasets");
  if (test.empty()) throw std::invalid_argument("local-only: empty test set");
  for (const auto& l : locals)
    if (l.train.empty())
      throw std::invalid_argument("local-only: node " + std::to_string(l.node) +
                                  " has an empty training set");

  BaselineResult res;
  nn::DenseNetwork w0 = shared_init(cfg);
  std::vector<nn::DenseNetwork> models(locals.size(), w0);
  protocol::StoppingTracker stop(cfg.stopping);
  for (int t = 0; t < cfg.stopping.max_rounds; ++t) {
    protocol::RoundMetrics rm;
    rm.round = t + 1;
    rm.present_nodes = static_cast<int>(locals.size());
    for (std::size_t i = 0; i < locals.size(); ++i) {
      models[i] = nn::train_epochs(models[i], locals[i].train, cfg.local_epochs,
                                   cfg.optimizer, cfg.loss,
                                   train_seed(cfg, locals[i].node, t));
      res.ledger.record_training(locals[i].node, t, cfg.local_epochs,
                                 static_cast<long long>(locals[i].train.size()),
                                 cfg.cost);
      fill_eval(rm, nn::evaluate(models[i], test, cfg.loss),
                static_cast<int>(locals.size()));
    }
    rm.s = res.ledger.training_total();
    rm.objective = rm.c + cfg.cost.beta * (rm.s + rm.gamma);
    res.rounds.push_back(rm);
    if (stop.observe(rm.mean_acc)) break;
  }
  res.cutoff_round = static_cast<int>(res.rounds.size());
  res.final_mean_acc = res.rounds.back().mean_acc;
  res.final_models = std::move(models);
  return res;
}

}  // namespace ogl::baselines
