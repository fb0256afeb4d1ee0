#include "doctest.h"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ogl/baselines.hpp"
#include "ogl/rng.hpp"

using namespace ogl;
using namespace ogl::baselines;

namespace {

dataset::SourceDataset blobs(int n, int classes, int dim, std::uint64_t seed) {
  return dataset::load_source("blobs:n=" + std::to_string(n) +
                              ",classes=" + std::to_string(classes) +
                              ",dim=" + std::to_string(dim) +
                              ",seed=" + std::to_string(seed));
}

BaselineConfig base_config(int dim, int classes, std::uint64_t seed) {
  BaselineConfig cfg;
  cfg.model_spec = {{dim, 8, nn::Activation::relu},
                    {8, classes, nn::Activation::softmax}};
  cfg.optimizer.learning_rate = 0.1;
  cfg.optimizer.momentum = 0.9;
  cfg.optimizer.batch_size = 16;
  cfg.stopping = {30, 30, 0.0};
  cfg.master_seed = seed;
  return cfg;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("baselines: centralized learns separable blobs and reruns identically") {
  auto src = blobs(400, 3, 6, 8);
  std::vector<nn::Sample> train(src.samples.begin(), src.samples.begin() + 300);
  std::vector<nn::Sample> test(src.samples.begin() + 300, src.samples.end());

  BaselineConfig cfg = base_config(6, 3, 42);
  cfg.stopping = {60, 60, 0.0};
  BaselineResult a = run_centralized(train, test, cfg);
  CHECK(a.final_mean_acc >= 0.9);
  CHECK(a.rounds.back().s ==
        doctest::Approx(a.cutoff_round * 300 * (cfg.cost.e_g + cfg.cost.e_s))
            .epsilon(1e-12));
  CHECK(a.rounds.back().c == 0.0);
  CHECK(a.rounds.back().gamma == 0.0);

  BaselineResult b = run_centralized(train, test, cfg);
  std::ostringstream sa, sb;
  protocol::write_metrics_csv(a.rounds, sa, "centralized");
  protocol::write_metrics_csv(b.rounds, sb, "centralized");
  CHECK(sa.str() == sb.str());
}

TEST_CASE("baselines: zero local epochs reports the initial model") {
  auto src = blobs(200, 2, 4, 9);
  std::vector<nn::Sample> train(src.samples.begin(), src.samples.begin() + 150);
  std::vector<nn::Sample> test(src.samples.begin() + 150, src.samples.end());

  BaselineConfig cfg = base_config(4, 2, 77);
  cfg.local_epochs = 0;
  cfg.stopping = {3, 30, 0.0};
  BaselineResult res = run_centralized(train, test, cfg);

  nn::DenseNetwork w0 =
      nn::init_network(cfg.model_spec, derive_seed(cfg.master_seed, "w0"));
  nn::EvalMetrics em = nn::evaluate(w0, test, cfg.loss);
  for (const auto& rm : res.rounds) {
    CHECK(rm.mean_acc == em.accuracy);
    CHECK(rm.mean_loss == em.mean_loss);
  }
  CHECK(max_abs_diff(res.final_models.at(0).params, w0.params) == 0.0);
}

TEST_CASE("baselines: fedavg with identical full-batch clients equals centralized") {
  auto src = blobs(240, 3, 5, 31);
  std::vector<nn::Sample> shared(src.samples.begin(), src.samples.begin() + 60);
  std::vector<nn::Sample> test(src.samples.begin() + 60, src.samples.begin() + 160);

  BaselineConfig cfg = base_config(5, 3, 2029);
  cfg.optimizer.batch_size = 60;  // full batch: one exact gradient step per epoch
  cfg.local_epochs = 1;
  cfg.stopping = {4, 30, 0.0};

  std::vector<dataset::LocalDataset> locals;
  for (int v = 0; v < 6; ++v) locals.push_back({v, shared, {}});

  BaselineResult fed = run_fedavg(locals, test, 6, cfg);
  BaselineResult cen = run_centralized(shared, test, cfg);
  CHECK(max_abs_diff(fed.final_models.at(0).params, cen.final_models.at(0).params) <=
        1e-9);
  for (std::size_t i = 0; i < fed.rounds.size(); ++i)
    CHECK(fed.rounds[i].mean_acc == doctest::Approx(cen.rounds[i].mean_acc).epsilon(1e-9));
}

TEST_CASE("baselines: fedavg with one client adopts that client's model") {
  auto src = blobs(200, 2, 4, 5);
  std::vector<dataset::LocalDataset> locals;
  locals.push_back({0, {src.samples.begin(), src.samples.begin() + 40}, {}});
  locals.push_back({1, {src.samples.begin() + 40, src.samples.begin() + 80}, {}});
  std::vector<nn::Sample> test(src.samples.begin() + 80, src.samples.begin() + 140);

  BaselineConfig cfg = base_config(4, 2, 99);
  cfg.stopping = {1, 30, 0.0};
  BaselineResult res = run_fedavg(locals, test, 1, cfg);

  // Replay the server's sampling draw to find the participant, then its
  // training; a single-element weighted average must equal it exactly.
  std::vector<int> order = {0, 1};
  Rng sampler(derive_seed(cfg.master_seed, "fedavg-sample", 0));
  sampler.shuffle(order);
  int picked = order[0];
  nn::DenseNetwork w0 =
      nn::init_network(cfg.model_spec, derive_seed(cfg.master_seed, "w0"));
  nn::DenseNetwork expect = nn::train_epochs(
      w0, locals[static_cast<std::size_t>(picked)].train, 1, cfg.optimizer, cfg.loss,
      derive_seed(cfg.master_seed, "train", static_cast<std::uint64_t>(picked), 0));
  CHECK(max_abs_diff(res.final_models.at(0).params, expect.params) == 0.0);
}

TEST_CASE("baselines: fedavg merge weights follow training-set sizes") {
  auto src = blobs(200, 2, 4, 61);
  std::vector<dataset::LocalDataset> locals;
  locals.push_back({0, {src.samples.begin(), src.samples.begin() + 10}, {}});
  locals.push_back({1, {src.samples.begin() + 10, src.samples.begin() + 40}, {}});
  std::vector<nn::Sample> test(src.samples.begin() + 40, src.samples.begin() + 100);

  BaselineConfig cfg = base_config(4, 2, 300);
  cfg.optimizer.batch_size = 64;
  cfg.stopping = {1, 30, 0.0};
  BaselineResult res = run_fedavg(locals, test, 2, cfg);

  nn::DenseNetwork w0 =
      nn::init_network(cfg.model_spec, derive_seed(cfg.master_seed, "w0"));
  nn::DenseNetwork m0 = nn::train_epochs(w0, locals[0].train, 1, cfg.optimizer,
                                         cfg.loss, derive_seed(cfg.master_seed, "train", 0, 0));
  nn::DenseNetwork m1 = nn::train_epochs(w0, locals[1].train, 1, cfg.optimizer,
                                         cfg.loss, derive_seed(cfg.master_seed, "train", 1, 0));
  std::vector<nn::DenseNetwork> models = {m0, m1};
  std::vector<double> weights = {0.25, 0.75};
  nn::DenseNetwork expect = nn::merge_models(models, weights);
  CHECK(max_abs_diff(res.final_models.at(0).params, expect.params) <= 1e-12);
}

TEST_CASE("baselines: fedavg books its traffic on the infrastructure counter") {
  auto src = blobs(300, 3, 5, 71);
  std::vector<dataset::LocalDataset> locals;
  for (int v = 0; v < 4; ++v)
    locals.push_back(
        {v, {src.samples.begin() + v * 30, src.samples.begin() + (v + 1) * 30}, {}});
  std::vector<nn::Sample> test(src.samples.begin() + 120, src.samples.begin() + 220);

  BaselineConfig cfg = base_config(5, 3, 111);
  cfg.stopping = {5, 30, 0.0};
  BaselineResult res = run_fedavg(locals, test, 3, cfg);
  REQUIRE(res.rounds.size() == 5);

  double per_round = 3 * 2.0 * static_cast<double>(cfg.cost.M) * cfg.cost.c_infra;
  CHECK(res.ledger.infra_total() == doctest::Approx(5 * per_round).epsilon(1e-12));
  CHECK(res.ledger.communication_total() == 0.0);
  CHECK(res.rounds.back().c == doctest::Approx(5 * per_round).epsilon(1e-12));
  CHECK(res.rounds.back().objective ==
        doctest::Approx(res.rounds.back().c +
                        cfg.cost.beta * (res.rounds.back().s + res.rounds.back().gamma))
            .epsilon(1e-12));
  // The ledger's own objective stays d2d-based and must exclude infra bytes.
  CHECK(res.ledger.objective(cfg.cost) ==
        doctest::Approx(cfg.cost.beta * res.ledger.training_total()).epsilon(1e-12));
}

TEST_CASE("baselines: local-only with all data in one node equals centralized") {
  auto src = blobs(300, 3, 6, 19);
  std::vector<nn::Sample> all(src.samples.begin(), src.samples.begin() + 200);
  std::vector<nn::Sample> test(src.samples.begin() + 200, src.samples.end());

  BaselineConfig cfg = base_config(6, 3, 7);
  cfg.stopping = {12, 30, 0.0};
  std::vector<dataset::LocalDataset> locals = {{0, all, {}}};

  BaselineResult solo = run_local_only(locals, test, cfg);
  BaselineResult cen = run_centralized(all, test, cfg);
  CHECK(max_abs_diff(solo.final_models.at(0).params, cen.final_models.at(0).params) ==
        0.0);
  std::ostringstream sa, sb;
  protocol::write_metrics_csv(solo.rounds, sa);
  protocol::write_metrics_csv(cen.rounds, sb);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("baselines: a single-class node stays weak on the other classes") {
  auto src = blobs(600, 3, 5, 83);
  std::vector<nn::Sample> one_class;
  for (const auto& s : src.samples)
    if (s.label == 0 && one_class.size() < 60) one_class.push_back(s);
  REQUIRE(one_class.size() == 60);
  std::vector<nn::Sample> test(src.samples.begin() + 400, src.samples.end());

  BaselineConfig cfg = base_config(5, 3, 55);
  cfg.stopping = {15, 30, 0.0};
  std::vector<dataset::LocalDataset> locals = {{0, one_class, {}}};
  BaselineResult res = run_local_only(locals, test, cfg);
  CHECK(res.rounds.back().mean_acc < 0.5);
  CHECK(res.rounds.back().macro_recall < 0.45);
}

TEST_CASE("baselines: argument validation") {
  auto src = blobs(100, 2, 4, 3);
  std::vector<nn::Sample> train(src.samples.begin(), src.samples.begin() + 50);
  std::vector<nn::Sample> test(src.samples.begin() + 50, src.samples.begin() + 90);
  BaselineConfig cfg = base_config(4, 2, 1);
  std::vector<dataset::LocalDataset> locals = {{0, train, {}}};

  CHECK_THROWS_AS(run_centralized({}, test, cfg), std::invalid_argument);
  CHECK_THROWS_AS(run_centralized(train, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(run_fedavg(locals, test, 0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(run_fedavg(locals, test, 2, cfg), std::invalid_argument);
  CHECK_THROWS_AS(run_fedavg({}, test, 1, cfg), std::invalid_argument);
  CHECK_THROWS_AS(run_local_only({}, test, cfg), std::invalid_argument);
  std::vector<dataset::LocalDataset> empty_train = {{0, {}, {}}};
  CHECK_THROWS_AS(run_local_only(empty_train, test, cfg), std::invalid_argument);
}
