#include "ogl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "ogl/csv.hpp"
#include "ogl/rng.hpp"
#include "ogl/stats.hpp"
#include "ogl/tuner.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ogl::harness {

namespace {

constexpr double kLuxConcurrent = 27.3;  // mean concurrent vehicle population
constexpr double kLuxSojournMin = 2.9;

std::vector<nn::LayerSpec> digits_model() {
  return {{64, 32, nn::Activation::relu}, {32, 10, nn::Activation::softmax}};
}

long long model_bytes(const std::vector<nn::LayerSpec>& spec) {
  long long params = 0;
  for (const auto& l : spec)
    params += static_cast<long long>(l.input_dim) * l.output_dim + l.output_dim;
  return params * 8;
}

ScenarioConfig digits_base() {
  ScenarioConfig cfg;
  cfg.dataset = "digits.csv";
  cfg.model = digits_model();
  cfg.optimizer.kind = nn::OptimizerConfig::Kind::sgd_momentum;
  cfg.optimizer.learning_rate = 0.05;
  cfg.optimizer.momentum = 0.9;
  cfg.optimizer.batch_size = 32;
  cfg.loss = nn::Loss::cross_entropy;
  cfg.cost.M = model_bytes(cfg.model);
  cfg.target_accuracy = 0.8;
  return cfg;
}

ScenarioConfig er_preset(int nodes, double p, const std::string& name) {
  ScenarioConfig cfg = digits_base();
  cfg.name = name;
  cfg.topology = "er";
  cfg.node_count = nodes;
  cfg.edge_prob = p;
  cfg.slots = 600;
  // Slow enough that one-epoch schemes plateau out under the stopping rule
  // well before the accuracy ceiling, as at full scale.
  cfg.optimizer.learning_rate = 0.002;
  return cfg;
}

ScenarioConfig churn_base(const std::string& name) {
  ScenarioConfig cfg = digits_base();
  cfg.name = name;
  cfg.topology = "churn";
  cfg.churn.mean_sojourn_min = kLuxSojournMin;
  cfg.churn.duration_min = 40.0;
  cfg.churn.contact_radius_m = 150.0;
  cfg.churn.slot_length_s = 20.0;
  cfg.churn.speed_mps = 8.0;
  // Duration-limited: a 40 min window at 20 s slots is 120 rounds, and the
  // patience equals the cap so the plateau rule can never cut a churn run.
  cfg.stopping = {120, 120, 0.0};
  cfg.slots = 120;
  return cfg;
}

ScenarioConfig build_preset(const std::string& name) {
  if (name == "blobs-er-6-p1") {
    ScenarioConfig cfg;
    cfg.name = name;
    cfg.topology = "er";
    cfg.node_count = 6;
    cfg.edge_prob = 1.0;
    cfg.slots = 40;
    cfg.dataset = "blobs:n=600,classes=3,dim=8,seed=7";
    cfg.partition = {300, 30, 80, 0.2, 0.2, 0};
    cfg.model = {{8, 16, nn::Activation::relu}, {16, 3, nn::Activation::softmax}};
    cfg.optimizer.kind = nn::OptimizerConfig::Kind::sgd_momentum;
    cfg.optimizer.learning_rate = 0.1;
    cfg.optimizer.momentum = 0.9;
    cfg.optimizer.batch_size = 16;
    cfg.z_max = 3;
    cfg.cost.M = model_bytes(cfg.model);
    cfg.stopping = {40, 20, 0.005};
    return cfg;
  }
  if (name == "churn-luxembourg") {
    ScenarioConfig cfg = churn_base(name);
    // Little's law: the observed 27.3 concurrent vehicles with a 2.9 min
    // sojourn need 27.3/2.9 arrivals per minute (the raw 492/40 would offer
    // 35.7 concurrent; the population target wins).
    cfg.churn.arrival_rate_per_min = kLuxConcurrent / kLuxSojournMin;
    cfg.churn.area_side_m = 1000.0;
    // Full MNIST via OGL_DATA_DIR; the bundled digits subset cannot feed
    // ~400 distinct vehicles.
    cfg.dataset = "idx:train-images-idx3-ubyte,train-labels-idx1-ubyte";
    cfg.model = {{784, 32, nn::Activation::relu}, {32, 10, nn::Activation::softmax}};
    cfg.cost.M = model_bytes(cfg.model);
    cfg.partition = {0, 50, 150, 0.2, 0.2, 0};
    return cfg;
  }
  if (name == "churn-desk") {
    ScenarioConfig cfg = churn_base(name);
    cfg.churn.arrival_rate_per_min = 4.0 / kLuxSojournMin;
    cfg.churn.area_side_m = 300.0;
    cfg.partition = {0, 12, 20, 0.2, 0.15, 0};
    return cfg;
  }

  // mnist-er-<V>-p<P> grid
  for (int nodes : {3, 6, 12}) {
    for (auto [tok, p] : {std::pair{"p01", 0.1}, {"p07", 0.7}, {"p1", 1.0}}) {
      std::string candidate =
          "mnist-er-" + std::to_string(nodes) + "-" + std::string(tok);
      if (name == candidate) return er_preset(nodes, p, candidate);
    }
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("harness: unknown preset '" + name +
                              "' (available: " + known + ")");
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (int nodes : {3, 6, 12})
    for (const char* tok : {"p01", "p07", "p1"})
      names.push_back("mnist-er-" + std::to_string(nodes) + "-" + tok);
  names.push_back("churn-luxembourg");
  names.push_back("churn-desk");
  names.push_back("blobs-er-6-p1");
  return names;
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig cfg = build_preset(name);
  cfg.validate();
  return cfg;
}

void ScenarioConfig::validate() const {
  if (topology != "er" && topology != "trace" && topology != "churn")
    throw std::invalid_argument("scenario: topology must be er, trace, or churn");
  if (topology == "er") {
    if (node_count < 1) throw std::invalid_argument("scenario: node_count must be >= 1");
    if (edge_prob < 0.0 || edge_prob > 1.0)
      throw std::invalid_argument("scenario: edge_prob must lie in [0, 1]");
    if (slots < 1) throw std::invalid_argument("scenario: slots must be >= 1");
  }
  if (topology == "trace" && trace_path.empty())
    throw std::invalid_argument("scenario: trace topology needs trace_path");
  if (topology == "churn") {
    if (churn.arrival_rate_per_min <= 0.0 || churn.mean_sojourn_min <= 0.0 ||
        churn.duration_min <= 0.0 || churn.contact_radius_m <= 0.0 ||
        churn.area_side_m <= 0.0 || churn.slot_length_s <= 0.0)
      throw std::invalid_argument("scenario: churn parameters must be positive");
  }
  if (target_accuracy < 0.0 || target_accuracy > 1.0)
    throw std::invalid_argument("scenario: target_accuracy must lie in [0, 1]");
  if (z_max < 0) throw std::invalid_argument("scenario: z_max must be >= 0");
  if (model.empty()) throw std::invalid_argument("scenario: empty model spec");
  if (dataset.empty()) throw std::invalid_argument("scenario: empty dataset");
  if (partition.per_node_min < 1 || partition.per_node_max < partition.per_node_min)
    throw std::invalid_argument("scenario: per-node size bounds are inconsistent");
}

std::string resolve_data_path(const std::string& spec) {
  if (spec.rfind("blobs:", 0) == 0) return spec;
  std::string idx_prefix;
  std::string paths = spec;
  if (spec.rfind("idx:", 0) == 0) {
    idx_prefix = "idx:";
    paths = spec.substr(4);
  }
  const char* env = std::getenv("OGL_DATA_DIR");
  const std::string root = env && *env ? env : "data";
  auto resolve_one = [&](const std::string& p) -> std::string {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute() || fs::exists(path)) return p;
    return (fs::path(root) / path).string();
  };
  if (!idx_prefix.empty()) {
    auto comma = paths.find(',');
    if (comma == std::string::npos) return idx_prefix + resolve_one(paths);
    return idx_prefix + resolve_one(paths.substr(0, comma)) + "," +
           resolve_one(paths.substr(comma + 1));
  }
  return resolve_one(paths);
}

// ---------------------------------------------------------------------------
// JSON configuration

namespace {

void check_keys(const json& j, std::initializer_list<const char*> keys,
                const char* ctx) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(keys.begin(), keys.end(),
                     [&](const char* k) { return key == k; }) == keys.end())
      throw std::invalid_argument(std::string("config: unknown key '") + key +
                                  "' in " + ctx);
  }
}

std::string activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::relu: return "relu";
    case nn::Activation::softmax: return "softmax";
    case nn::Activation::identity: return "identity";
  }
  return "relu";
}

nn::Activation activation_from(const std::string& s) {
  if (s == "relu") return nn::Activation::relu;
  if (s == "softmax") return nn::Activation::softmax;
  if (s == "identity") return nn::Activation::identity;
  throw std::invalid_argument("config: unknown activation '" + s + "'");
}

json layers_to_json(const std::vector<nn::LayerSpec>& spec) {
  json arr = json::array();
  for (const auto& l : spec)
    arr.push_back({{"input_dim", l.input_dim},
                   {"output_dim", l.output_dim},
                   {"activation", activation_name(l.activation)}});
  return arr;
}

std::vector<nn::LayerSpec> layers_from_json(const json& arr) {
  std::vector<nn::LayerSpec> spec;
  for (const auto& j : arr) {
    check_keys(j, {"input_dim", "output_dim", "activation"}, "model layer");
    nn::LayerSpec l;
    l.input_dim = j.at("input_dim").get<int>();
    l.output_dim = j.at("output_dim").get<int>();
    if (j.contains("activation"))
      l.activation = activation_from(j.at("activation").get<std::string>());
    spec.push_back(l);
  }
  return spec;
}

json scenario_to_json_value(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["topology"] = c.topology;
  j["node_count"] = c.node_count;
  j["edge_prob"] = c.edge_prob;
  j["slots"] = c.slots;
  j["trace_path"] = c.trace_path;
  j["contact_radius_m"] = c.contact_radius_m;
  j["trace_slot_length_s"] = c.trace_slot_length_s;
  j["churn"] = {{"arrival_rate_per_min", c.churn.arrival_rate_per_min},
                {"mean_sojourn_min", c.churn.mean_sojourn_min},
                {"duration_min", c.churn.duration_min},
                {"contact_radius_m", c.churn.contact_radius_m},
                {"area_side_m", c.churn.area_side_m},
                {"slot_length_s", c.churn.slot_length_s},
                {"speed_mps", c.churn.speed_mps}};
  j["dataset"] = c.dataset;
  j["partition"] = {{"global_size", c.partition.global_size},
                    {"per_node_min", c.partition.per_node_min},
                    {"per_node_max", c.partition.per_node_max},
                    {"validation_fraction", c.partition.validation_fraction},
                    {"test_fraction", c.partition.test_fraction}};
  j["model"] = layers_to_json(c.model);
  j["optimizer"] = {
      {"kind", c.optimizer.kind == nn::OptimizerConfig::Kind::adam ? "adam"
                                                                   : "sgd_momentum"},
      {"learning_rate", c.optimizer.learning_rate},
      {"momentum", c.optimizer.momentum},
      {"adam_beta1", c.optimizer.adam_beta1},
      {"adam_beta2", c.optimizer.adam_beta2},
      {"adam_epsilon", c.optimizer.adam_epsilon},
      {"batch_size", c.optimizer.batch_size}};
  j["loss"] = c.loss == nn::Loss::mse ? "mse" : "cross_entropy";
  j["z_max"] = c.z_max;
  j["initial_budget"] = c.initial_budget;
  j["compute_power"] = c.compute_power;
  j["cost"] = {{"e_g", c.cost.e_g},     {"e_s", c.cost.e_s},
               {"e_e", c.cost.e_e},     {"e_es", c.cost.e_es},
               {"c_d2d", c.cost.c_d2d}, {"c_infra", c.cost.c_infra},
               {"L", c.cost.L},         {"R", c.cost.R},
               {"M", c.cost.M},         {"beta", c.cost.beta}};
  j["stopping"] = {{"max_rounds", c.stopping.max_rounds},
                   {"patience", c.stopping.patience},
                   {"min_improvement", c.stopping.min_improvement}};
  j["policy"] = c.policy;
  j["target_accuracy"] = c.target_accuracy;
  j["master_seed"] = c.master_seed;
  return j;
}

ScenarioConfig scenario_from_json_value(const json& j) {
  check_keys(j,
             {"preset", "name", "topology", "node_count", "edge_prob", "slots",
              "trace_path", "contact_radius_m", "trace_slot_length_s", "churn",
              "dataset", "partition", "model", "optimizer", "loss", "z_max",
              "initial_budget", "compute_power", "cost", "stopping", "policy",
              "target_accuracy", "master_seed"},
             "scenario");
  ScenarioConfig c;
  if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
  if (j.contains("name")) c.name = j.at("name").get<std::string>();
  if (j.contains("topology")) c.topology = j.at("topology").get<std::string>();
  if (j.contains("node_count")) c.node_count = j.at("node_count").get<int>();
  if (j.contains("edge_prob")) c.edge_prob = j.at("edge_prob").get<double>();
  if (j.contains("slots")) c.slots = j.at("slots").get<int>();
  if (j.contains("trace_path")) c.trace_path = j.at("trace_path").get<std::string>();
  if (j.contains("contact_radius_m"))
    c.contact_radius_m = j.at("contact_radius_m").get<double>();
  if (j.contains("trace_slot_length_s"))
    c.trace_slot_length_s = j.at("trace_slot_length_s").get<double>();
  if (j.contains("churn")) {
    const json& ch = j.at("churn");
    check_keys(ch,
               {"arrival_rate_per_min", "mean_sojourn_min", "duration_min",
                "contact_radius_m", "area_side_m", "slot_length_s", "speed_mps"},
               "churn");
    if (ch.contains("arrival_rate_per_min"))
      c.churn.arrival_rate_per_min = ch.at("arrival_rate_per_min").get<double>();
    if (ch.contains("mean_sojourn_min"))
      c.churn.mean_sojourn_min = ch.at("mean_sojourn_min").get<double>();
    if (ch.contains("duration_min"))
      c.churn.duration_min = ch.at("duration_min").get<double>();
    if (ch.contains("contact_radius_m"))
      c.churn.contact_radius_m = ch.at("contact_radius_m").get<double>();
    if (ch.contains("area_side_m"))
      c.churn.area_side_m = ch.at("area_side_m").get<double>();
    if (ch.contains("slot_length_s"))
      c.churn.slot_length_s = ch.at("slot_length_s").get<double>();
    if (ch.contains("speed_mps")) c.churn.speed_mps = ch.at("speed_mps").get<double>();
  }
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  if (j.contains("partition")) {
    const json& p = j.at("partition");
    check_keys(p,
               {"global_size", "per_node_min", "per_node_max",
                "validation_fraction", "test_fraction"},
               "partition");
    if (p.contains("global_size")) c.partition.global_size = p.at("global_size").get<int>();
    if (p.contains("per_node_min"))
      c.partition.per_node_min = p.at("per_node_min").get<int>();
    if (p.contains("per_node_max"))
      c.partition.per_node_max = p.at("per_node_max").get<int>();
    if (p.contains("validation_fraction"))
      c.partition.validation_fraction = p.at("validation_fraction").get<double>();
    if (p.contains("test_fraction"))
      c.partition.test_fraction = p.at("test_fraction").get<double>();
  }
  if (j.contains("model")) c.model = layers_from_json(j.at("model"));
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o,
               {"kind", "learning_rate", "momentum", "adam_beta1", "adam_beta2",
                "adam_epsilon", "batch_size"},
               "optimizer");
    if (o.contains("kind")) {
      std::string kind = o.at("kind").get<std::string>();
      if (kind == "adam")
        c.optimizer.kind = nn::OptimizerConfig::Kind::adam;
      else if (kind == "sgd_momentum")
        c.optimizer.kind = nn::OptimizerConfig::Kind::sgd_momentum;
      else
        throw std::invalid_argument("config: unknown optimizer kind '" + kind + "'");
    }
    if (o.contains("learning_rate"))
      c.optimizer.learning_rate = o.at("learning_rate").get<double>();
    if (o.contains("momentum")) c.optimizer.momentum = o.at("momentum").get<double>();
    if (o.contains("adam_beta1"))
      c.optimizer.adam_beta1 = o.at("adam_beta1").get<double>();
    if (o.contains("adam_beta2"))
      c.optimizer.adam_beta2 = o.at("adam_beta2").get<double>();
    if (o.contains("adam_epsilon"))
      c.optimizer.adam_epsilon = o.at("adam_epsilon").get<double>();
    if (o.contains("batch_size")) c.optimizer.batch_size = o.at("batch_size").get<int>();
  }
  if (j.contains("loss")) {
    std::string loss = j.at("loss").get<std::string>();
    if (loss == "mse")
      c.loss = nn::Loss::mse;
    else if (loss == "cross_entropy")
      c.loss = nn::Loss::cross_entropy;
    else
      throw std::invalid_argument("config: unknown loss '" + loss + "'");
  }
  if (j.contains("z_max")) c.z_max = j.at("z_max").get<int>();
  if (j.contains("initial_budget"))
    c.initial_budget = j.at("initial_budget").get<double>();
  if (j.contains("compute_power"))
    c.compute_power = j.at("compute_power").get<double>();
  if (j.contains("cost")) {
    const json& t = j.at("cost");
    check_keys(t, {"e_g", "e_s", "e_e", "e_es", "c_d2d", "c_infra", "L", "R", "M", "beta"},
               "cost");
    if (t.contains("e_g")) c.cost.e_g = t.at("e_g").get<double>();
    if (t.contains("e_s")) c.cost.e_s = t.at("e_s").get<double>();
    if (t.contains("e_e")) c.cost.e_e = t.at("e_e").get<double>();
    if (t.contains("e_es")) c.cost.e_es = t.at("e_es").get<double>();
    if (t.contains("c_d2d")) c.cost.c_d2d = t.at("c_d2d").get<double>();
    if (t.contains("c_infra")) c.cost.c_infra = t.at("c_infra").get<double>();
    if (t.contains("L")) c.cost.L = t.at("L").get<long long>();
    if (t.contains("R")) c.cost.R = t.at("R").get<long long>();
    if (t.contains("M")) c.cost.M = t.at("M").get<long long>();
    if (t.contains("beta")) c.cost.beta = t.at("beta").get<double>();
  }
  if (j.contains("stopping")) {
    const json& s = j.at("stopping");
    check_keys(s, {"max_rounds", "patience", "min_improvement"}, "stopping");
    if (s.contains("max_rounds")) c.stopping.max_rounds = s.at("max_rounds").get<int>();
    if (s.contains("patience")) c.stopping.patience = s.at("patience").get<int>();
    if (s.contains("min_improvement"))
      c.stopping.min_improvement = s.at("min_improvement").get<double>();
  }
  if (j.contains("policy")) c.policy = j.at("policy").get<std::string>();
  if (j.contains("target_accuracy"))
    c.target_accuracy = j.at("target_accuracy").get<double>();
  if (j.contains("master_seed"))
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string scenario_to_json(const ScenarioConfig& cfg, int indent) {
  return scenario_to_json_value(cfg).dump(indent);
}

ScenarioConfig scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    return scenario_from_json_value(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

std::string suite_to_json(const SuiteConfig& cfg, int indent) {
  json j;
  j["scenario"] = scenario_to_json_value(cfg.scenario);
  j["schemes"] = cfg.schemes;
  j["seeds"] = cfg.seeds;
  j["confidence"] = cfg.confidence;
  j["jobs"] = cfg.jobs;
  return j.dump(indent);
}

SuiteConfig suite_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    check_keys(j, {"scenario", "schemes", "seeds", "confidence", "jobs"}, "suite");
    SuiteConfig cfg;
    if (j.contains("scenario")) cfg.scenario = scenario_from_json_value(j.at("scenario"));
    if (j.contains("schemes"))
      cfg.schemes = j.at("schemes").get<std::vector<std::string>>();
    if (j.contains("seeds"))
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("confidence")) cfg.confidence = j.at("confidence").get<double>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (cfg.schemes.empty()) throw std::invalid_argument("config: empty scheme list");
    if (cfg.seeds.empty()) throw std::invalid_argument("config: empty seed list");
    if (cfg.confidence <= 0.0 || cfg.confidence >= 1.0)
      throw std::invalid_argument("config: confidence must lie in (0, 1)");
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

SuiteConfig load_suite_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return suite_from_json(buf.str());
}

// ---------------------------------------------------------------------------
// Scheme runs

namespace {

topology::ContactSchedule build_schedule(const ScenarioConfig& cfg,
                                         std::uint64_t seed) {
  if (cfg.topology == "er")
    return topology::erdos_renyi_schedule(
        {cfg.node_count, cfg.edge_prob, cfg.slots, derive_seed(seed, "topology")});
  if (cfg.topology == "trace")
    return topology::trace_schedule(resolve_data_path(cfg.trace_path),
                                    cfg.contact_radius_m, cfg.trace_slot_length_s);
  topology::ChurnConfig ch = cfg.churn;
  ch.seed = derive_seed(seed, "topology");
  return topology::synthetic_churn_schedule(ch);
}

baselines::BaselineConfig baseline_config(const ScenarioConfig& cfg,
                                          std::uint64_t seed) {
  baselines::BaselineConfig b;
  b.model_spec = cfg.model;
  b.optimizer = cfg.optimizer;
  b.loss = cfg.loss;
  b.local_epochs = 1;
  b.cost = cfg.cost;
  b.stopping = cfg.stopping;
  b.master_seed = seed;
  return b;
}

}  // namespace

SchemeRun run_scheme(const ScenarioConfig& cfg, const std::string& scheme,
                     std::uint64_t seed) {
  cfg.validate();
  dataset::SourceDataset src = dataset::load_source(resolve_data_path(cfg.dataset));
  topology::ContactSchedule schedule = build_schedule(cfg, seed);
  dataset::PartitionConfig pcfg = cfg.partition;
  pcfg.seed = derive_seed(seed, "partition");
  std::vector<int> initial;
  if (schedule.slots() > 0) initial = schedule.present_nodes(0);
  dataset::Partition part = dataset::partition(src, initial, pcfg);

  SchemeRun out;
  out.scheme = scheme;
  out.seed = seed;

  if (scheme == "centralized" || scheme == "fedavg" || scheme == "local") {
    baselines::BaselineConfig bcfg = baseline_config(cfg, seed);
    baselines::BaselineResult res;
    if (scheme == "centralized") {
      std::vector<nn::Sample> train;
      for (const auto& l : part.locals)
        train.insert(train.end(), l.train.begin(), l.train.end());
      res = baselines::run_centralized(train, part.global_test, bcfg);
    } else if (scheme == "fedavg") {
      int clients = std::max(1, static_cast<int>(std::llround(schedule.mean_degree())));
      res = baselines::run_fedavg(part.locals, part.global_test, clients, bcfg);
    } else {
      res = baselines::run_local_only(part.locals, part.global_test, bcfg);
    }
    out.rounds = std::move(res.rounds);
    out.cutoff_round = res.cutoff_round;
    out.final_mean_acc = res.final_mean_acc;
    out.manifest_hash = dataset::manifest_hash(part.manifest);
    return out;
  }

  std::string policy_spec = scheme == "ogl" ? cfg.policy : scheme;
  std::unique_ptr<tuner::Policy> policy;
  try {
    policy = tuner::make_policy(policy_spec, cfg.z_max);
  } catch (const std::exception& e) {
    throw std::invalid_argument(
        "harness: scheme '" + scheme +
        "' is not ogl|centralized|fedavg|local or a policy spec: " + e.what());
  }

  protocol::EngineConfig ecfg;
  ecfg.model_spec = cfg.model;
  ecfg.optimizer = cfg.optimizer;
  ecfg.loss = cfg.loss;
  ecfg.z_max = cfg.z_max;
  ecfg.initial_budget = cfg.initial_budget;
  ecfg.compute_power = cfg.compute_power;
  ecfg.cost = cfg.cost;
  ecfg.stopping = cfg.stopping;
  ecfg.master_seed = seed;
  ecfg.record_messages = false;
  ecfg.record_actions = false;
  protocol::GossipEngine engine(src, part, pcfg, schedule, *policy, ecfg);
  protocol::RunResult res = engine.run();
  out.rounds = std::move(res.rounds);
  out.cutoff_round = res.cutoff_round;
  out.final_mean_acc = res.final_mean_acc;
  out.manifest_hash = res.manifest_hash;
  return out;
}

// ---------------------------------------------------------------------------
// Suite execution and reporting

namespace {

std::string sanitize_dir(const std::string& name) {
  std::string out;
  for (char ch : name)
    out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' ||
            ch == '-')
               ? ch
               : '_';
  return out.empty() ? "_" : out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_run_info(const fs::path& dir, const CellOutcome& cell,
                    const std::string& scenario_name) {
  json j;
  j["scheme"] = cell.scheme;
  j["seed"] = cell.seed;
  j["scenario"] = scenario_name;
  j["status"] = cell.ok ? "ok" : "failed";
  j["error"] = cell.error;
  j["cutoff_round"] = cell.cutoff_round;
  j["final_mean_acc"] = cell.ok ? cell.final_row.mean_acc : 0.0;
  j["manifest_hash"] = hash_hex(cell.manifest_hash);
  std::ofstream out(dir / "run_info.json", std::ios::binary);
  if (!out) throw std::runtime_error("suite: cannot write run_info.json in " + dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<CellOutcome>& cells,
                                  double confidence) {
  std::vector<std::string> order;
  for (const auto& c : cells)
    if (std::find(order.begin(), order.end(), c.scheme) == order.end())
      order.push_back(c.scheme);

  std::vector<SummaryRow> rows;
  for (const auto& scheme : order) {
    SummaryRow row;
    row.scheme = scheme;
    std::vector<double> acc, loss, f1, s, gamma, comm, objective, cutoff;
    for (const auto& c : cells) {
      if (c.scheme != scheme) continue;
      if (!c.ok) {
        ++row.failed;
        continue;
      }
      ++row.n;
      acc.push_back(c.final_row.mean_acc);
      loss.push_back(c.final_row.mean_loss);
      f1.push_back(c.final_row.macro_f1);
      s.push_back(c.final_row.s);
      gamma.push_back(c.final_row.gamma);
      comm.push_back(c.final_row.c);
      objective.push_back(c.final_row.objective);
      cutoff.push_back(static_cast<double>(c.cutoff_round));
    }
    auto fill = [&](std::span<const double> xs, double& mean, double& hw) {
      if (xs.empty()) {
        mean = std::numeric_limits<double>::quiet_NaN();
        hw = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      mean = stats::mean(xs);
      hw = stats::ci_half_width(xs, confidence);
    };
    fill(acc, row.acc_mean, row.acc_hw);
    fill(loss, row.loss_mean, row.loss_hw);
    fill(f1, row.f1_mean, row.f1_hw);
    fill(s, row.s_mean, row.s_hw);
    fill(gamma, row.gamma_mean, row.gamma_hw);
    fill(comm, row.c_mean, row.c_hw);
    fill(objective, row.objective_mean, row.objective_hw);
    fill(cutoff, row.cutoff_mean, row.cutoff_hw);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

const std::vector<std::string> kSummaryHeader = {
    "scheme",     "n",        "failed",    "acc_mean",       "acc_hw",
    "loss_mean",  "loss_hw",  "f1_mean",   "f1_hw",          "s_mean",
    "s_hw",       "gamma_mean", "gamma_hw", "c_mean",        "c_hw",
    "objective_mean", "objective_hw", "cutoff_mean", "cutoff_hw"};

}  // namespace

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  csv::Writer w(out);
  w.header(kSummaryHeader);
  for (const auto& r : rows) {
    w.cell(r.scheme).cell(r.n).cell(r.failed);
    w.cell(r.acc_mean).cell(r.acc_hw);
    w.cell(r.loss_mean).cell(r.loss_hw);
    w.cell(r.f1_mean).cell(r.f1_hw);
    w.cell(r.s_mean).cell(r.s_hw);
    w.cell(r.gamma_mean).cell(r.gamma_hw);
    w.cell(r.c_mean).cell(r.c_hw);
    w.cell(r.objective_mean).cell(r.objective_hw);
    w.cell(r.cutoff_mean).cell(r.cutoff_hw);
    w.end_row();
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  csv::Table t = csv::read_table(in);
  if (t.header != kSummaryHeader)
    throw std::runtime_error("summary csv: unexpected header");
  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::size_t r = i + 2;
    SummaryRow s;
    s.scheme = row[0];
    s.n = static_cast<int>(csv::parse_int(row[1], r, 2));
    s.failed = static_cast<int>(csv::parse_int(row[2], r, 3));
    double* fields[] = {&s.acc_mean,    &s.acc_hw,    &s.loss_mean,      &s.loss_hw,
                        &s.f1_mean,     &s.f1_hw,     &s.s_mean,         &s.s_hw,
                        &s.gamma_mean,  &s.gamma_hw,  &s.c_mean,         &s.c_hw,
                        &s.objective_mean, &s.objective_hw, &s.cutoff_mean, &s.cutoff_hw};
    for (std::size_t f = 0; f < std::size(fields); ++f)
      *fields[f] = csv::parse_double(row[f + 3], r, f + 4);
    rows.push_back(std::move(s));
  }
  return rows;
}

SuiteResult run_suite(const SuiteConfig& cfg, const std::string& out_root) {
  cfg.scenario.validate();
  if (cfg.schemes.empty()) throw std::invalid_argument("suite: empty scheme list");
  if (cfg.seeds.empty()) throw std::invalid_argument("suite: empty seed list");
  fs::create_directories(out_root);

  struct Cell {
    std::string scheme;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& scheme : cfg.schemes)
    for (std::uint64_t seed : cfg.seeds) cells.push_back({scheme, seed});

  SuiteResult result;
  result.cells.resize(cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      CellOutcome& out = result.cells[i];
      out.scheme = cell.scheme;
      out.seed = cell.seed;
      fs::path dir = fs::path(out_root) / sanitize_dir(cell.scheme) /
                     ("seed-" + std::to_string(cell.seed));
      fs::create_directories(dir);
      out.dir = fs::relative(dir, out_root).string();
      try {
        SchemeRun run = run_scheme(cfg.scenario, cell.scheme, cell.seed);
        if (run.rounds.empty())
          throw std::runtime_error("run produced no rounds");
        std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
        if (!metrics)
          throw std::runtime_error("cannot write metrics.csv in " + dir.string());
        protocol::write_metrics_csv(run.rounds, metrics, cell.scheme);
        out.ok = true;
        out.final_row = run.rounds.back();
        out.cutoff_round = run.cutoff_round;
        out.manifest_hash = run.manifest_hash;
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
      write_run_info(dir, out, cfg.scenario.name);
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  std::size_t jobs = cfg.jobs > 0 ? static_cast<std::size_t>(cfg.jobs)
                                  : std::max<std::size_t>(1, hw);
  jobs = std::min(jobs, cells.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  result.summary = summarize(result.cells, cfg.confidence);
  std::ofstream sum(fs::path(out_root) / "summary.csv", std::ios::binary);
  if (!sum) throw std::runtime_error("suite: cannot write summary.csv");
  write_summary_csv(result.summary, sum);
  return result;
}

std::vector<SummaryRow> report_directory(const std::string& root, double confidence) {
  if (!fs::is_directory(root))
    throw std::invalid_argument("report: '" + root + "' is not a directory");
  std::vector<CellOutcome> cells;
  for (const auto& scheme_dir : fs::directory_iterator(root)) {
    if (!scheme_dir.is_directory()) continue;
    for (const auto& seed_dir : fs::directory_iterator(scheme_dir.path())) {
      if (!seed_dir.is_directory()) continue;
      fs::path info_path = seed_dir.path() / "run_info.json";
      if (!fs::exists(info_path)) continue;
      std::ifstream in(info_path, std::ios::binary);
      json info;
      try {
        in >> info;
      } catch (const json::exception& e) {
        throw std::runtime_error("report: bad run_info.json at " + info_path.string() +
                                 ": " + e.what());
      }
      CellOutcome cell;
      cell.scheme = info.value("scheme", scheme_dir.path().filename().string());
      cell.seed = info.value("seed", std::uint64_t{0});
      cell.ok = info.value("status", "failed") == "ok";
      cell.error = info.value("error", "");
      cell.cutoff_round = info.value("cutoff_round", 0);
      cell.dir = fs::relative(seed_dir.path(), root).string();
      if (cell.ok) {
        std::ifstream metrics(seed_dir.path() / "metrics.csv", std::ios::binary);
        if (!metrics)
          throw std::runtime_error("report: missing metrics.csv in " +
                                   seed_dir.path().string());
        std::vector<protocol::RoundMetrics> rounds = protocol::read_metrics_csv(metrics);
        if (rounds.empty())
          throw std::runtime_error("report: empty metrics.csv in " +
                                   seed_dir.path().string());
        cell.final_row = rounds.back();
      }
      cells.push_back(std::move(cell));
    }
  }
  std::sort(cells.begin(), cells.end(), [](const CellOutcome& a, const CellOutcome& b) {
    return std::tie(a.scheme, a.seed) < std::tie(b.scheme, b.seed);
  });
  return summarize(cells, confidence);
}

}  // namespace ogl::harness
