#include "ogl/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "ogl/model_io.hpp"

namespace ogl::tuner {

std::vector<double> TunerFeatures::to_vector() const {
  return {h,        d,
          s,        own_loss,
          min_neighbor_loss, mean_neighbor_loss,
          cum_cost, budget_remaining,
          compute_power,     slot_fraction};
}

TunerFeatures make_features(int h, int d, int s, double own_loss,
                            std::span<const double> neighbor_losses, double cum_cost,
                            double budget_remaining, double compute_power,
                            double slot_fraction) {
  TunerFeatures f;
  f.h = h;
  f.d = d;
  f.s = s;
  f.own_loss = own_loss;
  f.cum_cost = cum_cost;
  f.budget_remaining = budget_remaining;
  f.compute_power = compute_power;
  f.slot_fraction = slot_fraction;
  if (neighbor_losses.empty()) {
    f.min_neighbor_loss = own_loss;
    f.mean_neighbor_loss = own_loss;
  } else {
    double min = neighbor_losses[0], sum = 0.0;
    for (double l : neighbor_losses) {
      min = std::min(min, l);
      sum += l;
    }
    f.min_neighbor_loss = min;
    f.mean_neighbor_loss = sum / static_cast<double>(neighbor_losses.size());
  }
  return f;
}

std::vector<int> TunerDecision::resolve(std::span<const NeighborLoss> advertised) const {
  std::vector<int> out;
  switch (selection) {
    case Selection::explicit_set:
      for (const auto& n : advertised) {
        if (std::find(selected.begin(), selected.end(), n.node) != selected.end()) {
          out.push_back(n.node);
        }
      }
      break;
    case Selection::threshold:
      for (const auto& n : advertised) {
        if (n.loss <= threshold) out.push_back(n.node);
      }
      break;
    case Selection::lowest_k: {
      std::vector<NeighborLoss> sorted(advertised.begin(), advertised.end());
      std::sort(sorted.begin(), sorted.end(), [](const NeighborLoss& a, const NeighborLoss& b) {
        return a.loss != b.loss ? a.loss < b.loss : a.node < b.node;
      });
      auto take = std::min<std::size_t>(sorted.size(),
                                        static_cast<std::size_t>(std::max(lowest_k, 0)));
      for (std::size_t i = 0; i < take; ++i) out.push_back(sorted[i].node);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> Scaler::apply(std::span<const double> x) const {
  if (x.size() != mean.size() || x.size() != std_dev.size()) {
    throw std::invalid_argument("tuner: scaler dimension mismatch");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sd = std_dev[i] > 0.0 ? std_dev[i] : 1.0;
    out[i] = (x[i] - mean[i]) / sd;
  }
  return out;
}

TunerDecision random_policy(const std::vector<int>& neighbors, int z_max, Rng& rng) {
  if (z_max < 0) throw std::invalid_argument("tuner: z_max must be nonnegative");
  TunerDecision d;
  d.epochs = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(z_max) + 1));
  d.selection = TunerDecision::Selection::explicit_set;
  for (int n : neighbors) {
    if (rng.bernoulli(0.5)) d.selected.push_back(n);
  }
  return d;
}

TunerDecision dp_policy(const std::vector<int>& neighbors) {
  TunerDecision d;
  d.epochs = 1;
  d.selection = TunerDecision::Selection::explicit_set;
  d.selected = neighbors;
  return d;
}

TunerDecision mtune_policy(const MtuneModel& m, const TunerFeatures& f, int z_max) {
  if (m.net.input_dim() != kFeatureDim) {
    throw std::invalid_argument("tuner: model input dim " + std::to_string(m.net.input_dim()) +
                                ", expected " + std::to_string(kFeatureDim));
  }
  if (m.net.output_dim() != 2) {
    throw std::invalid_argument("tuner: model must have two outputs");
  }
  std::vector<double> out = nn::forward(m.net, m.scaler.apply(f.to_vector()));
  if (!std::isfinite(out[0]) || !std::isfinite(out[1])) {
    std::cerr << "tuner: non-finite model output, falling back to dp policy\n";
    TunerDecision d;
    d.epochs = 1;
    d.selection = TunerDecision::Selection::threshold;
    d.threshold = std::numeric_limits<double>::infinity();
    return d;
  }
  TunerDecision d;
  d.epochs = std::clamp(static_cast<int>(std::llround(out[0])), 0, z_max);
  d.selection = TunerDecision::Selection::threshold;
  d.threshold = out[1];
  return d;
}

namespace {

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(int z_max) : z_max_(z_max) { spec_ = "random"; }
  TunerDecision decide(const TunerFeatures&, const std::vector<int>& neighbors,
                       Rng& rng) const override {
    return random_policy(neighbors, z_max_, rng);
  }

 private:
  int z_max_;
};

class DpPolicy : public Policy {
 public:
  DpPolicy() { spec_ = "dp"; }
  TunerDecision decide(const TunerFeatures&, const std::vector<int>& neighbors,
                       Rng&) const override {
    return dp_policy(neighbors);
  }
};

class MtunePolicy : public Policy {
 public:
  MtunePolicy(MtuneModel model, int z_max, std::string spec)
      : model_(std::move(model)), z_max_(z_max) {
    spec_ = std::move(spec);
  }
  TunerDecision decide(const TunerFeatures& features, const std::vector<int>&,
                       Rng&) const override {
    return mtune_policy(model_, features, z_max_);
  }
  const MtuneModel& model() const { return model_; }
  long long dissemination_bytes() const override { return model_.serialized_bytes; }

 private:
  MtuneModel model_;
  int z_max_;
};

class FixedPolicy : public Policy {
 public:
  FixedPolicy(int z, int k, std::string spec) : z_(z), k_(k) { spec_ = std::move(spec); }
  TunerDecision decide(const TunerFeatures&, const std::vector<int>&, Rng&) const override {
    TunerDecision d;
    d.epochs = z_;
    d.selection = TunerDecision::Selection::lowest_k;
    d.lowest_k = k_;
    return d;
  }

 private:
  int z_, k_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const std::string& spec, int z_max) {
  if (spec == "random") return std::make_unique<RandomPolicy>(z_max);
  if (spec == "dp") return std::make_unique<DpPolicy>();
  if (spec.rfind("mtune:", 0) == 0) {
    std::string path = spec.substr(6);
    if (path.empty()) throw std::invalid_argument("tuner: mtune policy needs a model file");
    return std::make_unique<MtunePolicy>(model_io::load_mtune(path), z_max, spec);
  }
  if (spec.rfind("fixed:", 0) == 0) {
    std::string body = spec.substr(6);
    auto comma = body.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("tuner: fixed policy needs 'fixed:<Z>,<k>'");
    }
    int z, k;
    try {
      z = std::stoi(body.substr(0, comma));
      k = std::stoi(body.substr(comma + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("tuner: fixed policy needs integer Z and k");
    }
    if (z < 0 || k < 0) throw std::invalid_argument("tuner: fixed Z and k must be nonnegative");
    return std::make_unique<FixedPolicy>(z, k, spec);
  }
  throw std::invalid_argument("tuner: unknown policy '" + spec +
                              "' (expected random, dp, mtune:<file>, or fixed:<Z>,<k>)");
}

}  // namespace ogl::tuner
