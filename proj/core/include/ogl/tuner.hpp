#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ogl/nn.hpp"
#include "ogl/rng.hpp"

namespace ogl::tuner {

inline constexpr int kFeatureDim = 10;

/// Per-node per-slot decision inputs, in serialization order:
/// [h, d, s, own_loss, min_nbr_loss, mean_nbr_loss, cum_cost,
///  budget_remaining, compute_power, slot_fraction].
struct TunerFeatures {
  double h = 0.0;
  double d = 0.0;
  double s = 0.0;
  double own_loss = 0.0;
  double min_neighbor_loss = 0.0;
  double mean_neighbor_loss = 0.0;
  double cum_cost = 0.0;
  double budget_remaining = 0.0;
  double compute_power = 1.0;
  double slot_fraction = 0.0;

  std::vector<double> to_vector() const;
};

/// Builds the feature vector; with no neighbors the neighbor-loss stats
/// default to the node's own loss.
TunerFeatures make_features(int h, int d, int s, double own_loss,
                            std::span<const double> neighbor_losses, double cum_cost,
                            double budget_remaining, double compute_power,
                            double slot_fraction);

struct NeighborLoss {
  int node = -1;
  double loss = 0.0;
};

/// A (Z, K) decision. K is deferred: the selection rule is resolved against
/// the losses advertised in the same slot, so merges never see stale values.
struct TunerDecision {
  enum class Selection { explicit_set, threshold, lowest_k };

  int epochs = 0;
  Selection selection = Selection::explicit_set;
  std::vector<int> selected;  // explicit_set
  double threshold = 0.0;     // threshold
  int lowest_k = 0;           // lowest_k

  /// Applies the rule to the advertised losses; returns sorted node ids,
  /// always a subset of the given neighbors.
  std::vector<int> resolve(std::span<const NeighborLoss> advertised) const;
};

/// Per-feature standardization travelling with a serialized tuner model.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std_dev;  // zero entries are treated as 1

  std::vector<double> apply(std::span<const double> x) const;
};

struct MtuneModel {
  nn::DenseNetwork net;
  Scaler scaler;
  long long serialized_bytes = 0;  // file size as exported, for infra charging
};

/// Z uniform in {0..z_max}; each neighbor joins K with probability 1/2.
TunerDecision random_policy(const std::vector<int>& neighbors, int z_max, Rng& rng);

/// Z = 1, K = all neighbors, regardless of losses.
TunerDecision dp_policy(const std::vector<int>& neighbors);

/// Standardizes the features, runs the model, and decodes the two outputs as
/// Z = clamp(round(z_raw), 0, z_max) and a loss threshold for K. Non-finite
/// outputs fall back to dp_policy behavior with a warning on stderr.
TunerDecision mtune_policy(const MtuneModel& m, const TunerFeatures& f, int z_max);

/// Policy handle resolved from a spec string:
///   random | dp | mtune:<model-file> | fixed:<Z>,<k>
class Policy {
 public:
  virtual ~Policy() = default;
  virtual TunerDecision decide(const TunerFeatures& features,
                               const std::vector<int>& neighbors, Rng& rng) const = 0;
  virtual const std::string& spec() const { return spec_; }

  /// Bytes a newly arriving node must download to run this policy (the
  /// serialized tuner model); zero for the model-free policies.
  virtual long long dissemination_bytes() const { return 0; }

 protected:
  std::string spec_;
};

std::unique_ptr<Policy> make_policy(const std::string& spec, int z_max);

}  // namespace ogl::tuner
