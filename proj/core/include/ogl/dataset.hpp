#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ogl/nn.hpp"
#include "ogl/rng.hpp"

namespace ogl::dataset {

struct SourceDataset {
  std::vector<nn::Sample> samples;  // one-hot targets, label set
  int num_classes = 0;
  int feature_dim = 0;
  std::string name;
};

std::vector<int> label_histogram(const SourceDataset& src);

/// Loads a source dataset. Accepted forms:
///   "blobs:n=1000,classes=2,dim=8,seed=7"  seeded Gaussian blobs
///   "<path>.csv"                           header `label,f1,f2,...`
///   "idx:<images-file>,<labels-file>"      IDX image/label pair
/// Features are normalized to [0,1] (CSV columns min-max, IDX pixels /255,
/// blobs clamped at generation).
SourceDataset load_source(const std::string& path_or_builtin);

struct LocalDataset {
  int node = -1;
  std::vector<nn::Sample> train;       // D_v
  std::vector<nn::Sample> validation;  // S_v
};

struct PartitionConfig {
  int global_size = 700;  // 0 keeps the drawn per-node sizes unscaled
  int per_node_min = 50;
  int per_node_max = 350;
  double validation_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// role: train | validation | test; test rows carry node_id -1.
struct ManifestRow {
  int node_id = -1;
  long long sample_index = -1;
  std::string role;
};

struct Partition {
  std::vector<LocalDataset> locals;
  std::vector<nn::Sample> global_test;
  std::vector<std::size_t> reserve;  // source indices left for churn arrivals
  std::vector<ManifestRow> manifest;
};

/// Without-replacement split: test set first, then per-node sizes drawn
/// uniformly in [min,max] and rescaled (largest remainder, bounds kept) so
/// local totals sum to exactly global_size; each local set then splits off
/// validation_fraction. Unassigned samples form the reserve pool.
Partition partition(const SourceDataset& src, const std::vector<int>& node_ids,
                    const PartitionConfig& cfg);

/// Assigns a reserve-backed local dataset to a node arriving mid-run. Size is
/// drawn uniformly in [min,max]; throws std::runtime_error when the reserve
/// cannot cover it. Appends to the partition's manifest.
LocalDataset draw_from_reserve(Partition& part, const SourceDataset& src, int node_id,
                               const PartitionConfig& cfg, Rng& rng);

std::uint64_t manifest_hash(const std::vector<ManifestRow>& manifest);
void write_manifest_csv(const std::vector<ManifestRow>& manifest, std::ostream& out);

}  // namespace ogl::dataset
