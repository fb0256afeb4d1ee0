#include "ogl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ogl/csv.hpp"

namespace ogl::dataset {

namespace {

struct KvArgs {
  std::vector<std::pair<std::string, std::string>> items;

  long long get(const std::string& key, long long fallback) const {
    for (const auto& [k, v] : items) {
      if (k == key) return csv::parse_int(v, 0, 0);
    }
    return fallback;
  }
};

KvArgs parse_kv(const std::string& body, const std::vector<std::string>& allowed) {
  KvArgs args;
  if (body.empty()) return args;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("dataset: expected key=value, got '" + item + "'");
    }
    std::string key = item.substr(0, eq);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("dataset: unknown option '" + key + "'");
    }
    args.items.emplace_back(key, item.substr(eq + 1));
  }
  return args;
}

SourceDataset make_blobs(const std::string& body) {
  KvArgs args = parse_kv(body, {"n", "classes", "dim", "seed"});
  int n = static_cast<int>(args.get("n", 1000));
  int classes = static_cast<int>(args.get("classes", 2));
  int dim = static_cast<int>(args.get("dim", 8));
  auto seed = static_cast<std::uint64_t>(args.get("seed", 0));
  if (n <= 0 || classes <= 1 || dim <= 0) {
    throw std::invalid_argument("dataset: blobs needs n>0, classes>1, dim>0");
  }

  Rng rng(seed);
  std::vector<std::vector<double>> centers(static_cast<std::size_t>(classes));
  for (auto& c : centers) {
    c.resize(static_cast<std::size_t>(dim));
    for (auto& v : c) v = rng.uniform(0.2, 0.8);
  }

  SourceDataset src;
  src.num_classes = classes;
  src.feature_dim = dim;
  src.name = "blobs";
  for (int i = 0; i < n; ++i) {
    int label = i % classes;
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
      double v = centers[static_cast<std::size_t>(label)][static_cast<std::size_t>(d)] +
                 0.08 * rng.normal();
      x[static_cast<std::size_t>(d)] = std::clamp(v, 0.0, 1.0);
    }
    src.samples.push_back(nn::one_hot_sample(std::move(x), label, classes));
  }
  return src;
}

SourceDataset load_csv(const std::string& path) {
  csv::Table t = csv::read_table_file(path);
  if (t.header.empty() || t.header[0] != "label") {
    throw std::runtime_error("dataset: " + path + " must start with a 'label' column");
  }
  int dim = static_cast<int>(t.header.size()) - 1;
  if (dim < 1) throw std::runtime_error("dataset: " + path + " has no feature columns");

  std::vector<int> labels;
  std::vector<std::vector<double>> features;
  int max_label = -1;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::size_t file_row = i + 2;  // header is row 1
    long long label = csv::parse_int(t.rows[i][0], file_row, 1);
    if (label < 0) {
      throw std::runtime_error("dataset: negative label at row " + std::to_string(file_row));
    }
    labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int c = 0; c < dim; ++c) {
      x[static_cast<std::size_t>(c)] =
          csv::parse_double(t.rows[i][static_cast<std::size_t>(c + 1)], file_row,
                            static_cast<std::size_t>(c + 2));
    }
    features.push_back(std::move(x));
  }
  if (features.empty()) throw std::runtime_error("dataset: " + path + " has no rows");

  // Min-max per feature column.
  std::vector<double> lo(static_cast<std::size_t>(dim), std::numeric_limits<double>::max());
  std::vector<double> hi(static_cast<std::size_t>(dim), std::numeric_limits<double>::lowest());
  for (const auto& x : features) {
    for (int c = 0; c < dim; ++c) {
      lo[static_cast<std::size_t>(c)] = std::min(lo[static_cast<std::size_t>(c)], x[static_cast<std::size_t>(c)]);
      hi[static_cast<std::size_t>(c)] = std::max(hi[static_cast<std::size_t>(c)], x[static_cast<std::size_t>(c)]);
    }
  }

  SourceDataset src;
  src.num_classes = max_label + 1;
  src.feature_dim = dim;
  src.name = path;
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& x = features[i];
    for (int c = 0; c < dim; ++c) {
      double span = hi[static_cast<std::size_t>(c)] - lo[static_cast<std::size_t>(c)];
      x[static_cast<std::size_t>(c)] =
          span > 0 ? (x[static_cast<std::size_t>(c)] - lo[static_cast<std::size_t>(c)]) / span : 0.0;
    }
    src.samples.push_back(nn::one_hot_sample(std::move(x), labels[i], src.num_classes));
  }
  return src;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("dataset: truncated IDX file " + path);
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

SourceDataset load_idx(const std::string& body) {
  auto comma = body.find(',');
  if (comma == std::string::npos) {
    throw std::invalid_argument("dataset: idx needs 'idx:<images>,<labels>'");
  }
  std::string images_path = body.substr(0, comma);
  std::string labels_path = body.substr(comma + 1);

  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("dataset: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("dataset: cannot open " + labels_path);

  if (read_be32(img, images_path) != 2051) {
    throw std::runtime_error("dataset: bad IDX image magic in " + images_path);
  }
  if (read_be32(lab, labels_path) != 2049) {
    throw std::runtime_error("dataset: bad IDX label magic in " + labels_path);
  }
  std::uint32_t n = read_be32(img, images_path);
  std::uint32_t rows = read_be32(img, images_path);
  std::uint32_t cols = read_be32(img, images_path);
  std::uint32_t n_labels = read_be32(lab, labels_path);
  if (n != n_labels) {
    throw std::runtime_error("dataset: IDX image/label counts differ (" + std::to_string(n) +
                             " vs " + std::to_string(n_labels) + ")");
  }
  std::size_t dim = static_cast<std::size_t>(rows) * cols;
  if (dim == 0 || n == 0) throw std::runtime_error("dataset: empty IDX pair");

  std::vector<unsigned char> pixels(dim);
  std::vector<int> labels(n);
  std::vector<std::vector<double>> features;
  features.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim))) {
      throw std::runtime_error("dataset: truncated IDX file " + images_path);
    }
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = pixels[j] / 255.0;
    features.push_back(std::move(x));
  }
  int max_label = -1;
  for (std::uint32_t i = 0; i < n; ++i) {
    char c;
    if (!lab.read(&c, 1)) {
      throw std::runtime_error("dataset: truncated IDX file " + labels_path);
    }
    labels[i] = static_cast<unsigned char>(c);
    max_label = std::max(max_label, labels[i]);
  }

  SourceDataset src;
  src.num_classes = max_label + 1;
  src.feature_dim = static_cast<int>(dim);
  src.name = images_path;
  for (std::uint32_t i = 0; i < n; ++i) {
    src.samples.push_back(nn::one_hot_sample(std::move(features[i]), labels[i], src.num_classes));
  }
  return src;
}

/// Largest-remainder rescale of drawn sizes to sum to `target`, keeping every
/// size inside [lo, hi].
std::vector<int> rescale_sizes(const std::vector<int>& drawn, int target, int lo, int hi) {
  int n = static_cast<int>(drawn.size());
  long long total = 0;
  for (int v : drawn) total += v;
  if (total == target) return drawn;

  std::vector<int> out(drawn.size());
  std::vector<std::pair<double, int>> remainders;  // (-fraction, index) for stable sort
  long long base_sum = 0;
  for (int i = 0; i < n; ++i) {
    double scaled = static_cast<double>(drawn[static_cast<std::size_t>(i)]) * target /
                    static_cast<double>(total);
    int base = static_cast<int>(std::floor(scaled));
    out[static_cast<std::size_t>(i)] = base;
    base_sum += base;
    remainders.emplace_back(-(scaled - base), i);
  }
  std::sort(remainders.begin(), remainders.end());
  long long leftover = target - base_sum;
  for (long long i = 0; i < leftover && i < n; ++i) {
    out[static_cast<std::size_t>(remainders[static_cast<std::size_t>(i)].second)] += 1;
  }

  for (auto& v : out) v = std::clamp(v, lo, hi);
  long long sum = 0;
  for (int v : out) sum += v;
  // Clamping can knock the total off; push it back one step at a time.
  while (sum != target) {
    bool moved = false;
    if (sum > target) {
      auto it = std::max_element(out.begin(), out.end());
      if (*it > lo) {
        --*it;
        --sum;
        moved = true;
      }
    } else {
      auto it = std::min_element(out.begin(), out.end());
      if (*it < hi) {
        ++*it;
        ++sum;
        moved = true;
      }
    }
    if (!moved) throw std::invalid_argument("dataset: per-node bounds cannot reach global_size");
  }
  return out;
}

void split_local(LocalDataset& local, const SourceDataset& src,
                 const std::vector<std::size_t>& indices, double validation_fraction) {
  int size = static_cast<int>(indices.size());
  int s_v = static_cast<int>(std::llround(validation_fraction * size));
  s_v = std::clamp(s_v, 0, size);
  if (size >= 2 && s_v == size) s_v = size - 1;  // keep at least one training sample
  int d_v = size - s_v;
  for (int i = 0; i < d_v; ++i) {
    local.train.push_back(src.samples[indices[static_cast<std::size_t>(i)]]);
  }
  for (int i = d_v; i < size; ++i) {
    local.validation.push_back(src.samples[indices[static_cast<std::size_t>(i)]]);
  }
}

void append_manifest(std::vector<ManifestRow>& manifest, int node,
                     const std::vector<std::size_t>& indices, int train_count) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    manifest.push_back({node, static_cast<long long>(indices[i]),
                        static_cast<int>(i) < train_count ? "train" : "validation"});
  }
}

}  // namespace

std::vector<int> label_histogram(const SourceDataset& src) {
  std::vector<int> hist(static_cast<std::size_t>(src.num_classes), 0);
  for (const auto& s : src.samples) {
    hist[static_cast<std::size_t>(s.label)]++;
  }
  return hist;
}

SourceDataset load_source(const std::string& path_or_builtin) {
  if (path_or_builtin.rfind("blobs:", 0) == 0) {
    return make_blobs(path_or_builtin.substr(6));
  }
  if (path_or_builtin.rfind("idx:", 0) == 0) {
    return load_idx(path_or_builtin.substr(4));
  }
  if (path_or_builtin.size() > 4 &&
      path_or_builtin.compare(path_or_builtin.size() - 4, 4, ".csv") == 0) {
    return load_csv(path_or_builtin);
  }
  throw std::invalid_argument("dataset: unsupported source '" + path_or_builtin +
                              "' (expected blobs:..., idx:..., or a .csv path)");
}

Partition partition(const SourceDataset& src, const std::vector<int>& node_ids,
                    const PartitionConfig& cfg) {
  if (cfg.validation_fraction <= 0.0 || cfg.validation_fraction >= 1.0) {
    throw std::invalid_argument("dataset: validation_fraction must be in (0,1)");
  }
  if (cfg.test_fraction < 0.0 || cfg.test_fraction >= 1.0) {
    throw std::invalid_argument("dataset: test_fraction must be in [0,1)");
  }
  if (cfg.per_node_min < 1 || cfg.per_node_max < cfg.per_node_min) {
    throw std::invalid_argument("dataset: bad per-node size bounds");
  }

  std::size_t n_src = src.samples.size();
  auto test_count = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(n_src)));

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n_src);
  for (std::size_t i = 0; i < n_src; ++i) order[i] = i;
  rng.shuffle(order);

  Partition part;
  for (std::size_t i = 0; i < test_count; ++i) {
    part.global_test.push_back(src.samples[order[i]]);
    part.manifest.push_back({-1, static_cast<long long>(order[i]), "test"});
  }

  std::vector<int> sizes;
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    sizes.push_back(static_cast<int>(rng.uniform_int_range(cfg.per_node_min, cfg.per_node_max)));
  }
  if (cfg.global_size > 0 && !node_ids.empty()) {
    long long lo = static_cast<long long>(node_ids.size()) * cfg.per_node_min;
    long long hi = static_cast<long long>(node_ids.size()) * cfg.per_node_max;
    if (cfg.global_size < lo || cfg.global_size > hi) {
      throw std::invalid_argument("dataset: global_size outside feasible per-node bounds");
    }
    sizes = rescale_sizes(sizes, cfg.global_size, cfg.per_node_min, cfg.per_node_max);
  }

  long long needed = 0;
  for (int s : sizes) needed += s;
  if (static_cast<std::size_t>(needed) + test_count > n_src) {
    throw std::invalid_argument("dataset: source too small for requested partition");
  }

  std::size_t cursor = test_count;
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    auto take = static_cast<std::size_t>(sizes[i]);
    std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                     order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
    cursor += take;

    LocalDataset local;
    local.node = node_ids[i];
    split_local(local, src, indices, cfg.validation_fraction);
    append_manifest(part.manifest, node_ids[i], indices, static_cast<int>(local.train.size()));
    part.locals.push_back(std::move(local));
  }

  part.reserve.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor), order.end());
  return part;
}

LocalDataset draw_from_reserve(Partition& part, const SourceDataset& src, int node_id,
                               const PartitionConfig& cfg, Rng& rng) {
  auto size = static_cast<std::size_t>(rng.uniform_int_range(cfg.per_node_min, cfg.per_node_max));
  if (part.reserve.size() < size) {
    throw std::runtime_error("dataset: reserve pool exhausted (need " + std::to_string(size) +
                             ", have " + std::to_string(part.reserve.size()) + ")");
  }
  std::vector<std::size_t> indices(part.reserve.end() - static_cast<std::ptrdiff_t>(size),
                                   part.reserve.end());
  part.reserve.resize(part.reserve.size() - size);

  LocalDataset local;
  local.node = node_id;
  split_local(local, src, indices, cfg.validation_fraction);
  append_manifest(part.manifest, node_id, indices, static_cast<int>(local.train.size()));
  return local;
}

void write_manifest_csv(const std::vector<ManifestRow>& manifest, std::ostream& out) {
  csv::Writer w(out);
  w.header({"node_id", "sample_index", "role"});
  for (const auto& row : manifest) {
    w.cell(row.node_id).cell(row.sample_index).cell(row.role);
    w.end_row();
  }
}

std::uint64_t manifest_hash(const std::vector<ManifestRow>& manifest) {
  std::ostringstream text;
  write_manifest_csv(manifest, text);
  return fnv1a64(text.str());
}

}  // namespace ogl::dataset
