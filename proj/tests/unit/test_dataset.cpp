#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ogl/dataset.hpp"
#include "ogl/rng.hpp"

namespace ds = ogl::dataset;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  return path;
}

void write_be32(std::ofstream& f, std::uint32_t v) {
  char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
               static_cast<char>(v >> 8), static_cast<char>(v)};
  f.write(b, 4);
}

}  // namespace

TEST_CASE("dataset: blobs generator honors its parameters") {
  ds::SourceDataset src = ds::load_source("blobs:n=1000,classes=2,dim=8,seed=7");
  CHECK(src.samples.size() == 1000);
  CHECK(src.num_classes == 2);
  CHECK(src.feature_dim == 8);
  for (const auto& s : src.samples) {
    REQUIRE(s.x.size() == 8);
    CHECK(s.label >= 0);
    CHECK(s.label < 2);
    for (double v : s.x) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  auto hist = ds::label_histogram(src);
  CHECK(hist[0] == 500);
  CHECK(hist[1] == 500);

  ds::SourceDataset again = ds::load_source("blobs:n=1000,classes=2,dim=8,seed=7");
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(src.samples[i].x == again.samples[i].x);
  }

  CHECK_THROWS_AS(ds::load_source("blobs:n=10,bogus=1"), std::invalid_argument);
  CHECK_THROWS_AS(ds::load_source("blobs:n=0"), std::invalid_argument);
  CHECK_THROWS_AS(ds::load_source("nosuchformat"), std::invalid_argument);
}

TEST_CASE("dataset: csv loader normalizes features and validates cells") {
  auto path = temp_file("ogl_test_ds.csv",
                        "label,f1,f2\n"
                        "0,0,10\n"
                        "1,5,20\n"
                        "2,10,40\n");
  ds::SourceDataset src = ds::load_source(path.string());
  CHECK(src.num_classes == 3);
  CHECK(src.feature_dim == 2);
  REQUIRE(src.samples.size() == 3);
  CHECK(src.samples[0].x == std::vector<double>{0.0, 0.0});
  CHECK(src.samples[1].x == std::vector<double>{0.5, 1.0 / 3.0});
  CHECK(src.samples[2].x == std::vector<double>{1.0, 1.0});
  CHECK(src.samples[2].label == 2);

  auto bad = temp_file("ogl_test_bad.csv", "label,f1\n0,1\n1,oops\n");
  try {
    ds::load_source(bad.string());
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }

  auto neg = temp_file("ogl_test_neg.csv", "label,f1\n-1,1\n");
  CHECK_THROWS_AS(ds::load_source(neg.string()), std::runtime_error);
  auto nohdr = temp_file("ogl_test_nohdr.csv", "x,f1\n0,1\n");
  CHECK_THROWS_AS(ds::load_source(nohdr.string()), std::runtime_error);
}

TEST_CASE("dataset: idx loader round-trips a synthetic pair") {
  auto dir = std::filesystem::temp_directory_path();
  auto img_path = dir / "ogl_test_images.idx";
  auto lab_path = dir / "ogl_test_labels.idx";
  {
    std::ofstream img(img_path, std::ios::binary);
    write_be32(img, 2051);
    write_be32(img, 3);  // count
    write_be32(img, 2);  // rows
    write_be32(img, 2);  // cols
    const unsigned char pixels[12] = {0, 255, 128, 64, 10, 20, 30, 40, 5, 5, 5, 5};
    img.write(reinterpret_cast<const char*>(pixels), 12);
  }
  {
    std::ofstream lab(lab_path, std::ios::binary);
    write_be32(lab, 2049);
    write_be32(lab, 3);
    const unsigned char labels[3] = {1, 0, 2};
    lab.write(reinterpret_cast<const char*>(labels), 3);
  }

  ds::SourceDataset src = ds::load_source("idx:" + img_path.string() + "," + lab_path.string());
  CHECK(src.samples.size() == 3);
  CHECK(src.feature_dim == 4);
  CHECK(src.num_classes == 3);
  CHECK(src.samples[0].x[0] == 0.0);
  CHECK(src.samples[0].x[1] == 1.0);
  CHECK(src.samples[0].x[2] == doctest::Approx(128.0 / 255.0));
  CHECK(src.samples[0].label == 1);
  CHECK(src.samples[2].label == 2);

  // Wrong magic.
  auto bad_path = dir / "ogl_test_badmagic.idx";
  {
    std::ofstream bad(bad_path, std::ios::binary);
    write_be32(bad, 1234);
    write_be32(bad, 3);
  }
  CHECK_THROWS_AS(ds::load_source("idx:" + bad_path.string() + "," + lab_path.string()),
                  std::runtime_error);

  // Count mismatch.
  auto short_lab = dir / "ogl_test_shortlab.idx";
  {
    std::ofstream lab(short_lab, std::ios::binary);
    write_be32(lab, 2049);
    write_be32(lab, 2);
    const unsigned char labels[2] = {0, 1};
    lab.write(reinterpret_cast<const char*>(labels), 2);
  }
  CHECK_THROWS_AS(ds::load_source("idx:" + img_path.string() + "," + short_lab.string()),
                  std::runtime_error);

  // Truncated pixel payload.
  auto trunc = dir / "ogl_test_trunc.idx";
  {
    std::ofstream img(trunc, std::ios::binary);
    write_be32(img, 2051);
    write_be32(img, 3);
    write_be32(img, 2);
    write_be32(img, 2);
    const unsigned char pixels[5] = {1, 2, 3, 4, 5};
    img.write(reinterpret_cast<const char*>(pixels), 5);
  }
  CHECK_THROWS_AS(ds::load_source("idx:" + trunc.string() + "," + lab_path.string()),
                  std::runtime_error);
}

TEST_CASE("dataset: partition hits the exact global size within bounds") {
  ds::SourceDataset src = ds::load_source("blobs:n=2000,classes=4,dim=6,seed=3");
  ds::PartitionConfig cfg;
  cfg.global_size = 700;
  cfg.per_node_min = 50;
  cfg.per_node_max = 350;
  cfg.test_fraction = 0.2;
  cfg.seed = 11;
  std::vector<int> nodes = {0, 1, 2, 3, 4, 5};

  ds::Partition part = ds::partition(src, nodes, cfg);
  CHECK(part.global_test.size() == 400);  // 0.2 * 2000
  REQUIRE(part.locals.size() == 6);

  long long total = 0;
  for (const auto& local : part.locals) {
    auto size = static_cast<long long>(local.train.size() + local.validation.size());
    CHECK(size >= 50);
    CHECK(size <= 350);
    CHECK(!local.validation.empty());
    total += size;
  }
  CHECK(total == 700);
  CHECK(part.reserve.size() == 2000 - 400 - 700);

  // No source index is used twice anywhere.
  std::set<long long> seen;
  for (const auto& row : part.manifest) {
    CHECK(seen.insert(row.sample_index).second);
  }
  CHECK(seen.size() == 400 + 700);

  ds::Partition again = ds::partition(src, nodes, cfg);
  CHECK(ds::manifest_hash(part.manifest) == ds::manifest_hash(again.manifest));
  cfg.seed = 12;
  ds::Partition other = ds::partition(src, nodes, cfg);
  CHECK(ds::manifest_hash(part.manifest) != ds::manifest_hash(other.manifest));
}

TEST_CASE("dataset: partition bounds and totals hold across a seed sweep") {
  ds::SourceDataset src = ds::load_source("blobs:n=1500,classes=3,dim=4,seed=9");
  std::vector<int> nodes = {0, 1, 2, 3, 4, 5};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ds::PartitionConfig cfg;
    cfg.global_size = 700;
    cfg.per_node_min = 50;
    cfg.per_node_max = 350;
    cfg.test_fraction = 0.1;
    cfg.seed = seed;
    ds::Partition part = ds::partition(src, nodes, cfg);
    long long total = 0;
    for (const auto& local : part.locals) {
      auto size = static_cast<long long>(local.train.size() + local.validation.size());
      REQUIRE(size >= 50);
      REQUIRE(size <= 350);
      total += size;
    }
    REQUIRE(total == 700);
  }
}

TEST_CASE("dataset: infeasible partitions are rejected") {
  ds::SourceDataset src = ds::load_source("blobs:n=300,classes=2,dim=4,seed=1");
  std::vector<int> nodes = {0, 1, 2, 3, 4, 5};
  ds::PartitionConfig cfg;
  cfg.per_node_min = 50;
  cfg.per_node_max = 350;

  cfg.global_size = 100;  // below 6*50
  CHECK_THROWS_AS(ds::partition(src, nodes, cfg), std::invalid_argument);

  cfg.global_size = 700;  // source too small: 700 + test > 300
  CHECK_THROWS_AS(ds::partition(src, nodes, cfg), std::invalid_argument);
}

TEST_CASE("dataset: unscaled mode keeps drawn sizes and feeds the reserve") {
  ds::SourceDataset src = ds::load_source("blobs:n=2000,classes=2,dim=4,seed=5");
  ds::PartitionConfig cfg;
  cfg.global_size = 0;  // no rescale
  cfg.per_node_min = 20;
  cfg.per_node_max = 40;
  cfg.test_fraction = 0.1;
  cfg.seed = 2;
  std::vector<int> nodes = {7, 9};
  ds::Partition part = ds::partition(src, nodes, cfg);
  for (const auto& local : part.locals) {
    auto size = static_cast<long long>(local.train.size() + local.validation.size());
    CHECK(size >= 20);
    CHECK(size <= 40);
  }
  CHECK(part.locals[0].node == 7);
  CHECK(part.locals[1].node == 9);

  ogl::Rng rng(77);
  std::size_t reserve_before = part.reserve.size();
  std::size_t manifest_before = part.manifest.size();
  ds::LocalDataset fresh = ds::draw_from_reserve(part, src, 11, cfg, rng);
  auto size = fresh.train.size() + fresh.validation.size();
  CHECK(size >= 20);
  CHECK(size <= 40);
  CHECK(fresh.node == 11);
  CHECK(part.reserve.size() == reserve_before - size);
  CHECK(part.manifest.size() == manifest_before + size);

  std::set<long long> seen;
  for (const auto& row : part.manifest) {
    REQUIRE(seen.insert(row.sample_index).second);
  }
}

TEST_CASE("dataset: draw_from_reserve reports exhaustion") {
  ds::SourceDataset src = ds::load_source("blobs:n=60,classes=2,dim=4,seed=5");
  ds::PartitionConfig cfg;
  cfg.global_size = 0;
  cfg.per_node_min = 25;
  cfg.per_node_max = 25;
  cfg.test_fraction = 0.0;
  cfg.seed = 3;
  ds::Partition part = ds::partition(src, {0, 1}, cfg);
  CHECK(part.reserve.size() == 10);
  ogl::Rng rng(1);
  CHECK_THROWS_AS(ds::draw_from_reserve(part, src, 2, cfg, rng), std::runtime_error);
}

TEST_CASE("dataset: manifest csv matches the in-memory rows") {
  std::vector<ds::ManifestRow> manifest = {
      {-1, 10, "test"}, {0, 3, "train"}, {0, 4, "validation"}};
  std::ostringstream out;
  ds::write_manifest_csv(manifest, out);
  CHECK(out.str() ==
        "node_id,sample_index,role\n"
        "-1,10,test\n"
        "0,3,train\n"
        "0,4,validation\n");
  CHECK(ds::manifest_hash(manifest) == ogl::fnv1a64(out.str()));
}
