#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "bdl/core_math.hpp"
#include "bdl/dataset.hpp"
#include "bdl/error.hpp"

using namespace bdl;

namespace {

double distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (double(a[k]) - double(b[k])) * (double(a[k]) - double(b[k]));
  return std::sqrt(s);
}

double mean_within(const PatchDataset& ds, std::size_t c) {
  double s = 0.0;
  for (std::size_t m = 1; m < ds.members_per_cluster; ++m) s += distance(ds.patch(ds.row_of(c, 0)), ds.patch(ds.row_of(c, m)));
  return s / static_cast<double>(ds.members_per_cluster - 1);
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  SyntheticConfig c;
  c.num_clusters = 40;
  c.false_negative_rate = 0.2;
  CHECK(generate(c) == generate(c));
  SyntheticConfig d = c;
  d.seed = 2;
  CHECK(generate(c).patches != generate(d).patches);
}

TEST_CASE("shape and label invariants") {
  SyntheticConfig c;
  c.num_clusters = 60;
  c.positives_per_cluster = 3;
  const PatchDataset ds = generate(c);
  CHECK(ds.num_clusters() == 60);
  CHECK(ds.members_per_cluster == 4);
  CHECK(ds.num_patches() == 240);
  CHECK(ds.patches.size() == 240 * 32);
  for (std::size_t r = 0; r < ds.num_patches(); ++r) {
    CHECK(ds.cluster_ids[r] == static_cast<std::int32_t>(r / 4));
    CHECK(ds.mislabeled[r] == 0);
    double n = 0.0;
    for (float v : ds.patch(r)) {
      CHECK(std::isfinite(v));
      n += double(v) * double(v);
    }
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (auto t : ds.twin_of) CHECK(t == -1);
}

TEST_CASE("within-cluster distance is below across-cluster distance at low noise") {
  SyntheticConfig c;
  c.num_clusters = 100;
  c.noise = {0.05, 0.06, 0.07};
  const PatchDataset ds = generate(c);
  double within = 0.0;
  double across = 0.0;
  std::size_t n_across = 0;
  for (std::size_t a = 0; a < 100; ++a) {
    within += mean_within(ds, a);
    for (std::size_t b = a + 1; b < 100; ++b, ++n_across)
      across += distance(ds.patch(ds.row_of(a, 0)), ds.patch(ds.row_of(b, 0)));
  }
  CHECK(within / 100.0 < across / static_cast<double>(n_across));
}

TEST_CASE("harder tiers are noisier") {
  SyntheticConfig c;
  c.num_clusters = 300;
  const PatchDataset ds = generate(c);
  std::array<double, 3> mean{};
  std::array<int, 3> count{};
  for (std::size_t cl = 0; cl < ds.num_clusters(); ++cl) {
    const auto t = static_cast<std::size_t>(ds.tier_of(cl));
    mean[t] += mean_within(ds, cl);
    ++count[t];
  }
  for (std::size_t t = 0; t < 3; ++t) mean[t] /= count[t];
  CHECK(mean[0] < mean[1]);
  CHECK(mean[1] < mean[2]);
}

TEST_CASE("planted twins") {
  SyntheticConfig c;
  c.num_clusters = 200;
  c.false_negative_rate = 0.3;
  const PatchDataset ds = generate(c);
  std::size_t twins = 0;
  for (std::size_t cl = 0; cl < ds.num_clusters(); ++cl) {
    const auto t = ds.twin_of[cl];
    if (t < 0) continue;
    CHECK(ds.twin_of[static_cast<std::size_t>(t)] == static_cast<std::int32_t>(cl));
    CHECK(ds.cluster_ids[ds.row_of(static_cast<std::size_t>(t), 0)] != ds.cluster_ids[ds.row_of(cl, 0)]);
    CHECK(ds.tier_of(cl) == ds.tier_of(static_cast<std::size_t>(t)));
    const bool cl_twin = ds.mislabeled[ds.row_of(cl, 0)] != 0;
    const bool t_twin = ds.mislabeled[ds.row_of(static_cast<std::size_t>(t), 0)] != 0;
    CHECK(cl_twin != t_twin);
    twins += cl_twin ? 1 : 0;
  }
  CHECK(ds.num_clusters() == 200 + twins);
  CHECK(twins > 30);
  CHECK(twins < 90);
}

TEST_CASE("batch sampling") {
  SyntheticConfig c;
  c.num_clusters = 50;
  const PatchDataset ds = generate(c);
  std::mt19937_64 rng(3);
  const PatchBatch b = sample_batch(ds, 20, rng);
  CHECK(b.size() == 20);
  CHECK(b.positives.rows() == 20 * c.positives_per_cluster);
  std::set<std::int32_t> ids(b.cluster_ids.begin(), b.cluster_ids.end());
  CHECK(ids.size() == 20);
  for (std::size_t q = 0; q < b.positive_owner.size(); ++q) CHECK(b.positive_owner[q] == q / c.positives_per_cluster);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto cl = static_cast<std::size_t>(b.cluster_ids[i]);
    for (std::size_t k = 0; k < ds.dim; ++k) CHECK(b.anchors(i, k) == double(ds.patch(ds.row_of(cl, 0))[k]));
  }

  const std::vector<std::int32_t> pool = {4, 9, 11};
  const PatchBatch p = sample_batch(ds, 3, rng, pool);
  CHECK(std::set<std::int32_t>(p.cluster_ids.begin(), p.cluster_ids.end()) == std::set<std::int32_t>{4, 9, 11});
  CHECK(kind_of([&] { sample_batch(ds, 4, rng, pool); }) == ErrorKind::kSampling);
  CHECK(kind_of([&] { sample_batch(ds, 51, rng); }) == ErrorKind::kSampling);

  std::mt19937_64 r1(8), r2(8);
  CHECK(sample_batch(ds, 10, r1).cluster_ids == sample_batch(ds, 10, r2).cluster_ids);
}

TEST_CASE("held-out split") {
  SyntheticConfig c;
  c.num_clusters = 40;
  const PatchDataset ds = generate(c);
  const ClusterSplit s = split_clusters(ds, 0.25);
  CHECK(s.train.size() == 30);
  CHECK(s.held_out.size() == 10);
  CHECK(s.train.back() < s.held_out.front());
  CHECK(kind_of([&] { split_clusters(ds, 1.0); }) == ErrorKind::kConfig);
}

TEST_CASE("binary round trip and corruption") {
  SyntheticConfig c;
  c.num_clusters = 30;
  c.false_negative_rate = 0.2;
  const PatchDataset ds = generate(c);
  const auto bytes = encode_dataset(ds);
  CHECK(decode_dataset(bytes) == ds);

  const auto path = std::filesystem::temp_directory_path() / "bdl_test_dataset.bin";
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
  std::filesystem::remove(path);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(kind_of([&] { decode_dataset(bad_magic); }) == ErrorKind::kFormat);
  auto bumped = bytes;
  bumped[4] = static_cast<std::uint8_t>(kDatasetVersion + 1);
  CHECK(kind_of([&] { decode_dataset(bumped); }) == ErrorKind::kVersion);
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
  CHECK(kind_of([&] { decode_dataset(truncated); }) == ErrorKind::kFormat);
}

TEST_CASE("config validation") {
  SyntheticConfig c;
  c.noise = {0.5, 0.4, 0.9};
  CHECK(kind_of([&] { generate(c); }) == ErrorKind::kConfig);
  c = {};
  c.positives_per_cluster = 0;
  CHECK(kind_of([&] { generate(c); }) == ErrorKind::kConfig);
  c = {};
  c.false_negative_rate = 1.0;
  CHECK(kind_of([&] { generate(c); }) == ErrorKind::kConfig);
  c = {};
  c.latent_dim = 33;
  CHECK(kind_of([&] { generate(c); }) == ErrorKind::kConfig);
}
