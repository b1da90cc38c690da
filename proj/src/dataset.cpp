#include "bdl/dataset.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "bdl/binary_io.hpp"
#include "bdl/error.hpp"

namespace bdl {

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::kEasy: return "easy";
    case Tier::kHard: return "hard";
    case Tier::kTough: return "tough";
  }
  return "unknown";
}

void SyntheticConfig::validate() const {
  require(num_clusters >= 2, ErrorKind::kConfig, "num_clusters must be at least 2");
  require(positives_per_cluster >= 1, ErrorKind::kConfig, "positives_per_cluster must be at least 1");
  require(input_dim >= 1, ErrorKind::kConfig, "input_dim must be positive");
  require(latent_dim >= 1 && latent_dim <= input_dim, ErrorKind::kConfig, "latent_dim must be in [1, input_dim]");
  require(noise[0] >= 0.0 && noise[0] < noise[1] && noise[1] < noise[2], ErrorKind::kConfig,
          "tier noise levels must satisfy 0 <= easy < hard < tough");
  require(false_negative_rate >= 0.0 && false_negative_rate < 1.0, ErrorKind::kConfig,
          "false_negative_rate must be in [0, 1)");
}

namespace {

std::vector<double> gaussian_vector(std::size_t n, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

/// Orthonormal columns spanning the latent subspace (Gram-Schmidt on Gaussians).
std::vector<std::vector<double>> latent_basis(std::size_t latent, std::size_t dim, std::mt19937_64& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < latent) {
    auto v = gaussian_vector(dim, 1.0, rng);
    for (const auto& b : basis) {
      const double p = dot(v, b);
      for (std::size_t k = 0; k < dim; ++k) v[k] -= p * b[k];
    }
    if (l2_norm(v) < 1e-6) continue;
    basis.push_back(l2_normalize(v));
  }
  return basis;
}

}  // namespace

PatchDataset generate(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution plant(cfg.false_negative_rate);
  const auto basis = latent_basis(cfg.latent_dim, cfg.input_dim, rng);
  const double per_coord = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));

  PatchDataset ds;
  ds.dim = cfg.input_dim;
  ds.members_per_cluster = 1 + cfg.positives_per_cluster;

  auto emit_cluster = [&](const std::vector<double>& center, Tier tier, bool twin) {
    const auto id = static_cast<std::int32_t>(ds.twin_of.size());
    ds.twin_of.push_back(-1);
    const double sigma = cfg.noise[static_cast<std::size_t>(tier)] * per_coord;
    for (std::size_t m = 0; m < ds.members_per_cluster; ++m) {
      auto x = gaussian_vector(cfg.input_dim, sigma, rng);
      for (std::size_t k = 0; k < cfg.input_dim; ++k) x[k] += center[k];
      for (double v : l2_normalize(x)) ds.patches.push_back(static_cast<float>(v));
      ds.cluster_ids.push_back(id);
      ds.tiers.push_back(tier);
      ds.mislabeled.push_back(twin ? 1 : 0);
    }
    return id;
  };

  for (std::size_t c = 0; c < cfg.num_clusters; ++c) {
    const auto latent = l2_normalize(gaussian_vector(cfg.latent_dim, 1.0, rng));
    std::vector<double> center(cfg.input_dim, 0.0);
    for (std::size_t l = 0; l < cfg.latent_dim; ++l)
      for (std::size_t k = 0; k < cfg.input_dim; ++k) center[k] += latent[l] * basis[l][k];
    const auto tier = static_cast<Tier>(c % 3);
    const std::int32_t id = emit_cluster(center, tier, false);
    if (plant(rng)) {
      // Twin center moves by a tenth of the easy-tier noise: geometrically the same point.
      auto shifted = gaussian_vector(cfg.input_dim, 0.1 * cfg.noise[0] * per_coord, rng);
      for (std::size_t k = 0; k < cfg.input_dim; ++k) shifted[k] += center[k];
      const std::int32_t twin = emit_cluster(l2_normalize(shifted), tier, true);
      ds.twin_of[static_cast<std::size_t>(id)] = twin;
      ds.twin_of[static_cast<std::size_t>(twin)] = id;
    }
  }

  ds.metadata = nlohmann::json{{"num_clusters", cfg.num_clusters},
                               {"positives_per_cluster", cfg.positives_per_cluster},
                               {"input_dim", cfg.input_dim},
                               {"latent_dim", cfg.latent_dim},
                               {"noise", cfg.noise},
                               {"false_negative_rate", cfg.false_negative_rate},
                               {"seed", cfg.seed}}
                    .dump();
  return ds;
}

PatchBatch sample_batch(const PatchDataset& dataset, std::size_t batch_size, std::mt19937_64& rng,
                        std::span<const std::int32_t> pool) {
  std::vector<std::int32_t> candidates(pool.begin(), pool.end());
  if (candidates.empty()) {
    candidates.resize(dataset.num_clusters());
    for (std::size_t c = 0; c < candidates.size(); ++c) candidates[c] = static_cast<std::int32_t>(c);
  }
  require(batch_size <= candidates.size(), ErrorKind::kSampling,
          "batch size " + std::to_string(batch_size) + " exceeds the " + std::to_string(candidates.size()) +
              " available clusters");
  // Partial Fisher-Yates: the first batch_size entries become the draw.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }

  const std::size_t positives = dataset.members_per_cluster - 1;
  PatchBatch batch;
  batch.anchors = Matrix(batch_size, dataset.dim);
  batch.positives = Matrix(batch_size * positives, dataset.dim);
  batch.positive_owner.resize(batch_size * positives);
  batch.cluster_ids.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto c = static_cast<std::size_t>(candidates[i]);
    batch.cluster_ids[i] = candidates[i];
    std::ranges::copy(dataset.patch(dataset.row_of(c, 0)), batch.anchors.row(i).begin());
    for (std::size_t m = 0; m < positives; ++m) {
      const std::size_t q = i * positives + m;
      std::ranges::copy(dataset.patch(dataset.row_of(c, 1 + m)), batch.positives.row(q).begin());
      batch.positive_owner[q] = i;
    }
  }
  return batch;
}

ClusterSplit split_clusters(const PatchDataset& dataset, double holdout_fraction) {
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorKind::kConfig,
          "holdout_fraction must be in (0, 1)");
  const std::size_t n = dataset.num_clusters();
  const auto train_count = static_cast<std::size_t>(std::llround((1.0 - holdout_fraction) * static_cast<double>(n)));
  ClusterSplit split;
  for (std::size_t c = 0; c < n; ++c)
    (c < train_count ? split.train : split.held_out).push_back(static_cast<std::int32_t>(c));
  require(split.train.size() >= 2 && split.held_out.size() >= 2, ErrorKind::kConfig,
          "holdout split leaves fewer than 2 clusters on one side");
  return split;
}

std::vector<std::uint8_t> encode_dataset(const PatchDataset& ds) {
  io::ByteWriter w;
  w.magic("BDDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.num_clusters()));
  w.u32(static_cast<std::uint32_t>(ds.members_per_cluster));
  w.u32(static_cast<std::uint32_t>(ds.dim));
  for (float v : ds.patches) w.f32(v);
  for (auto id : ds.cluster_ids) w.i32(id);
  for (auto t : ds.tiers) w.u8(static_cast<std::uint8_t>(t));
  for (auto f : ds.mislabeled) w.u8(f);
  for (auto t : ds.twin_of) w.i32(t);
  w.text(ds.metadata);
  return w.take();
}

PatchDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset");
  r.expect_magic("BDDS");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw Error(ErrorKind::kVersion, "dataset version " + std::to_string(version) + ", reader supports " +
                                         std::to_string(kDatasetVersion));
  PatchDataset ds;
  const std::size_t clusters = r.u32();
  ds.members_per_cluster = r.u32();
  ds.dim = r.u32();
  require(clusters >= 2 && ds.members_per_cluster >= 2 && ds.dim >= 1, ErrorKind::kFormat,
          "dataset: malformed header");
  const std::size_t rows = clusters * ds.members_per_cluster;
  // patches + ids + tiers + flags + twins
  require(r.remaining() >= rows * ds.dim * 4 + rows * 6 + clusters * 4, ErrorKind::kFormat,
          "dataset: truncated payload");
  ds.patches.resize(rows * ds.dim);
  for (float& v : ds.patches) v = r.f32();
  ds.cluster_ids.resize(rows);
  for (auto& id : ds.cluster_ids) id = r.i32();
  ds.tiers.resize(rows);
  for (auto& t : ds.tiers) {
    const std::uint8_t raw = r.u8();
    require(raw <= 2, ErrorKind::kFormat, "dataset: bad tier tag");
    t = static_cast<Tier>(raw);
  }
  ds.mislabeled.resize(rows);
  for (auto& f : ds.mislabeled) f = r.u8();
  ds.twin_of.resize(clusters);
  for (auto& t : ds.twin_of) t = r.i32();
  ds.metadata = r.text();
  require(r.at_end(), ErrorKind::kFormat, "dataset: trailing bytes");
  for (std::size_t row = 0; row < rows; ++row)
    require(ds.cluster_ids[row] == static_cast<std::int32_t>(row / ds.members_per_cluster), ErrorKind::kFormat,
            "dataset: cluster ids are not dense and cluster-major");
  return ds;
}

void save_dataset(const PatchDataset& dataset, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(dataset));
}

PatchDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace bdl
