#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bdl/mining.hpp"

namespace bdl {

enum class Tier : std::uint8_t { kEasy = 0, kHard = 1, kTough = 2 };

std::string_view to_string(Tier tier);

struct SyntheticConfig {
  std::size_t num_clusters = 200;
  std::size_t positives_per_cluster = 6;
  std::size_t input_dim = 32;
  /// Dimension of the subspace the cluster centers live in (<= input_dim).
  std::size_t latent_dim = 12;
  /// Noise norm per tier: easy < hard < tough.
  std::array<double, 3> noise = {0.45, 0.675, 0.9};
  /// Probability that a cluster gets a near-identical twin under a new id.
  double false_negative_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Patches stored cluster-major: cluster c owns rows
/// [c * members_per_cluster, (c + 1) * members_per_cluster), the first of which
/// is the anchor.
struct PatchDataset {
  std::size_t dim = 0;
  std::size_t members_per_cluster = 0;
  std::vector<float> patches;
  std::vector<std::int32_t> cluster_ids;
  std::vector<Tier> tiers;
  /// 1 on every patch of a planted twin cluster.
  std::vector<std::uint8_t> mislabeled;
  /// twin_of[c] is the cluster sharing c's true center, or -1.
  std::vector<std::int32_t> twin_of;
  /// Generation parameters as JSON text.
  std::string metadata;

  std::size_t num_patches() const noexcept { return cluster_ids.size(); }
  std::size_t num_clusters() const noexcept { return twin_of.size(); }
  std::span<const float> patch(std::size_t row) const { return {patches.data() + row * dim, dim}; }
  std::size_t row_of(std::size_t cluster, std::size_t member) const { return cluster * members_per_cluster + member; }
  Tier tier_of(std::size_t cluster) const { return tiers[row_of(cluster, 0)]; }

  bool operator==(const PatchDataset&) const = default;
};

PatchDataset generate(const SyntheticConfig& cfg);

/// Draws `batch_size` distinct clusters from `pool` (all clusters when empty)
/// without replacement: one anchor plus every positive per cluster.
PatchBatch sample_batch(const PatchDataset& dataset, std::size_t batch_size, std::mt19937_64& rng,
                        std::span<const std::int32_t> pool = {});

struct ClusterSplit {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> held_out;
};

/// The last `holdout_fraction` of cluster ids are held out for evaluation.
ClusterSplit split_clusters(const PatchDataset& dataset, double holdout_fraction);

inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const PatchDataset& dataset);
PatchDataset decode_dataset(std::span<const std::uint8_t> bytes);

void save_dataset(const PatchDataset& dataset, const std::filesystem::path& path);
PatchDataset load_dataset(const std::filesystem::path& path);

}  // namespace bdl
