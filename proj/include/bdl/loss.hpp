#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bdl/mining.hpp"

namespace bdl {

struct BalanceLossConfig {
  /// Even exponent of both potential wells.
  int alpha = 2;
  /// Ratio between the negative and positive focusing intensities.
  double gamma = 1.05;
  /// Zero of the positive well.
  double p_pos = 0.0;

  void validate() const;
};

struct TripletLossConfig {
  double margin = 1.0;

  void validate() const;
};

struct LossOutput {
  double loss = 0.0;
  std::vector<double> grad_d_pos;
  std::vector<double> grad_d_neg;
  double p_neg_used = 0.0;
};

/// Knobs shared by every loss: optional per-triplet weights (treated as
/// constants), a pinned negative-well position and a pinned normalizer.
struct LossOptions {
  std::span<const double> weights = {};
  std::optional<double> p_neg = std::nullopt;
  std::optional<double> normalizer = std::nullopt;
};

/// (1 + gamma) * median of the negative distances. Constant w.r.t. backprop.
double compute_p_neg(std::span<const double> neg_distances, double gamma);

/// mean_i W_i * [(d_pos - P_pos)^alpha + (d_neg - P_neg)^alpha].
LossOutput balance_loss(std::span<const MinedTriplet> triplets, const BalanceLossConfig& cfg,
                        const LossOptions& options = {});

/// mean_i W_i * max(0, margin + d_pos - d_neg); the boundary counts as inactive.
LossOutput triplet_loss(std::span<const MinedTriplet> triplets, const TripletLossConfig& cfg,
                        const LossOptions& options = {});

/// Scatters per-triplet distance gradients onto the stacked [anchors; positives]
/// embedding rows (the first `num_anchors` rows are anchors) using
/// d|a-b|/da = -b / d for unit vectors.
Matrix embedding_gradients(const EmbeddingBatch& stacked, std::size_t num_anchors,
                           std::span<const MinedTriplet> triplets, const LossOutput& loss);

}  // namespace bdl
