#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bdl/core_math.hpp"

namespace bdl {

/// One anchor per cluster slot plus one or more positives per anchor.
struct PatchBatch {
  Matrix anchors;
  /// Positive rows grouped by owner slot.
  Matrix positives;
  /// positive_owner[q] is the anchor slot that positive row q belongs to.
  std::vector<std::size_t> positive_owner;
  std::vector<std::int32_t> cluster_ids;

  std::size_t size() const noexcept { return anchors.rows(); }
  /// Anchors stacked over positives: the row layout used by every forward pass.
  Matrix stacked() const { return vstack(anchors, positives); }
};

/// Which endpoints form the hardest negative pair, in tie-break order.
enum class NegativePair : std::uint8_t {
  kAnchorAnchor = 0,      // d(x_i, x_j)
  kAnchorPositive = 1,    // d(x_i, x_j+)
  kPositiveAnchor = 2,    // d(x_i+, x_j)
  kPositivePositive = 3,  // d(x_i+, x_j+)
};

struct MinedTriplet {
  std::size_t anchor = 0;
  /// Row in the positive block: the hardest positive of this anchor.
  std::size_t positive = 0;
  /// Row in the anchor block or the positive block, depending on `pair`.
  std::size_t negative = 0;
  /// Anchor slot the negative belongs to.
  std::size_t negative_slot = 0;
  NegativePair pair = NegativePair::kAnchorAnchor;
  double d_pos = 0.0;
  double d_neg = 0.0;

  bool operator==(const MinedTriplet&) const = default;
};

/// Row indices into the stacked [anchors; positives] layout.
struct TripletRows {
  std::size_t anchor;
  std::size_t positive;
  std::size_t neg_near;  // the anchor-side end of the negative pair
  std::size_t neg_far;
};

TripletRows stacked_rows(const MinedTriplet& t, std::size_t num_anchors);

/// Hardest-positive / hardest-in-batch negative mining. Ties go to the smallest
/// index, then to the NegativePair order.
std::vector<MinedTriplet> mine_batch(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                                     std::span<const std::size_t> positive_owner,
                                     std::span<const std::int32_t> cluster_ids);

/// Convenience overload for exactly one positive per anchor.
std::vector<MinedTriplet> mine_batch(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                                     std::span<const std::int32_t> cluster_ids);

namespace reference {

std::vector<MinedTriplet> mine_batch(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                                     std::span<const std::size_t> positive_owner,
                                     std::span<const std::int32_t> cluster_ids);

}  // namespace reference

}  // namespace bdl
