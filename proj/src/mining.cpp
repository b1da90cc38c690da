#include "bdl/mining.hpp"

#include <limits>
#include <unordered_set>

#include "bdl/error.hpp"

namespace bdl {

namespace {

using Groups = std::vector<std::vector<std::size_t>>;

Groups validate(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                std::span<const std::size_t> positive_owner, std::span<const std::int32_t> cluster_ids) {
  const std::size_t n = anchors.rows();
  require(n >= 2, ErrorKind::kInsufficientBatch, "mining needs at least 2 anchors, got " + std::to_string(n));
  require(anchors.dim() == positives.dim(), ErrorKind::kShape, "anchor and positive dimensions differ");
  require(cluster_ids.size() == n, ErrorKind::kShape, "one cluster id per anchor required");
  require(positive_owner.size() == positives.rows(), ErrorKind::kShape, "one owner per positive row required");
  std::unordered_set<std::int32_t> seen;
  for (auto id : cluster_ids)
    require(seen.insert(id).second, ErrorKind::kProtocol, "duplicate cluster id " + std::to_string(id) + " in batch");
  Groups groups(n);
  for (std::size_t q = 0; q < positive_owner.size(); ++q) {
    require(positive_owner[q] < n, ErrorKind::kShape, "positive owner out of range");
    groups[positive_owner[q]].push_back(q);
  }
  for (std::size_t i = 0; i < n; ++i)
    require(!groups[i].empty(), ErrorKind::kProtocol, "anchor " + std::to_string(i) + " has no positive");
  return groups;
}

struct Candidate {
  double distance = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
  std::size_t slot = 0;
  NegativePair pair = NegativePair::kAnchorAnchor;

  void offer(double d, std::size_t idx, std::size_t s, NegativePair p) {
    if (d < distance) *this = {d, idx, s, p};
  }
};

// The accessors return anchor-anchor, anchor-positive and positive-positive
// distances; the matrix-backed kernel and the serial reference share this body.
template <typename AA, typename AP, typename PP>
MinedTriplet mine_one(std::size_t i, const Groups& groups, AA d_aa, AP d_ap, PP d_pp) {
  MinedTriplet t;
  t.anchor = i;
  double d_pos = -1.0;
  for (std::size_t q : groups[i]) {
    const double d = d_ap(i, q);
    if (d > d_pos) {
      d_pos = d;
      t.positive = q;
    }
  }
  t.d_pos = d_pos;

  Candidate best;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (j == i) continue;
    best.offer(d_aa(i, j), j, j, NegativePair::kAnchorAnchor);
    for (std::size_t q : groups[j]) best.offer(d_ap(i, q), q, j, NegativePair::kAnchorPositive);
    best.offer(d_ap(j, t.positive), j, j, NegativePair::kPositiveAnchor);
    for (std::size_t q : groups[j]) best.offer(d_pp(t.positive, q), q, j, NegativePair::kPositivePositive);
  }
  t.negative = best.index;
  t.negative_slot = best.slot;
  t.pair = best.pair;
  t.d_neg = best.distance;
  return t;
}

}  // namespace

TripletRows stacked_rows(const MinedTriplet& t, std::size_t num_anchors) {
  const bool near_is_positive =
      t.pair == NegativePair::kPositiveAnchor || t.pair == NegativePair::kPositivePositive;
  const bool far_is_positive =
      t.pair == NegativePair::kAnchorPositive || t.pair == NegativePair::kPositivePositive;
  return {t.anchor, num_anchors + t.positive, near_is_positive ? num_anchors + t.positive : t.anchor,
          far_is_positive ? num_anchors + t.negative : t.negative};
}

std::vector<MinedTriplet> mine_batch(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                                     std::span<const std::size_t> positive_owner,
                                     std::span<const std::int32_t> cluster_ids) {
  const Groups groups = validate(anchors, positives, positive_owner, cluster_ids);
  const DistanceMatrix aa = pairwise_distances(anchors);
  const DistanceMatrix ap = pairwise_distances(anchors, positives);
  const DistanceMatrix pp = pairwise_distances(positives);
  auto d_aa = [&](std::size_t i, std::size_t j) { return aa(i, j); };
  auto d_ap = [&](std::size_t i, std::size_t q) { return ap(i, q); };
  auto d_pp = [&](std::size_t p, std::size_t q) { return pp(p, q); };

  const std::size_t n = anchors.rows();
  std::vector<MinedTriplet> out(n);
  const auto sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    out[i] = mine_one(i, groups, d_aa, d_ap, d_pp);
  }
  return out;
}

std::vector<MinedTriplet> mine_batch(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                                     std::span<const std::int32_t> cluster_ids) {
  std::vector<std::size_t> owner(positives.rows());
  for (std::size_t q = 0; q < owner.size(); ++q) owner[q] = q;
  return mine_batch(anchors, positives, owner, cluster_ids);
}

namespace reference {

std::vector<MinedTriplet> mine_batch(const EmbeddingBatch& anchors, const EmbeddingBatch& positives,
                                     std::span<const std::size_t> positive_owner,
                                     std::span<const std::int32_t> cluster_ids) {
  const Groups groups = validate(anchors, positives, positive_owner, cluster_ids);
  auto d_aa = [&](std::size_t i, std::size_t j) { return unit_distance(anchors.row(i), anchors.row(j)); };
  auto d_ap = [&](std::size_t i, std::size_t q) { return unit_distance(anchors.row(i), positives.row(q)); };
  auto d_pp = [&](std::size_t p, std::size_t q) { return unit_distance(positives.row(p), positives.row(q)); };
  std::vector<MinedTriplet> out;
  out.reserve(anchors.rows());
  for (std::size_t i = 0; i < anchors.rows(); ++i) out.push_back(mine_one(i, groups, d_aa, d_ap, d_pp));
  return out;
}

}  // namespace reference

}  // namespace bdl
