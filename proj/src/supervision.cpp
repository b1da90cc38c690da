#include "bdl/supervision.hpp"

#include <cmath>
#include <map>

#include "bdl/error.hpp"

namespace bdl {

void SupervisorConfig::validate() const {
  require(std::isfinite(upper) && std::isfinite(threshold), ErrorKind::kConfig, "upper/threshold must be finite");
  require(threshold < upper, ErrorKind::kConfig, "threshold must be below upper");
  require(std::isfinite(shape_k) && shape_k > 0.0, ErrorKind::kConfig, "shape_k must be positive");
  if (mode == SupervisorMode::kPretrained)
    require(!checkpoint.empty(), ErrorKind::kConfig, "pretrained supervision needs a checkpoint path");
}

double confidence(double d_pos_sup, double d_neg_sup) { return d_neg_sup - d_pos_sup; }

double weight(double confidence, const SupervisorConfig& cfg) {
  if (confidence >= cfg.upper) return 1.0;
  if (confidence <= cfg.threshold) return 0.0;
  return std::expm1(cfg.shape_k * (confidence - cfg.threshold)) / std::expm1(cfg.shape_k * (cfg.upper - cfg.threshold));
}

Supervisor Supervisor::from_checkpoint(const std::filesystem::path& path) {
  return Supervisor(load_checkpoint(path).net);
}

ConfidenceWeights supervise_batch(const Supervisor& supervisor, const PatchBatch& batch,
                                  std::span<const MinedTriplet> triplets, const SupervisorConfig& cfg) {
  cfg.validate();
  const DescriptorNet& net = supervisor.net();
  require(net.input_dim() == batch.anchors.cols(), ErrorKind::kCheckpoint,
          "supervisor expects " + std::to_string(net.input_dim()) + "-dimensional patches, batch has " +
              std::to_string(batch.anchors.cols()));

  const std::size_t n = batch.size();
  // Distinct stacked rows referenced by the triplets, in first-use order.
  std::map<std::size_t, std::size_t> slot_of;
  std::vector<std::size_t> rows;
  auto slot = [&](std::size_t row) {
    auto [it, inserted] = slot_of.try_emplace(row, rows.size());
    if (inserted) rows.push_back(row);
    return it->second;
  };
  std::vector<TripletRows> local(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const TripletRows r = stacked_rows(triplets[i], n);
    local[i] = {slot(r.anchor), slot(r.positive), slot(r.neg_near), slot(r.neg_far)};
  }

  const Matrix stacked = batch.stacked();
  const EmbeddingBatch emb = embed(net, stacked.gather(rows));

  ConfidenceWeights out;
  out.embedded_rows = rows.size();
  out.confidence.resize(triplets.size());
  out.weight.resize(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const double d_pos = unit_distance(emb.row(local[i].anchor), emb.row(local[i].positive));
    const double d_neg = unit_distance(emb.row(local[i].neg_near), emb.row(local[i].neg_far));
    out.confidence[i] = confidence(d_pos, d_neg);
    out.weight[i] = weight(out.confidence[i], cfg);
  }
  return out;
}

ConfidenceWeights unit_weights(std::span<const MinedTriplet> triplets) {
  ConfidenceWeights out;
  out.confidence.resize(triplets.size());
  out.weight.assign(triplets.size(), 1.0);
  for (std::size_t i = 0; i < triplets.size(); ++i)
    out.confidence[i] = confidence(triplets[i].d_pos, triplets[i].d_neg);
  return out;
}

namespace {

void check_aligned(std::span<const MinedTriplet> triplets, const ConfidenceWeights& weights) {
  require(weights.weight.size() == triplets.size(), ErrorKind::kAlignment,
          "weights (" + std::to_string(weights.weight.size()) + ") not aligned with triplets (" +
              std::to_string(triplets.size()) + ")");
}

}  // namespace

LossOutput weighted_balance_loss(std::span<const MinedTriplet> triplets, const ConfidenceWeights& weights,
                                 const BalanceLossConfig& cfg, LossOptions options) {
  check_aligned(triplets, weights);
  options.weights = weights.weight;
  return balance_loss(triplets, cfg, options);
}

LossOutput weighted_triplet_loss(std::span<const MinedTriplet> triplets, const ConfidenceWeights& weights,
                                 const TripletLossConfig& cfg, LossOptions options) {
  check_aligned(triplets, weights);
  options.weights = weights.weight;
  return triplet_loss(triplets, cfg, options);
}

}  // namespace bdl
