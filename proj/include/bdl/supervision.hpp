#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "bdl/loss.hpp"
#include "bdl/mining.hpp"
#include "bdl/model.hpp"

namespace bdl {

enum class SupervisorMode { kSelf, kPretrained };

struct SupervisorConfig {
  SupervisorMode mode = SupervisorMode::kSelf;
  std::filesystem::path checkpoint;
  /// Confidence above which a triplet keeps full weight.
  double upper = 0.065;
  /// Confidence below which a triplet is dropped.
  double threshold = -0.65;
  /// Curvature of the exponential ramp between the two knots.
  double shape_k = 3.0;

  void validate() const;
};

struct ConfidenceWeights {
  std::vector<double> confidence;
  std::vector<double> weight;
  /// Patch rows the supervisor had to embed for this batch.
  std::size_t embedded_rows = 0;

  std::size_t size() const noexcept { return weight.size(); }
};

/// Margin of the supervisor: d_neg - d_pos. Large means an easy, trustworthy
/// triplet; strongly negative flags a suspected false negative.
double confidence(double d_pos_sup, double d_neg_sup);

/// 1 above `upper` (inclusive), 0 below `threshold` (inclusive), otherwise
/// (e^{k(I - threshold)} - 1) / (e^{k(upper - threshold)} - 1).
double weight(double confidence, const SupervisorConfig& cfg);

/// Frozen network that re-scores mined triplets.
class Supervisor {
 public:
  /// Snapshot of the network being trained, taken before this step's update.
  static Supervisor self_snapshot(const DescriptorNet& current) { return Supervisor(current); }
  static Supervisor pretrained(DescriptorNet net) { return Supervisor(std::move(net)); }
  static Supervisor from_checkpoint(const std::filesystem::path& path);

  const DescriptorNet& net() const noexcept { return net_; }

 private:
  explicit Supervisor(DescriptorNet net) : net_(std::move(net)) {}
  DescriptorNet net_;
};

/// Re-embeds only the patches the triplets reference and scores every triplet
/// in the supervisor's own embedding space.
ConfidenceWeights supervise_batch(const Supervisor& supervisor, const PatchBatch& batch,
                                  std::span<const MinedTriplet> triplets, const SupervisorConfig& cfg);

/// All-ones weights with confidence taken from the mined distances; used when
/// the weighting is switched off.
ConfidenceWeights unit_weights(std::span<const MinedTriplet> triplets);

LossOutput weighted_balance_loss(std::span<const MinedTriplet> triplets, const ConfidenceWeights& weights,
                                 const BalanceLossConfig& cfg, LossOptions options = {});

LossOutput weighted_triplet_loss(std::span<const MinedTriplet> triplets, const ConfidenceWeights& weights,
                                 const TripletLossConfig& cfg, LossOptions options = {});

}  // namespace bdl
