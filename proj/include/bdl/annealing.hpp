#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bdl/dataset.hpp"
#include "bdl/supervision.hpp"
#include "bdl/training.hpp"

namespace bdl {

struct AnnealConfig {
  std::size_t bs_start = 92;
  std::size_t bs_end = 32;
  std::size_t bs_step = 4;
  double thr_start = -0.05;
  double thr_step = 0.05;
  double lr_start = 1e-4;
  /// Learning-rate decay factor per iteration, in (0, 1).
  double decay = 0.75;
  std::size_t batches_per_iteration = 20;
  /// lr_t = lr_{t-1} * decay^t instead of lr_{t-1} * decay.
  bool compounding_decay = false;

  void validate() const;
};

struct AnnealState {
  std::size_t t = 0;
  std::size_t batch_size = 0;
  double threshold = 0.0;
  double lr = 0.0;
};

/// (bs_start - bs_end) / bs_step; throws when the step does not divide the gap.
std::size_t iteration_count(const AnnealConfig& cfg);

AnnealState initial_state(const AnnealConfig& cfg);

/// Shrinks the batch, raises the threshold and decays the learning rate.
AnnealState advance(const AnnealState& state, const AnnealConfig& cfg);

/// Zeroes the weight of every triplet whose confidence is strictly below `thr`.
ConfidenceWeights filter_by_threshold(ConfidenceWeights weights, double thr);

struct AnnealLogRow {
  std::size_t t = 0;
  std::size_t batch_size = 0;
  double threshold = 0.0;
  double lr = 0.0;
  double loss = 0.0;
  double mean_confidence = 0.0;
  double filtered_fraction = 0.0;
};

/// Runs every iteration of the schedule: advance the state, then train
/// `batches_per_iteration` batches at the new batch size, threshold and lr.
std::vector<AnnealLogRow> run_annealing(DescriptorNet& net, const PatchDataset& dataset,
                                        std::span<const std::int32_t> clusters, const AnnealConfig& cfg,
                                        const TrainingSetup& setup, std::uint64_t seed,
                                        const Supervisor* pretrained = nullptr);

}  // namespace bdl
