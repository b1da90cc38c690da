#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bdl/dataset.hpp"
#include "bdl/loss.hpp"
#include "bdl/model.hpp"
#include "bdl/supervision.hpp"

namespace bdl {

enum class LossKind { kBalance, kTriplet };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Loss and supervision choices shared by preliminary and annealing training.
struct TrainingSetup {
  LossKind loss = LossKind::kBalance;
  BalanceLossConfig balance;
  TripletLossConfig triplet;
  /// Confidence weighting of mined triplets by the supervisor.
  bool unbiased = true;
  SupervisorConfig supervisor;

  void validate() const;
};

struct StepStats {
  double loss = 0.0;
  double p_neg = 0.0;
  double mean_confidence = 0.0;
  double mean_weight = 0.0;
  double filtered_fraction = 0.0;
  double mean_d_pos = 0.0;
  double mean_d_neg = 0.0;
  bool updated = false;
};

struct BatchAnalysis {
  std::vector<MinedTriplet> triplets;
  ConfidenceWeights weights;
  LossOutput loss;
  std::vector<double> param_grads;
  StepStats stats;
};

/// One batch through mine -> supervise -> [threshold filter] -> loss -> backward,
/// without touching the parameters. `pretrained` is used when the setup asks for
/// a pretrained supervisor; otherwise the supervisor is a snapshot of `net`.
/// With a threshold, triplets whose confidence is below it get weight zero.
BatchAnalysis analyze_batch(const DescriptorNet& net, const PatchBatch& batch, const TrainingSetup& setup,
                            const Supervisor* pretrained, std::optional<double> threshold = std::nullopt);

/// Owns the optimizer state for one training phase.
class Trainer {
 public:
  Trainer(DescriptorNet& net, TrainingSetup setup, const Supervisor* pretrained = nullptr);

  /// Applies one Adam update at `lr`; skipped when every weight is zero.
  StepStats step(const PatchBatch& batch, double lr, std::optional<double> threshold = std::nullopt);

  const AdamState& adam() const noexcept { return adam_; }
  const TrainingSetup& setup() const noexcept { return setup_; }

 private:
  DescriptorNet& net_;
  TrainingSetup setup_;
  const Supervisor* pretrained_;
  AdamState adam_;
};

struct PreliminaryConfig {
  std::size_t steps = 2000;
  std::size_t steps_per_epoch = 100;
  std::size_t batch_size = 64;
  double max_lr = 0.001;
  double warmup_fraction = 0.05;
  double min_lr = 0.0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double p_neg = 0.0;
  double mean_confidence = 0.0;
  double mean_weight = 0.0;
  double mean_d_pos = 0.0;
  double mean_d_neg = 0.0;
  double eval_matching_map = 0.0;
};

using EvalHook = std::function<double(const DescriptorNet&)>;

/// Hard-negative training with a warm-up + cosine learning rate. Batches are
/// drawn from `clusters` with an rng seeded by `seed`; one log row per epoch,
/// averaged over its steps.
std::vector<EpochLog> run_preliminary(DescriptorNet& net, const PatchDataset& dataset,
                                      std::span<const std::int32_t> clusters, const TrainingSetup& setup,
                                      const PreliminaryConfig& cfg, std::uint64_t seed,
                                      const Supervisor* pretrained = nullptr, const EvalHook& eval = {});

}  // namespace bdl
