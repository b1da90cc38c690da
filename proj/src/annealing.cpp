#include "bdl/annealing.hpp"

#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "bdl/error.hpp"

namespace bdl {

void AnnealConfig::validate() const {
  require(bs_start >= bs_end, ErrorKind::kConfig, "anneal bs_start must not be below bs_end");
  require(bs_end >= 2, ErrorKind::kConfig, "anneal bs_end must be at least 2");
  require(bs_step > 0, ErrorKind::kConfig, "anneal bs_step must be positive");
  require((bs_start - bs_end) % bs_step == 0, ErrorKind::kConfig,
          "anneal bs_step " + std::to_string(bs_step) + " does not divide bs_start - bs_end = " +
              std::to_string(bs_start - bs_end));
  require(std::isfinite(thr_start) && std::isfinite(thr_step) && thr_step >= 0.0, ErrorKind::kConfig,
          "anneal thresholds must be finite with a non-negative step");
  require(std::isfinite(lr_start) && lr_start > 0.0, ErrorKind::kConfig, "anneal lr_start must be positive");
  require(decay > 0.0 && decay < 1.0, ErrorKind::kConfig, "anneal decay must be in (0, 1)");
  require(batches_per_iteration > 0, ErrorKind::kConfig, "anneal batches_per_iteration must be positive");
}

std::size_t iteration_count(const AnnealConfig& cfg) {
  cfg.validate();
  return (cfg.bs_start - cfg.bs_end) / cfg.bs_step;
}

AnnealState initial_state(const AnnealConfig& cfg) {
  cfg.validate();
  return {0, cfg.bs_start, cfg.thr_start, cfg.lr_start};
}

AnnealState advance(const AnnealState& state, const AnnealConfig& cfg) {
  const std::size_t n = iteration_count(cfg);
  require(state.t < n, ErrorKind::kScheduleExhausted,
          "annealing schedule has " + std::to_string(n) + " iterations; cannot advance past t = " +
              std::to_string(state.t));
  AnnealState next;
  next.t = state.t + 1;
  next.batch_size = state.batch_size - cfg.bs_step;
  // Multiplying the step count keeps the threshold free of accumulated round-off.
  next.threshold = cfg.thr_start + static_cast<double>(next.t) * cfg.thr_step;
  next.lr = state.lr * (cfg.compounding_decay ? std::pow(cfg.decay, static_cast<double>(next.t)) : cfg.decay);
  return next;
}

ConfidenceWeights filter_by_threshold(ConfidenceWeights weights, double thr) {
  for (std::size_t i = 0; i < weights.weight.size(); ++i)
    if (weights.confidence[i] < thr) weights.weight[i] = 0.0;
  return weights;
}

std::vector<AnnealLogRow> run_annealing(DescriptorNet& net, const PatchDataset& dataset,
                                        std::span<const std::int32_t> clusters, const AnnealConfig& cfg,
                                        const TrainingSetup& setup, std::uint64_t seed,
                                        const Supervisor* pretrained) {
  const std::size_t n = iteration_count(cfg);
  std::vector<AnnealLogRow> log;
  if (n == 0) return log;

  std::mt19937_64 rng(seed);
  Trainer trainer(net, setup, pretrained);
  AnnealState state = initial_state(cfg);
  while (state.t < n) {
    state = advance(state, cfg);
    AnnealLogRow row{state.t, state.batch_size, state.threshold, state.lr, 0.0, 0.0, 0.0};
    for (std::size_t b = 0; b < cfg.batches_per_iteration; ++b) {
      const PatchBatch batch = sample_batch(dataset, state.batch_size, rng, clusters);
      const StepStats stats = trainer.step(batch, state.lr, state.threshold);
      row.loss += stats.loss;
      row.mean_confidence += stats.mean_confidence;
      row.filtered_fraction += stats.filtered_fraction;
    }
    const auto batches = static_cast<double>(cfg.batches_per_iteration);
    row.loss /= batches;
    row.mean_confidence /= batches;
    row.filtered_fraction /= batches;
    spdlog::debug("anneal t={} bs={} thr={:.3f} lr={:.3g} loss={:.5f} mean_I={:.4f} filtered={:.3f}", row.t,
                  row.batch_size, row.threshold, row.lr, row.loss, row.mean_confidence, row.filtered_fraction);
    log.push_back(row);
  }
  return log;
}

}  // namespace bdl
