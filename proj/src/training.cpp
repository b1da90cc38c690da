#include "bdl/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "bdl/annealing.hpp"
#include "bdl/error.hpp"

namespace bdl {

std::string_view to_string(LossKind kind) { return kind == LossKind::kBalance ? "balance" : "triplet"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "balance") return LossKind::kBalance;
  if (name == "triplet") return LossKind::kTriplet;
  throw Error(ErrorKind::kConfig, "unknown loss '" + std::string(name) + "' (expected balance or triplet)");
}

void TrainingSetup::validate() const {
  balance.validate();
  triplet.validate();
  supervisor.validate();
}

void PreliminaryConfig::validate() const {
  require(steps > 0, ErrorKind::kConfig, "train steps must be positive");
  require(steps_per_epoch > 0 && steps_per_epoch <= steps, ErrorKind::kConfig,
          "steps_per_epoch must be in [1, steps]");
  require(batch_size >= 2, ErrorKind::kConfig, "batch_size must be at least 2");
  require(std::isfinite(max_lr) && max_lr > 0.0, ErrorKind::kConfig, "max_lr must be positive");
  require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, ErrorKind::kConfig, "warmup_fraction must be in [0, 1)");
  require(min_lr >= 0.0 && min_lr <= max_lr, ErrorKind::kConfig, "min_lr must be in [0, max_lr]");
}

namespace {

EmbeddingBatch rows_range(const EmbeddingBatch& e, std::size_t begin, std::size_t end) {
  Matrix m(end - begin, e.dim());
  for (std::size_t r = begin; r < end; ++r) std::ranges::copy(e.row(r), m.row(r - begin).begin());
  return EmbeddingBatch(std::move(m));
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

BatchAnalysis analyze_batch(const DescriptorNet& net, const PatchBatch& batch, const TrainingSetup& setup,
                            const Supervisor* pretrained, std::optional<double> threshold) {
  const std::size_t n = batch.size();
  ForwardResult fwd = forward(net, batch.stacked());
  const EmbeddingBatch anchors = rows_range(fwd.embeddings, 0, n);
  const EmbeddingBatch positives = rows_range(fwd.embeddings, n, fwd.embeddings.rows());

  BatchAnalysis out;
  out.triplets = mine_batch(anchors, positives, batch.positive_owner, batch.cluster_ids);

  if (setup.unbiased || threshold) {
    if (setup.supervisor.mode == SupervisorMode::kPretrained) {
      require(pretrained != nullptr, ErrorKind::kCheckpoint, "pretrained supervision requested but none loaded");
      out.weights = supervise_batch(*pretrained, batch, out.triplets, setup.supervisor);
    } else {
      out.weights = supervise_batch(Supervisor::self_snapshot(net), batch, out.triplets, setup.supervisor);
    }
    if (!setup.unbiased) std::ranges::fill(out.weights.weight, 1.0);
  } else {
    out.weights = unit_weights(out.triplets);
  }
  if (threshold) out.weights = filter_by_threshold(std::move(out.weights), *threshold);

  out.loss = setup.loss == LossKind::kBalance
                 ? weighted_balance_loss(out.triplets, out.weights, setup.balance)
                 : weighted_triplet_loss(out.triplets, out.weights, setup.triplet);

  const Matrix grad_emb = embedding_gradients(fwd.embeddings, n, out.triplets, out.loss);
  out.param_grads = backward(net, fwd.cache, grad_emb);

  StepStats& s = out.stats;
  s.loss = out.loss.loss;
  s.p_neg = out.loss.p_neg_used;
  s.mean_confidence = mean(out.weights.confidence);
  s.mean_weight = mean(out.weights.weight);
  std::size_t filtered = 0;
  double dp = 0.0;
  double dn = 0.0;
  for (std::size_t i = 0; i < out.triplets.size(); ++i) {
    if (threshold && out.weights.confidence[i] < *threshold) ++filtered;
    dp += out.triplets[i].d_pos;
    dn += out.triplets[i].d_neg;
  }
  const auto count = static_cast<double>(out.triplets.size());
  s.filtered_fraction = static_cast<double>(filtered) / count;
  s.mean_d_pos = dp / count;
  s.mean_d_neg = dn / count;
  return out;
}

Trainer::Trainer(DescriptorNet& net, TrainingSetup setup, const Supervisor* pretrained)
    : net_(net), setup_(std::move(setup)), pretrained_(pretrained), adam_(net.parameter_count()) {
  setup_.validate();
}

StepStats Trainer::step(const PatchBatch& batch, double lr, std::optional<double> threshold) {
  BatchAnalysis a = analyze_batch(net_, batch, setup_, pretrained_, threshold);
  const bool any_weight = std::ranges::any_of(a.weights.weight, [](double w) { return w != 0.0; });
  if (any_weight) {
    adam_step(adam_, net_.mutable_parameters(), a.param_grads, lr);
    a.stats.updated = true;
  }
  return a.stats;
}

std::vector<EpochLog> run_preliminary(DescriptorNet& net, const PatchDataset& dataset,
                                      std::span<const std::int32_t> clusters, const TrainingSetup& setup,
                                      const PreliminaryConfig& cfg, std::uint64_t seed,
                                      const Supervisor* pretrained, const EvalHook& eval) {
  cfg.validate();
  LrSchedule schedule = warmup_cosine(cfg.max_lr, cfg.steps, cfg.warmup_fraction);
  schedule.min_lr = cfg.min_lr;

  std::mt19937_64 rng(seed);
  Trainer trainer(net, setup, pretrained);
  std::vector<EpochLog> log;
  EpochLog acc;
  std::size_t in_epoch = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double lr = lr_at(schedule, step);
    const PatchBatch batch = sample_batch(dataset, cfg.batch_size, rng, clusters);
    const StepStats s = trainer.step(batch, lr);
    acc.loss += s.loss;
    acc.p_neg += s.p_neg;
    acc.mean_confidence += s.mean_confidence;
    acc.mean_weight += s.mean_weight;
    acc.mean_d_pos += s.mean_d_pos;
    acc.mean_d_neg += s.mean_d_neg;
    ++in_epoch;

    const bool epoch_end = (step + 1) % cfg.steps_per_epoch == 0 || step + 1 == cfg.steps;
    if (!epoch_end) continue;
    const auto k = static_cast<double>(in_epoch);
    EpochLog row;
    row.epoch = log.size() + 1;
    row.step = step + 1;
    row.lr = lr;
    row.loss = acc.loss / k;
    row.p_neg = acc.p_neg / k;
    row.mean_confidence = acc.mean_confidence / k;
    row.mean_weight = acc.mean_weight / k;
    row.mean_d_pos = acc.mean_d_pos / k;
    row.mean_d_neg = acc.mean_d_neg / k;
    row.eval_matching_map = eval ? eval(net) : std::nan("");
    spdlog::debug("epoch {} step {} loss={:.5f} p_neg={:.4f} d_pos={:.4f} d_neg={:.4f} mean_I={:.4f} map={:.4f}",
                  row.epoch, row.step, row.loss, row.p_neg, row.mean_d_pos, row.mean_d_neg, row.mean_confidence,
                  row.eval_matching_map);
    log.push_back(row);
    acc = {};
    in_epoch = 0;
  }
  return log;
}

}  // namespace bdl
