#include "bdl/loss.hpp"

#include <cmath>

#include "bdl/error.hpp"

namespace bdl {

namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int k = 0; k < n; ++k) r *= x;
  return r;
}

void check_common(std::span<const MinedTriplet> triplets, const LossOptions& options) {
  require(!triplets.empty(), ErrorKind::kEmptyInput, "loss over an empty triplet list");
  require(options.weights.empty() || options.weights.size() == triplets.size(), ErrorKind::kAlignment,
          "weights (" + std::to_string(options.weights.size()) + ") not aligned with triplets (" +
              std::to_string(triplets.size()) + ")");
  if (options.normalizer) require(*options.normalizer > 0.0, ErrorKind::kConfig, "normalizer must be positive");
}

double weight_of(const LossOptions& options, std::size_t i) {
  return options.weights.empty() ? 1.0 : options.weights[i];
}

}  // namespace

void BalanceLossConfig::validate() const {
  require(alpha >= 2 && alpha % 2 == 0, ErrorKind::kConfig,
          "alpha must be an even integer >= 2, got " + std::to_string(alpha));
  require(std::isfinite(gamma) && gamma >= 0.0, ErrorKind::kConfig, "gamma must be finite and non-negative");
  require(std::isfinite(p_pos), ErrorKind::kConfig, "p_pos must be finite");
}

void TripletLossConfig::validate() const {
  require(std::isfinite(margin) && margin >= 0.0, ErrorKind::kConfig, "margin must be finite and non-negative");
}

double compute_p_neg(std::span<const double> neg_distances, double gamma) {
  require(!neg_distances.empty(), ErrorKind::kEmptyInput, "P_neg of an empty distance list");
  return (1.0 + gamma) * median(neg_distances);
}

LossOutput balance_loss(std::span<const MinedTriplet> triplets, const BalanceLossConfig& cfg,
                        const LossOptions& options) {
  cfg.validate();
  check_common(triplets, options);
  const std::size_t n = triplets.size();

  double p_neg = 0.0;
  if (options.p_neg) {
    p_neg = *options.p_neg;
  } else {
    std::vector<double> negs(n);
    for (std::size_t i = 0; i < n; ++i) negs[i] = triplets[i].d_neg;
    p_neg = compute_p_neg(negs, cfg.gamma);
  }

  const double norm = options.normalizer.value_or(static_cast<double>(n));
  const double a = static_cast<double>(cfg.alpha);
  LossOutput out;
  out.p_neg_used = p_neg;
  out.grad_d_pos.resize(n);
  out.grad_d_neg.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight_of(options, i);
    const double dp = triplets[i].d_pos - cfg.p_pos;
    const double dn = triplets[i].d_neg - p_neg;
    total += w * (ipow(dp, cfg.alpha) + ipow(dn, cfg.alpha));
    out.grad_d_pos[i] = w * a * ipow(dp, cfg.alpha - 1) / norm;
    out.grad_d_neg[i] = w * a * ipow(dn, cfg.alpha - 1) / norm;
  }
  out.loss = total / norm;
  return out;
}

LossOutput triplet_loss(std::span<const MinedTriplet> triplets, const TripletLossConfig& cfg,
                        const LossOptions& options) {
  cfg.validate();
  check_common(triplets, options);
  const std::size_t n = triplets.size();
  const double norm = options.normalizer.value_or(static_cast<double>(n));
  LossOutput out;
  out.grad_d_pos.assign(n, 0.0);
  out.grad_d_neg.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double hinge = cfg.margin + triplets[i].d_pos - triplets[i].d_neg;
    if (hinge <= 0.0) continue;
    const double w = weight_of(options, i);
    total += w * hinge;
    out.grad_d_pos[i] = w / norm;
    out.grad_d_neg[i] = -w / norm;
  }
  out.loss = total / norm;
  return out;
}

Matrix embedding_gradients(const EmbeddingBatch& stacked, std::size_t num_anchors,
                           std::span<const MinedTriplet> triplets, const LossOutput& loss) {
  require(loss.grad_d_pos.size() == triplets.size() && loss.grad_d_neg.size() == triplets.size(),
          ErrorKind::kAlignment, "loss gradients not aligned with triplets");
  require(num_anchors <= stacked.rows(), ErrorKind::kShape, "anchor block larger than the embedding batch");
  Matrix grad(stacked.rows(), stacked.dim());

  auto scatter = [&](std::size_t a, std::size_t b, double g) {
    if (g == 0.0) return;
    const auto ea = stacked.row(a);
    const auto eb = stacked.row(b);
    const double d = unit_distance(ea, eb);
    if (d < 1e-12) return;  // coincident points: the distance has no defined gradient
    auto ga = grad.row(a);
    auto gb = grad.row(b);
    for (std::size_t k = 0; k < ea.size(); ++k) {
      ga[k] -= g * eb[k] / d;
      gb[k] -= g * ea[k] / d;
    }
  };
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const TripletRows rows = stacked_rows(triplets[i], num_anchors);
    scatter(rows.anchor, rows.positive, loss.grad_d_pos[i]);
    scatter(rows.neg_near, rows.neg_far, loss.grad_d_neg[i]);
  }
  return grad;
}

}  // namespace bdl
