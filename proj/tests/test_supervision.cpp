#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bdl/error.hpp"
#include "bdl/supervision.hpp"
#include "test_support.hpp"

using namespace bdl;

namespace {

MinedTriplet triplet(double d_pos, double d_neg) {
  MinedTriplet t;
  t.d_pos = d_pos;
  t.d_neg = d_neg;
  return t;
}

PatchBatch clustered_batch(std::size_t n, std::size_t dim, double noise, std::mt19937_64& rng) {
  PatchBatch b;
  const Matrix centers = testing::gaussian(n, dim, rng);
  const Matrix jitter = testing::gaussian(n, dim, rng, noise);
  b.anchors = centers;
  b.positives = centers;
  for (std::size_t k = 0; k < jitter.data().size(); ++k) b.positives.data()[k] += jitter.data()[k];
  for (std::size_t i = 0; i < n; ++i) {
    b.positive_owner.push_back(i);
    b.cluster_ids.push_back(static_cast<std::int32_t>(i));
  }
  return b;
}

std::vector<MinedTriplet> mine_with(const DescriptorNet& net, const PatchBatch& b) {
  return mine_batch(embed(net, b.anchors), embed(net, b.positives), b.positive_owner, b.cluster_ids);
}

}  // namespace

TEST_CASE("confidence is the negative minus the positive distance") {
  CHECK(confidence(0.4, 0.4) == 0.0);
  CHECK(confidence(0.3, 1.1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(confidence(1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(weight(confidence(1.0, 0.2), {}) == 0.0);
}

TEST_CASE("weight: branches, knots and the exponential ramp") {
  const SupervisorConfig cfg;
  CHECK(weight(0.1, cfg) == 1.0);
  CHECK(weight(-0.7, cfg) == 0.0);
  CHECK(weight(cfg.upper, cfg) == 1.0);
  CHECK(weight(cfg.threshold, cfg) == 0.0);

  const double mid = 0.5 * (cfg.upper + cfg.threshold);
  const double expected = (std::exp(3.0 * (mid - cfg.threshold)) - 1.0) / (std::exp(3.0 * (cfg.upper - cfg.threshold)) - 1.0);
  CHECK(weight(mid, cfg) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(weight(mid, cfg) > 0.0);
  CHECK(weight(mid, cfg) < 1.0);

  // Continuity just inside both knots.
  CHECK(weight(cfg.upper - 1e-9, cfg) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(weight(cfg.threshold + 1e-9, cfg) == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("weight is non-decreasing and flat outside the ramp") {
  const SupervisorConfig cfg;
  double prev = -1.0;
  for (int k = 0; k <= 4000; ++k) {
    const double i = -2.0 + 4.0 * k / 4000.0;
    const double w = weight(i, cfg);
    CHECK(w >= prev);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    if (i >= cfg.upper) CHECK(w == 1.0);
    if (i <= cfg.threshold) CHECK(w == 0.0);
    prev = w;
  }
}

TEST_CASE("supervisor config validation") {
  SupervisorConfig cfg;
  cfg.threshold = 0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.shape_k = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.mode = SupervisorMode::kPretrained;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("weighted balance loss against a loop oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 1.9);
  std::uniform_real_distribution<double> w01(0.0, 1.0);
  std::vector<MinedTriplet> t;
  ConfidenceWeights w;
  for (int i = 0; i < 24; ++i) {
    t.push_back(triplet(u(rng), u(rng)));
    w.confidence.push_back(0.0);
    w.weight.push_back(i % 5 == 0 ? 0.0 : w01(rng));
  }
  const BalanceLossConfig cfg;
  const auto out = weighted_balance_loss(t, w, cfg);

  std::vector<double> d_neg;
  for (const auto& x : t) d_neg.push_back(x.d_neg);
  std::sort(d_neg.begin(), d_neg.end());
  const double p = 2.05 * 0.5 * (d_neg[11] + d_neg[12]);
  double loss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    loss += w.weight[i] * (t[i].d_pos * t[i].d_pos + (t[i].d_neg - p) * (t[i].d_neg - p));
  loss /= static_cast<double>(t.size());

  CHECK(std::abs(out.loss - loss) <= 1e-12 * std::abs(loss));
  CHECK(out.p_neg_used == doctest::Approx(p).epsilon(1e-14));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(out.grad_d_pos[i] == doctest::Approx(w.weight[i] * 2.0 * t[i].d_pos / 24.0).epsilon(1e-12));
    CHECK(out.grad_d_neg[i] == doctest::Approx(w.weight[i] * 2.0 * (t[i].d_neg - p) / 24.0).epsilon(1e-12));
    if (w.weight[i] == 0.0) {
      CHECK(out.grad_d_pos[i] == 0.0);
      CHECK(out.grad_d_neg[i] == 0.0);
    }
  }
}

TEST_CASE("weighted balance loss: identity and annihilation") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 1.9);
  std::vector<MinedTriplet> t;
  for (int i = 0; i < 10; ++i) t.push_back(triplet(u(rng), u(rng)));

  const auto ones = weighted_balance_loss(t, unit_weights(t), {});
  const auto plain = balance_loss(t, {});
  CHECK(ones.loss == plain.loss);
  CHECK(ones.grad_d_pos == plain.grad_d_pos);
  CHECK(ones.grad_d_neg == plain.grad_d_neg);

  ConfidenceWeights zero = unit_weights(t);
  std::ranges::fill(zero.weight, 0.0);
  const auto none = weighted_balance_loss(t, zero, {});
  CHECK(none.loss == 0.0);
  for (double g : none.grad_d_pos) CHECK(g == 0.0);
  for (double g : none.grad_d_neg) CHECK(g == 0.0);

  ConfidenceWeights short_w = unit_weights(t);
  short_w.weight.pop_back();
  try {
    weighted_balance_loss(t, short_w, {});
    FAIL("expected an alignment error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kAlignment);
  }
}

TEST_CASE("self supervision reproduces the miner's distances") {
  std::mt19937_64 rng(5);
  const DescriptorNet net = DescriptorNet::glorot({10, 16, 8}, Activation::kTanh, 3);
  const PatchBatch b = clustered_batch(12, 10, 0.3, rng);
  const auto t = mine_with(net, b);
  const auto w = supervise_batch(Supervisor::self_snapshot(net), b, t, {});
  REQUIRE(w.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(w.confidence[i] == doctest::Approx(t[i].d_neg - t[i].d_pos).epsilon(1e-12));
  // Never more than one extra pass over the batch's patches.
  CHECK(w.embedded_rows <= 2 * b.size());
}

TEST_CASE("pretrained supervisor with a wider output space") {
  std::mt19937_64 rng(6);
  const DescriptorNet net = DescriptorNet::glorot({10, 16, 8}, Activation::kTanh, 3);
  const DescriptorNet wide = DescriptorNet::glorot({10, 32, 16}, Activation::kTanh, 4);
  const PatchBatch b = clustered_batch(12, 10, 0.3, rng);
  const auto t = mine_with(net, b);
  const auto w = supervise_batch(Supervisor::pretrained(wide), b, t, {});
  REQUIRE(w.size() == t.size());
  for (double x : w.weight) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
  const auto loss = weighted_balance_loss(t, w, {});
  CHECK(loss.grad_d_pos.size() == t.size());

  const DescriptorNet narrow_input = DescriptorNet::glorot({9, 16, 8}, Activation::kTanh, 4);
  try {
    supervise_batch(Supervisor::pretrained(narrow_input), b, t, {});
    FAIL("expected a checkpoint error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCheckpoint);
  }
}

TEST_CASE("well separated clusters are all trusted") {
  // Orthogonal one-hot centers, positives equal to anchors: I = sqrt(2) >> upper.
  const std::size_t n = 6;
  PatchBatch b;
  b.anchors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    b.anchors(i, i) = 1.0;
    b.positive_owner.push_back(i);
    b.cluster_ids.push_back(static_cast<std::int32_t>(i));
  }
  b.positives = b.anchors;
  const DescriptorNet id = DescriptorNet::identity(n);
  const auto t = mine_with(id, b);
  const auto w = supervise_batch(Supervisor::pretrained(id), b, t, {});
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(w.confidence[i] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(w.weight[i] == 1.0);
  }
}
