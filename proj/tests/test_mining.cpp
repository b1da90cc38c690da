#include <doctest.h>

#include <cmath>
#include <random>

#include "bdl/error.hpp"
#include "bdl/mining.hpp"
#include "oracles.hpp"

using namespace bdl;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}


Matrix random_rotation(std::size_t dim, std::mt19937_64& rng) {
  Matrix q = testing::gaussian(dim, dim, rng);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t p = 0; p < r; ++p) {
      const double d = dot(q.row(r), q.row(p));
      for (std::size_t k = 0; k < dim; ++k) q(r, k) -= d * q(p, k);
    }
    const auto u = l2_normalize(q.row(r));
    std::ranges::copy(u, q.row(r).begin());
  }
  return q;
}

EmbeddingBatch rotate(const EmbeddingBatch& e, const Matrix& q) {
  Matrix out(e.rows(), e.dim());
  for (std::size_t r = 0; r < e.rows(); ++r)
    for (std::size_t k = 0; k < e.dim(); ++k) out(r, k) = dot(q.row(k), e.row(r));
  return EmbeddingBatch(std::move(out));
}

}  // namespace

TEST_CASE("two orthogonal clusters with positives equal to anchors") {
  const EmbeddingBatch a(Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
  const std::vector<std::int32_t> ids{0, 1};
  const auto t = mine_batch(a, a, ids);
  REQUIRE(t.size() == 2);
  for (const auto& m : t) {
    CHECK(m.d_pos == 0.0);
    CHECK(m.d_neg == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }
}

TEST_CASE("the positive with the largest distance is chosen") {
  // Positives at distance 0.1 and 0.3 from anchor 0: d = sqrt(2 - 2 cos) => cos = 1 - d^2 / 2.
  auto at = [](double d) {
    const double c = 1.0 - d * d / 2.0;
    return std::vector<double>{c, std::sqrt(1.0 - c * c), 0.0};
  };
  const auto p1 = at(0.1);
  const auto p2 = at(0.3);
  const EmbeddingBatch anchors(Matrix(2, 3, {1, 0, 0, 0, 0, 1}));
  const EmbeddingBatch positives(Matrix(3, 3, {p1[0], p1[1], 0, p2[0], p2[1], 0, 0, 0, 1}));
  const std::vector<std::size_t> owner{0, 0, 1};
  const std::vector<std::int32_t> ids{5, 9};
  const auto t = mine_batch(anchors, positives, owner, ids);
  CHECK(t[0].positive == 1);
  CHECK(t[0].d_pos == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("mining equals the exhaustive oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + trial % 15;
    const std::size_t per = 1 + trial % 3;
    const testing::Case c = testing::random_case(n, per, 4, rng);
    const auto expected = testing::mining_oracle(c);
    CHECK(mine_batch(c.anchors, c.positives, c.owner, c.ids) == expected);
    CHECK(reference::mine_batch(c.anchors, c.positives, c.owner, c.ids) == expected);
  }
}

TEST_CASE("ties go to the smallest index, then to the pairing order") {
  // Every row identical: all distances zero, so the first candidate wins.
  const EmbeddingBatch same(Matrix(3, 2, {1, 0, 1, 0, 1, 0}));
  const std::vector<std::int32_t> ids{0, 1, 2};
  const auto t = mine_batch(same, same, ids);
  CHECK(t[0].negative_slot == 1);
  CHECK(t[0].pair == NegativePair::kAnchorAnchor);
  CHECK(t[1].negative_slot == 0);
  CHECK(t[2].negative_slot == 0);
}

TEST_CASE("mining properties: other cluster, minimality, rotation invariance") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const testing::Case c = testing::random_case(12, 2, 6, rng);
    const auto t = mine_batch(c.anchors, c.positives, c.owner, c.ids);
    for (const auto& m : t) {
      CHECK(c.ids[m.negative_slot] != c.ids[m.anchor]);
      CHECK(m.d_pos >= 0.0);
      CHECK(m.d_pos <= 2.0);
      CHECK(m.d_neg >= 0.0);
      CHECK(m.d_neg <= 2.0);
      for (std::size_t j = 0; j < c.anchors.rows(); ++j) {
        if (j == m.anchor) continue;
        CHECK(m.d_neg <= unit_distance(c.anchors.row(m.anchor), c.anchors.row(j)));
      }
      for (std::size_t q = 0; q < c.owner.size(); ++q)
        if (c.owner[q] != m.anchor) CHECK(m.d_neg <= unit_distance(c.anchors.row(m.anchor), c.positives.row(q)));
    }

    const Matrix rot = random_rotation(6, rng);
    const auto r = mine_batch(rotate(c.anchors, rot), rotate(c.positives, rot), c.owner, c.ids);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(r[i].positive == t[i].positive);
      CHECK(r[i].negative == t[i].negative);
      CHECK(r[i].negative_slot == t[i].negative_slot);
      CHECK(r[i].pair == t[i].pair);
    }
  }
}

TEST_CASE("mining rejects malformed batches") {
  std::mt19937_64 rng(1);
  const auto one = testing::unit_rows(1, 3, rng);
  CHECK(kind_of([&] { mine_batch(one, one, std::vector<std::int32_t>{0}); }) == ErrorKind::kInsufficientBatch);

  const auto two = testing::unit_rows(2, 3, rng);
  CHECK(kind_of([&] { mine_batch(two, two, std::vector<std::int32_t>{4, 4}); }) == ErrorKind::kProtocol);

  const std::vector<std::size_t> owner{0, 0};
  CHECK(kind_of([&] { mine_batch(two, two, owner, std::vector<std::int32_t>{1, 2}); }) == ErrorKind::kProtocol);
}

TEST_CASE("stacked row layout") {
  MinedTriplet t;
  t.anchor = 2;
  t.positive = 5;
  t.negative = 7;
  t.pair = NegativePair::kPositiveAnchor;
  const auto r = stacked_rows(t, 10);
  CHECK(r.anchor == 2);
  CHECK(r.positive == 15);
  CHECK(r.neg_near == 15);
  CHECK(r.neg_far == 7);
  t.pair = NegativePair::kAnchorPositive;
  CHECK(stacked_rows(t, 10).neg_near == 2);
  CHECK(stacked_rows(t, 10).neg_far == 17);
}
