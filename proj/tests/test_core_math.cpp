#include <doctest.h>

#include <algorithm>
#include <random>

#include "bdl/core_math.hpp"
#include "bdl/error.hpp"
#include "test_support.hpp"

using namespace bdl;
using bdl::testing::naive_distance;

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

}  // namespace

TEST_CASE("l2_normalize") {
  const std::vector<double> v{3.0, 4.0};
  const auto u = l2_normalize(v);
  CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));

  const std::vector<double> e{1.0, 0.0, 0.0};
  CHECK(l2_normalize(e) == e);

  CHECK(kind_of([] { l2_normalize(std::vector<double>{0.0, 0.0}); }) == ErrorKind::kDegenerateVector);
  CHECK(kind_of([] { l2_normalize(std::vector<double>{}); }) == ErrorKind::kEmptyInput);
}

TEST_CASE("normalized batches have unit rows") {
  std::mt19937_64 rng(3);
  const auto batch = testing::unit_rows(20, 7, rng);
  for (std::size_t r = 0; r < batch.rows(); ++r) CHECK(l2_norm(batch.row(r)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pairwise distances against a double-loop oracle") {
  std::mt19937_64 rng(11);
  const auto a = testing::unit_rows(5, 3, rng);
  const auto b = testing::unit_rows(4, 3, rng);
  const auto d = pairwise_distances(a, b);
  REQUIRE(d.rows() == 5);
  REQUIRE(d.cols() == 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(d(i, j) - naive_distance(a.row(i), b.row(j))) <= 1e-12);
}

TEST_CASE("pairwise distances: hand examples and errors") {
  const EmbeddingBatch ortho(Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
  const auto d = pairwise_distances(ortho, ortho);
  CHECK(d(0, 1) == doctest::Approx(1.41421356).epsilon(1e-8));
  CHECK(d(0, 0) == 0.0);

  const EmbeddingBatch same(Matrix(3, 2, {0.6, 0.8, 0.6, 0.8, 0.6, 0.8}));
  const auto s = pairwise_distances(same);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s(i, i) == 0.0);

  std::mt19937_64 rng(2);
  const auto a = testing::unit_rows(3, 4, rng);
  const auto b = testing::unit_rows(3, 5, rng);
  CHECK(kind_of([&] { pairwise_distances(a, b); }) == ErrorKind::kShape);
}

TEST_CASE("self distances: symmetric, zero diagonal, bounded, triangle inequality") {
  std::mt19937_64 rng(5);
  const auto a = testing::unit_rows(24, 6, rng);
  const auto d = pairwise_distances(a);
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(d(i, i) == 0.0);
    for (std::size_t j = 0; j < 24; ++j) {
      CHECK(d(i, j) == d(j, i));
      CHECK(d(i, j) >= 0.0);
      CHECK(d(i, j) <= 2.0);
      for (std::size_t k = 0; k < 24; ++k) CHECK(d(i, j) <= d(i, k) + d(k, j) + 1e-9);
    }
  }
}

TEST_CASE("parallel distances are bit-identical to the serial reference") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = testing::unit_rows(33, 16, rng);
    const auto b = testing::unit_rows(17, 16, rng);
    CHECK(pairwise_distances(a, b) == reference::pairwise_distances(a, b));
    CHECK(pairwise_distances(a) == reference::pairwise_distances(a));
  }
}

TEST_CASE("median") {
  CHECK(median(std::vector<double>{3, 1, 2}) == 2.0);
  CHECK(median(std::vector<double>{1, 2, 3, 4}) == 2.5);
  CHECK(kind_of([] { median(std::vector<double>{}); }) == ErrorKind::kEmptyInput);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (std::size_t n : {1001u, 1000u}) {
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double oracle = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    CHECK(median(v) == oracle);

    std::shuffle(v.begin(), v.end(), rng);
    CHECK(median(v) == oracle);
  }
}

TEST_CASE("matrix helpers") {
  const Matrix m(3, 2, {1, 2, 3, 4, 5, 6});
  const std::vector<std::size_t> idx{2, 0};
  CHECK(m.gather(idx) == Matrix(2, 2, {5, 6, 1, 2}));
  CHECK(vstack(m, Matrix(1, 2, {7, 8})) == Matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK(kind_of([&] { vstack(m, Matrix(1, 3)); }) == ErrorKind::kShape);
}
