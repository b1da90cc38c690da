#include "bdl/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "bdl/error.hpp"

namespace bdl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorKind::kShape, "matrix data does not match its shape");
}

Matrix Matrix::gather(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < rows_, ErrorKind::kShape, "gather index out of range");
    std::ranges::copy(row(indices[i]), out.row(i).begin());
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  require(top.cols() == bottom.cols(), ErrorKind::kShape, "vstack column mismatch");
  std::vector<double> data(top.data().begin(), top.data().end());
  data.insert(data.end(), bottom.data().begin(), bottom.data().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

EmbeddingBatch EmbeddingBatch::normalized(Matrix rows) {
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto unit = l2_normalize(rows.row(r));
    std::ranges::copy(unit, rows.row(r).begin());
  }
  return EmbeddingBatch(std::move(rows));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::vector<double> l2_normalize(std::span<const double> v) {
  require(!v.empty(), ErrorKind::kEmptyInput, "cannot normalize an empty vector");
  const double norm = l2_norm(v);
  require(norm >= 1e-12, ErrorKind::kDegenerateVector, "vector norm below 1e-12");
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] / norm;
  return out;
}

double unit_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * dot(a, b)));
}

namespace {

void check_dims(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  require(a.dim() == b.dim(), ErrorKind::kShape,
          "embedding dimension mismatch (" + std::to_string(a.dim()) + " vs " +
              std::to_string(b.dim()) + ")");
}

}  // namespace

DistanceMatrix pairwise_distances(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  check_dims(a, b);
  DistanceMatrix out(a.rows(), b.rows());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) out(static_cast<std::size_t>(i), j) = unit_distance(ai, b.row(j));
  }
  return out;
}

DistanceMatrix pairwise_distances(const EmbeddingBatch& a) {
  const std::size_t n = a.rows();
  DistanceMatrix out(n, n);
  const auto rows = static_cast<std::int64_t>(n);
  // Upper triangle only; row lengths shrink so a dynamic schedule balances better.
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t si = 0; si < rows; ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t j = i + 1; j < n; ++j) out(i, j) = unit_distance(a.row(i), a.row(j));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

double median(std::span<const double> values) {
  require(!values.empty(), ErrorKind::kEmptyInput, "median of an empty list");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::ranges::nth_element(v, v.begin() + static_cast<std::ptrdiff_t>(mid));
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace reference {

DistanceMatrix pairwise_distances(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  check_dims(a, b);
  DistanceMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = unit_distance(a.row(i), b.row(j));
  return out;
}

DistanceMatrix pairwise_distances(const EmbeddingBatch& a) {
  const std::size_t n = a.rows();
  DistanceMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out(i, j) = out(j, i) = unit_distance(a.row(i), a.row(j));
  return out;
}

}  // namespace reference

}  // namespace bdl
