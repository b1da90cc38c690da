#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bdl {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Rows selected by index, in the given order.
  Matrix gather(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Stacks `bottom` under `top`; column counts must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);

/// Unit-norm descriptor rows.
class EmbeddingBatch {
 public:
  EmbeddingBatch() = default;

  /// Adopts rows that are already unit norm (e.g. produced by a forward pass).
  explicit EmbeddingBatch(Matrix unit_rows) : values_(std::move(unit_rows)) {}

  /// Normalizes every row; throws on a zero row.
  static EmbeddingBatch normalized(Matrix rows);

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t dim() const noexcept { return values_.cols(); }
  std::span<const double> row(std::size_t r) const { return values_.row(r); }
  const Matrix& matrix() const noexcept { return values_; }

 private:
  Matrix values_;
};

using DistanceMatrix = Matrix;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

std::vector<double> l2_normalize(std::span<const double> v);

/// Distance between unit vectors via sqrt(max(0, 2 - 2 a.b)).
double unit_distance(std::span<const double> a, std::span<const double> b);

/// All-pairs distances between rows of `a` and rows of `b` (OpenMP over rows of `a`).
DistanceMatrix pairwise_distances(const EmbeddingBatch& a, const EmbeddingBatch& b);

/// Self distances: exact zero diagonal, exactly symmetric.
DistanceMatrix pairwise_distances(const EmbeddingBatch& a);

double median(std::span<const double> values);

namespace reference {

DistanceMatrix pairwise_distances(const EmbeddingBatch& a, const EmbeddingBatch& b);
DistanceMatrix pairwise_distances(const EmbeddingBatch& a);

}  // namespace reference

}  // namespace bdl
