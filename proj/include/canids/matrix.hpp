#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "canids/rng.hpp"

namespace canids {

/// Row-major dense matrix of doubles.
///
/// Every public operation in this header validates its inputs and result:
/// a NaN or infinity raises ErrorCode::FiniteViolation instead of flowing on.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Throws FiniteViolation if any entry is NaN or infinite.
void require_finite(const DenseMatrix& m, const char* where);

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

// Parallel kernels (OpenMP). Each output element is produced by exactly one
// thread with a fixed accumulation order, so results do not depend on the
// thread count and match the serial reference bit for bit.

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& m, double c);
DenseMatrix elementwise_mul(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix relu(const DenseMatrix& m);
/// Passes `upstream` where `pre_activation` > 0; zero elsewhere, including at 0.
DenseMatrix relu_backward(const DenseMatrix& pre_activation, const DenseMatrix& upstream);

DenseMatrix softmax_rows(const DenseMatrix& m);

/// Row s of the result is the mean of the rows of `m` whose segment is s.
/// `segments` must be non-decreasing and cover every segment at least once.
DenseMatrix segment_mean(const DenseMatrix& m, std::span<const std::size_t> segments,
                         std::size_t num_segments);
/// Adjoint of segment_mean: spreads row s of `upstream` over its segment / count.
DenseMatrix segment_mean_backward(const DenseMatrix& upstream, std::span<const std::size_t> segments,
                                  std::size_t num_rows);

/// Inverted dropout mask: 0 with probability p, else 1/(1-p).
DenseMatrix dropout_mask(SeededRng& rng, std::size_t rows, std::size_t cols, double p);

/// Adds a 1 x cols row vector to every row.
DenseMatrix add_row_broadcast(const DenseMatrix& m, const DenseMatrix& row);
/// Column sums as a 1 x cols matrix.
DenseMatrix column_sums(const DenseMatrix& m);

/// Compressed sparse row matrix; column indices ascend within each row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  /// Keeps the nonzero entries of `dense`; throws FiniteViolation.
  static SparseMatrix from_dense(const DenseMatrix& dense);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_columns(std::size_t r) const {
    return {cols_index_.data() + row_start_[r], row_start_[r + 1] - row_start_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_start_[r], row_start_[r + 1] - row_start_[r]};
  }

  DenseMatrix to_dense() const;
  SparseMatrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_start_{0};
  std::vector<std::size_t> cols_index_;
  std::vector<double> values_;
};

/// Block-diagonal square matrix stored as its diagonal blocks.
///
/// Off-diagonal blocks are zero by construction. Blocks are held as shared
/// sparse matrices so batching many graphs never copies their adjacencies.
/// `to_dense()` materializes the full matrix; `matmul(BlockDiagonal,
/// DenseMatrix)` touches only stored entries and returns exactly what the
/// dense product would.
class BlockDiagonal {
 public:
  using Block = std::shared_ptr<const SparseMatrix>;

  BlockDiagonal() = default;
  explicit BlockDiagonal(std::vector<DenseMatrix> blocks);
  explicit BlockDiagonal(std::vector<Block> blocks);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  const SparseMatrix& block(std::size_t i) const { return *blocks_[i]; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }

  DenseMatrix to_dense() const;
  BlockDiagonal transposed() const;

 private:
  std::vector<Block> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
};

DenseMatrix matmul(const BlockDiagonal& a, const DenseMatrix& b);

/// Single-threaded reference kernels, kept as test oracles and benchmark
/// baselines. Straight loops, no blocking, no reordering.
namespace serial {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul(const BlockDiagonal& a, const DenseMatrix& b);
DenseMatrix segment_mean(const DenseMatrix& m, std::span<const std::size_t> segments,
                         std::size_t num_segments);
DenseMatrix softmax_rows(const DenseMatrix& m);

}  // namespace serial

}  // namespace canids
