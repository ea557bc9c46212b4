#include "canids/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "canids/error.hpp"

namespace canids {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(where) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

template <typename F>
DenseMatrix map(const DenseMatrix& m, const char* where, F f) {
  require_finite(m, where);
  DenseMatrix out(m.rows(), m.cols());
  auto src = m.values();
  auto dst = out.values();
  const auto n = static_cast<std::ptrdiff_t>(src.size());
#pragma omp parallel for schedule(static) if (src.size() > kParallelWork)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = f(src[i]);
  require_finite(out, where);
  return out;
}

template <typename F>
DenseMatrix zip(const DenseMatrix& a, const DenseMatrix& b, const char* where, F f) {
  require_same_shape(a, b, where);
  require_finite(a, where);
  require_finite(b, where);
  DenseMatrix out(a.rows(), a.cols());
  auto x = a.values();
  auto y = b.values();
  auto dst = out.values();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static) if (x.size() > kParallelWork)
  for (std::ptrdiff_t i = 0; i < n; ++i) dst[i] = f(x[i], y[i]);
  require_finite(out, where);
  return out;
}

void check_segments(std::span<const std::size_t> segments, std::size_t rows, std::size_t num_segments,
                    const char* where) {
  if (segments.size() != rows) {
    throw Error(ErrorCode::ShapeMismatch, std::string(where) + ": segment vector length " +
                                              std::to_string(segments.size()) + " != rows " +
                                              std::to_string(rows));
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto s = segments[i];
    if (s >= num_segments) {
      throw Error(ErrorCode::SegmentOutOfRange,
                  std::string(where) + ": segment " + std::to_string(s) + " at row " + std::to_string(i));
    }
    if (i > 0 && s < segments[i - 1]) {
      throw Error(ErrorCode::SegmentOutOfRange, std::string(where) + ": segments decrease at row " +
                                                    std::to_string(i));
    }
    if (s > expected) {
      throw Error(ErrorCode::EmptySegment, std::string(where) + ": segment " + std::to_string(expected));
    }
    if (s == expected) ++expected;
  }
  if (expected != num_segments) {
    throw Error(ErrorCode::EmptySegment, std::string(where) + ": segment " + std::to_string(expected));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "DenseMatrix: " + std::to_string(values_.size()) +
                                              " values for " + std::to_string(rows) + "x" +
                                              std::to_string(cols));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorCode::ShapeMismatch, "DenseMatrix: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const DenseMatrix& m, const char* where) {
  if (!m.all_finite()) throw Error(ErrorCode::FiniteViolation, where);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                                              "x" + std::to_string(b.cols()));
  }
  require_finite(a, "matmul");
  require_finite(b, "matmul");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  DenseMatrix out(n, m);
  const auto rows = static_cast<std::ptrdiff_t>(n);
  // i-k-j order: each out(i, j) still accumulates a(i, k) * b(k, j) in
  // ascending k, the same sequence as the textbook triple loop.
#pragma omp parallel for schedule(static) if (n * inner * m > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    auto dst = out.row(static_cast<std::size_t>(i));
    const auto lhs = a.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < inner; ++k) {
      const double scale_k = lhs[k];
      const auto rhs = b.row(k);
      for (std::size_t j = 0; j < m; ++j) dst[j] += scale_k * rhs[j];
    }
  }
  require_finite(out, "matmul");
  return out;
}

DenseMatrix transpose(const DenseMatrix& m) {
  require_finite(m, "transpose");
  DenseMatrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

DenseMatrix scale(const DenseMatrix& m, double c) {
  if (!std::isfinite(c)) throw Error(ErrorCode::FiniteViolation, "scale: factor");
  return map(m, "scale", [c](double x) { return x * c; });
}

DenseMatrix elementwise_mul(const DenseMatrix& a, const DenseMatrix& b) {
  return zip(a, b, "elementwise_mul", [](double x, double y) { return x * y; });
}

DenseMatrix relu(const DenseMatrix& m) {
  return map(m, "relu", [](double x) { return x > 0.0 ? x : 0.0; });
}

DenseMatrix relu_backward(const DenseMatrix& pre_activation, const DenseMatrix& upstream) {
  return zip(pre_activation, upstream, "relu_backward",
             [](double x, double g) { return x > 0.0 ? g : 0.0; });
}

DenseMatrix softmax_rows(const DenseMatrix& m) {
  require_finite(m, "softmax_rows");
  DenseMatrix out(m.rows(), m.cols());
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
#pragma omp parallel for schedule(static) if (m.size() > kParallelWork)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto src = m.row(static_cast<std::size_t>(r));
    auto dst = out.row(static_cast<std::size_t>(r));
    if (src.empty()) continue;
    const double peak = *std::max_element(src.begin(), src.end());
    double total = 0.0;
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = std::exp(src[c] - peak);
      total += dst[c];
    }
    for (auto& v : dst) v /= total;
  }
  return out;
}

DenseMatrix segment_mean(const DenseMatrix& m, std::span<const std::size_t> segments,
                         std::size_t num_segments) {
  require_finite(m, "segment_mean");
  check_segments(segments, m.rows(), num_segments, "segment_mean");
  // Segments are contiguous runs; find run starts, then reduce each run
  // independently in row order.
  std::vector<std::size_t> starts(num_segments + 1, 0);
  for (std::size_t i = 0, s = 0; i < segments.size(); ++i) {
    if (i == 0 || segments[i] != segments[i - 1]) starts[s++] = i;
  }
  starts[num_segments] = segments.size();
  DenseMatrix out(num_segments, m.cols());
  const auto count = static_cast<std::ptrdiff_t>(num_segments);
#pragma omp parallel for schedule(static) if (m.size() > kParallelWork)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    auto dst = out.row(static_cast<std::size_t>(s));
    const auto begin = starts[static_cast<std::size_t>(s)];
    const auto end = starts[static_cast<std::size_t>(s) + 1];
    for (auto r = begin; r < end; ++r) {
      const auto src = m.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    const auto n = static_cast<double>(end - begin);
    for (auto& v : dst) v /= n;
  }
  return out;
}

DenseMatrix segment_mean_backward(const DenseMatrix& upstream, std::span<const std::size_t> segments,
                                  std::size_t num_rows) {
  require_finite(upstream, "segment_mean_backward");
  check_segments(segments, num_rows, upstream.rows(), "segment_mean_backward");
  std::vector<double> counts(upstream.rows(), 0.0);
  for (auto s : segments) counts[s] += 1.0;
  DenseMatrix out(num_rows, upstream.cols());
  for (std::size_t r = 0; r < num_rows; ++r) {
    const auto s = segments[r];
    const auto src = upstream.row(s);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / counts[s];
  }
  return out;
}

DenseMatrix dropout_mask(SeededRng& rng, std::size_t rows, std::size_t cols, double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorCode::BadProbability, "dropout_mask: p=" + std::to_string(p));
  }
  const double keep_scale = 1.0 / (1.0 - p);
  DenseMatrix mask(rows, cols);
  // Sequential on purpose: the mask must be a pure function of the rng state.
  for (auto& v : mask.values()) v = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

DenseMatrix add_row_broadcast(const DenseMatrix& m, const DenseMatrix& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "add_row_broadcast: row vector shape");
  }
  require_finite(m, "add_row_broadcast");
  require_finite(row, "add_row_broadcast");
  DenseMatrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += row(0, c);
  }
  require_finite(out, "add_row_broadcast");
  return out;
}

DenseMatrix column_sums(const DenseMatrix& m) {
  require_finite(m, "column_sums");
  DenseMatrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto src = m.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) out(0, c) += src[c];
  }
  require_finite(out, "column_sums");
  return out;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  require_finite(dense, "SparseMatrix");
  SparseMatrix s;
  s.rows_ = dense.rows();
  s.cols_ = dense.cols();
  s.row_start_.reserve(dense.rows() + 1);
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) {
        s.cols_index_.push_back(c);
        s.values_.push_back(dense(r, c));
      }
    }
    s.row_start_.push_back(s.values_.size());
  }
  return s;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto cols = row_columns(r);
    const auto vals = row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) out(r, cols[k]) = vals[k];
  }
  return out;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows_ = cols_;
  t.cols_ = rows_;
  t.row_start_.assign(cols_ + 1, 0);
  for (auto c : cols_index_) ++t.row_start_[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) t.row_start_[c + 1] += t.row_start_[c];
  t.cols_index_.resize(values_.size());
  t.values_.resize(values_.size());
  auto next = t.row_start_;
  // Rows are visited in order, so each transposed row comes out sorted.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (auto k = row_start_[r]; k < row_start_[r + 1]; ++k) {
      const auto dst = next[cols_index_[k]]++;
      t.cols_index_[dst] = r;
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

BlockDiagonal::BlockDiagonal(std::vector<DenseMatrix> blocks) {
  blocks_.reserve(blocks.size());
  offsets_.reserve(blocks.size());
  for (const auto& b : blocks) {
    if (b.rows() != b.cols()) throw Error(ErrorCode::ShapeMismatch, "BlockDiagonal: non-square block");
    blocks_.push_back(std::make_shared<const SparseMatrix>(SparseMatrix::from_dense(b)));
    offsets_.push_back(dim_);
    dim_ += b.rows();
  }
}

BlockDiagonal::BlockDiagonal(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  offsets_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    if (!b) throw Error(ErrorCode::ShapeMismatch, "BlockDiagonal: null block");
    if (b->rows() != b->cols()) throw Error(ErrorCode::ShapeMismatch, "BlockDiagonal: non-square block");
    offsets_.push_back(dim_);
    dim_ += b->rows();
  }
}

DenseMatrix BlockDiagonal::to_dense() const {
  DenseMatrix out(dim_, dim_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = *blocks_[i];
    const auto off = offsets_[i];
    for (std::size_t r = 0; r < b.rows(); ++r) {
      const auto cols = b.row_columns(r);
      const auto vals = b.row_values(r);
      for (std::size_t k = 0; k < cols.size(); ++k) out(off + r, off + cols[k]) = vals[k];
    }
  }
  return out;
}

BlockDiagonal BlockDiagonal::transposed() const {
  std::vector<Block> t;
  t.reserve(blocks_.size());
  for (const auto& b : blocks_) t.push_back(std::make_shared<const SparseMatrix>(b->transposed()));
  return BlockDiagonal(std::move(t));
}

DenseMatrix matmul(const BlockDiagonal& a, const DenseMatrix& b) {
  if (a.dim() != b.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "matmul(block): dim " + std::to_string(a.dim()) + " vs rows " +
                                              std::to_string(b.rows()));
  }
  require_finite(b, "matmul(block)");
  const std::size_t m = b.cols();
  DenseMatrix out(a.dim(), m);
  const auto count = static_cast<std::ptrdiff_t>(a.block_count());
#pragma omp parallel for schedule(dynamic, 4) if (a.dim() * m > kParallelWork)
  for (std::ptrdiff_t g = 0; g < count; ++g) {
    const auto& blk = a.block(static_cast<std::size_t>(g));
    const auto off = a.offset(static_cast<std::size_t>(g));
    for (std::size_t i = 0; i < blk.rows(); ++i) {
      auto dst = out.row(off + i);
      const auto cols = blk.row_columns(i);
      const auto vals = blk.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const double scale_k = vals[k];
        const auto rhs = b.row(off + cols[k]);
        for (std::size_t j = 0; j < m; ++j) dst[j] += scale_k * rhs[j];
      }
    }
  }
  require_finite(out, "matmul(block)");
  return out;
}

}  // namespace canids
