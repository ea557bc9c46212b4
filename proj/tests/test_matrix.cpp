#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "canids/error.hpp"
#include "canids/matrix.hpp"
#include "canids/rng.hpp"

namespace canids {
namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double zero_share = 0.0) {
  SeededRng rng(seed);
  DenseMatrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform() < zero_share ? 0.0 : rng.uniform(-2.0, 2.0);
  return m;
}

DenseMatrix triple_loop(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::EmptyInput;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TEST(DenseMatrix, Construction) {
  const DenseMatrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(DenseMatrix::identity(3)(2, 2), 1.0);
  EXPECT_EQ(code_of([] { DenseMatrix(2, 2, std::vector<double>(3)); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([] { DenseMatrix{{1, 2}, {3}}; }), ErrorCode::ShapeMismatch);
}

TEST(Matmul, SmallExample) {
  const DenseMatrix a{{1, 2}, {3, 4}};
  const DenseMatrix b{{5, 6}, {7, 8}};
  EXPECT_EQ(matmul(a, b), (DenseMatrix{{19, 22}, {43, 50}}));
}

TEST(Matmul, AgainstTripleLoopOracle) {
  for (std::size_t n : {1u, 7u, 64u, 301u}) {
    const auto a = random_matrix(n, n + 3, n);
    const auto b = random_matrix(n + 3, 8, n + 100);
    const auto expected = triple_loop(a, b);
    EXPECT_EQ(matmul(a, b), expected) << "n=" << n;
    EXPECT_EQ(serial::matmul(a, b), expected) << "n=" << n;
  }
}

TEST(Matmul, ParallelMatchesSerialOnLargeInput) {
  const auto a = random_matrix(600, 600, 1);
  const auto b = random_matrix(600, 8, 2);
  EXPECT_EQ(matmul(a, b), serial::matmul(a, b));
}

TEST(Matmul, Errors) {
  EXPECT_EQ(code_of([] { matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)); }), ErrorCode::ShapeMismatch);
  DenseMatrix a(2, 2);
  a(0, 1) = kNaN;
  EXPECT_EQ(code_of([&] { matmul(a, DenseMatrix(2, 2)); }), ErrorCode::FiniteViolation);
  DenseMatrix big(1, 1, 1e200);
  EXPECT_EQ(code_of([&] { matmul(big, big); }), ErrorCode::FiniteViolation);
}

TEST(Elementwise, Operations) {
  const DenseMatrix a{{1, -2}, {0, 4}};
  const DenseMatrix b{{3, 5}, {-1, 0.5}};
  EXPECT_EQ(add(a, b), (DenseMatrix{{4, 3}, {-1, 4.5}}));
  EXPECT_EQ(elementwise_mul(a, b), (DenseMatrix{{3, -10}, {0, 2}}));
  EXPECT_EQ(scale(a, -2.0), (DenseMatrix{{-2, 4}, {0, -8}}));
  EXPECT_EQ(transpose(a), (DenseMatrix{{1, 0}, {-2, 4}}));
  EXPECT_EQ(relu(a), (DenseMatrix{{1, 0}, {0, 4}}));
  EXPECT_EQ(relu_backward(a, b), (DenseMatrix{{3, 0}, {0, 0.5}}));
  EXPECT_EQ(code_of([&] { add(a, DenseMatrix(2, 3)); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { scale(a, kNaN); }), ErrorCode::FiniteViolation);
}

TEST(Softmax, RowsSumToOneAndMatchFormula) {
  const auto m = random_matrix(50, 2, 7);
  const auto s = softmax_rows(m);
  for (std::size_t r = 0; r < 50; ++r) {
    const double e0 = std::exp(m(r, 0)), e1 = std::exp(m(r, 1));
    EXPECT_NEAR(s(r, 0), e0 / (e0 + e1), 1e-15);
    EXPECT_NEAR(s(r, 0) + s(r, 1), 1.0, 1e-15);
  }
  EXPECT_EQ(s, serial::softmax_rows(m));
}

TEST(Softmax, StableForLargeLogits) {
  const auto s = softmax_rows(DenseMatrix{{1000.0, 0.0}, {-1000.0, -1000.0}});
  EXPECT_EQ(s(0, 0), 1.0);
  EXPECT_EQ(s(0, 1), 0.0);
  EXPECT_EQ(s(1, 0), 0.5);
}

TEST(SegmentMean, AgainstOracle) {
  const auto m = random_matrix(40, 8, 3);
  std::vector<std::size_t> seg;
  for (std::size_t i = 0; i < 40; ++i) seg.push_back(i < 5 ? 0 : i < 6 ? 1 : i < 30 ? 2 : 3);
  const auto out = segment_mean(m, seg, 4);
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t c = 0; c < 8; ++c) {
      double sum = 0.0, n = 0.0;
      for (std::size_t i = 0; i < 40; ++i) {
        if (seg[i] == s) {
          sum += m(i, c);
          n += 1.0;
        }
      }
      EXPECT_NEAR(out(s, c), sum / n, 1e-14);
    }
  }
  EXPECT_EQ(out, serial::segment_mean(m, seg, 4));
}

TEST(SegmentMean, Errors) {
  const DenseMatrix m(3, 2);
  const std::vector<std::size_t> gap = {0, 0, 2};
  const std::vector<std::size_t> down = {0, 1, 0};
  const std::vector<std::size_t> out_of_range = {0, 1, 5};
  const std::vector<std::size_t> short_seg = {0, 1};
  EXPECT_EQ(code_of([&] { segment_mean(m, gap, 3); }), ErrorCode::EmptySegment);
  EXPECT_EQ(code_of([&] { segment_mean(m, down, 2); }), ErrorCode::SegmentOutOfRange);
  EXPECT_EQ(code_of([&] { segment_mean(m, out_of_range, 3); }), ErrorCode::SegmentOutOfRange);
  EXPECT_EQ(code_of([&] { segment_mean(m, short_seg, 2); }), ErrorCode::ShapeMismatch);
  const std::vector<std::size_t> ok = {0, 0, 1};
  EXPECT_EQ(code_of([&] { segment_mean(m, ok, 3); }), ErrorCode::EmptySegment);
}

TEST(SegmentMean, BackwardIsAdjoint) {
  // <segment_mean(x), u> == <x, segment_mean_backward(u)> for all x, u.
  const std::vector<std::size_t> seg = {0, 0, 0, 1, 2, 2};
  const auto x = random_matrix(6, 3, 11);
  const auto u = random_matrix(3, 3, 12);
  const auto fx = segment_mean(x, seg, 3);
  const auto bu = segment_mean_backward(u, seg, 6);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) lhs += fx.values()[i] * u.values()[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.values()[i] * bu.values()[i];
  EXPECT_NEAR(lhs, rhs, 1e-13);
}

TEST(Dropout, MaskValuesAndRate) {
  SeededRng rng(5);
  const auto mask = dropout_mask(rng, 200, 50, 0.3);
  std::size_t zeros = 0;
  for (auto v : mask.values()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
    }
  }
  // 10000 Bernoulli(0.3) draws: sd ~ 46.
  EXPECT_NEAR(static_cast<double>(zeros), 3000.0, 250.0);
  SeededRng again(5);
  EXPECT_EQ(dropout_mask(again, 200, 50, 0.3), mask);
}

TEST(Dropout, ZeroProbabilityKeepsAll) {
  SeededRng rng(1);
  EXPECT_EQ(dropout_mask(rng, 3, 3, 0.0), DenseMatrix(3, 3, 1.0));
  EXPECT_EQ(code_of([&] { dropout_mask(rng, 1, 1, 1.0); }), ErrorCode::BadProbability);
  EXPECT_EQ(code_of([&] { dropout_mask(rng, 1, 1, -0.1); }), ErrorCode::BadProbability);
}

TEST(Broadcast, RowAndColumnSums) {
  const DenseMatrix m{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(add_row_broadcast(m, DenseMatrix{{10, 20}}), (DenseMatrix{{11, 22}, {13, 24}, {15, 26}}));
  EXPECT_EQ(column_sums(m), (DenseMatrix{{9, 12}}));
  EXPECT_EQ(code_of([&] { add_row_broadcast(m, DenseMatrix{{1, 2, 3}}); }), ErrorCode::ShapeMismatch);
}

TEST(SparseMatrix, RoundTripAndTranspose) {
  const auto d = random_matrix(13, 9, 4, 0.7);
  const auto s = SparseMatrix::from_dense(d);
  EXPECT_EQ(s.to_dense(), d);
  std::size_t nnz = 0;
  for (auto v : d.values()) nnz += v != 0.0;
  EXPECT_EQ(s.nonzeros(), nnz);
  EXPECT_EQ(s.transposed().to_dense(), transpose(d));
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto cols = s.row_columns(r);
    for (std::size_t k = 1; k < cols.size(); ++k) EXPECT_LT(cols[k - 1], cols[k]);
  }
}

TEST(BlockDiagonal, MatchesDenseProduct) {
  std::vector<DenseMatrix> blocks;
  for (std::size_t i = 0; i < 30; ++i) blocks.push_back(random_matrix(1 + i % 7, 1 + i % 7, 40 + i, 0.5));
  const BlockDiagonal a(blocks);
  const auto dense = a.to_dense();
  for (std::size_t i = 0, off = 0; i < blocks.size(); off += blocks[i].rows(), ++i) {
    EXPECT_EQ(a.offset(i), off);
  }
  // Off-diagonal blocks are zero.
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t r = 0; r < dense.rows(); ++r) {
      const bool inside = r >= a.offset(i) && r < a.offset(i) + blocks[i].rows();
      for (std::size_t c = a.offset(i); c < a.offset(i) + blocks[i].rows(); ++c) {
        if (!inside) {
          EXPECT_EQ(dense(r, c), 0.0);
        }
      }
    }
  }
  const auto b = random_matrix(a.dim(), 8, 9);
  EXPECT_EQ(matmul(a, b), triple_loop(dense, b));
  EXPECT_EQ(matmul(a, b), serial::matmul(a, b));
  EXPECT_EQ(a.transposed().to_dense(), transpose(dense));
}

TEST(BlockDiagonal, Errors) {
  EXPECT_EQ(code_of([] { BlockDiagonal(std::vector<DenseMatrix>{DenseMatrix(2, 3)}); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([] { BlockDiagonal(std::vector<BlockDiagonal::Block>{nullptr}); }), ErrorCode::ShapeMismatch);
  const BlockDiagonal a(std::vector<DenseMatrix>{DenseMatrix::identity(3)});
  EXPECT_EQ(code_of([&] { matmul(a, DenseMatrix(2, 2)); }), ErrorCode::ShapeMismatch);
}

TEST(MaxAbsDiff, Basic) {
  EXPECT_EQ(max_abs_diff(DenseMatrix{{1, 2}}, DenseMatrix{{1.5, -1}}), 3.0);
}

}  // namespace
}  // namespace canids
