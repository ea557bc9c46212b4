#include <cmath>
#include <string>

#include "canids/error.hpp"
#include "canids/matrix.hpp"

namespace canids::serial {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "serial::matmul");
  require_finite(a, "serial::matmul");
  require_finite(b, "serial::matmul");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  require_finite(out, "serial::matmul");
  return out;
}

DenseMatrix matmul(const BlockDiagonal& a, const DenseMatrix& b) {
  return serial::matmul(a.to_dense(), b);
}

DenseMatrix segment_mean(const DenseMatrix& m, std::span<const std::size_t> segments,
                         std::size_t num_segments) {
  require_finite(m, "serial::segment_mean");
  if (segments.size() != m.rows()) throw Error(ErrorCode::ShapeMismatch, "serial::segment_mean");
  DenseMatrix out(num_segments, m.cols());
  std::vector<double> counts(num_segments, 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto s = segments[r];
    if (s >= num_segments) throw Error(ErrorCode::SegmentOutOfRange, "serial::segment_mean");
    counts[s] += 1.0;
    for (std::size_t c = 0; c < m.cols(); ++c) out(s, c) += m(r, c);
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (counts[s] == 0.0) throw Error(ErrorCode::EmptySegment, "serial::segment_mean");
    for (std::size_t c = 0; c < m.cols(); ++c) out(s, c) /= counts[s];
  }
  return out;
}

DenseMatrix softmax_rows(const DenseMatrix& m) {
  require_finite(m, "serial::softmax_rows");
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double peak = -INFINITY;
    for (std::size_t c = 0; c < m.cols(); ++c) peak = std::max(peak, m(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) total += std::exp(m(r, c) - peak);
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = std::exp(m(r, c) - peak) / total;
  }
  return out;
}

}  // namespace canids::serial
