#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace replykit {

// Row-major dense matrix view over an externally owned parameter block.
// Models keep all weights in one flat std::vector<double> so the optimizer
// and finite-difference checks can treat a model as a single vector.
struct MatView {
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  std::span<double> row(std::size_t r) { return {data + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data + r * cols, cols}; }
  std::size_t size() const { return rows * cols; }
};

struct ConstMatView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  ConstMatView() = default;
  ConstMatView(const double* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  ConstMatView(const MatView& m) : data(m.data), rows(m.rows), cols(m.cols) {}

  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  std::span<const double> row(std::size_t r) const { return {data + r * cols, cols}; }
  std::size_t size() const { return rows * cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// out = M * v
inline void matvec(ConstMatView m, std::span<const double> v, std::span<double> out) {
  assert(m.cols == v.size() && m.rows == out.size());
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), v);
}

// out = M^T * v
inline void matvec_t(ConstMatView m, std::span<const double> v, std::span<double> out) {
  assert(m.rows == v.size() && m.cols == out.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double vr = v[r];
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += vr * row[c];
  }
}

// G += a * b^T
inline void add_outer(MatView g, std::span<const double> a, std::span<const double> b) {
  assert(g.rows == a.size() && g.cols == b.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    auto row = g.row(r);
    for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
  }
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace replykit
