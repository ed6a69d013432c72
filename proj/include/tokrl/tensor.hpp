#pragma once

#include <cstddef>
#include <vector>

namespace tokrl {

// Row-major dense matrix; a vector is rows x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// y += W x   (W: m x n, x: n, y: m)
inline void matvec_acc(const Tensor& w, const double* x, double* y) {
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = w.row(r);
    double s = 0.0;
    for (int c = 0; c < w.cols; ++c) s += wr[c] * x[c];
    y[r] += s;
  }
}

// y += W^T x  (W: m x n, x: m, y: n)
inline void matvec_t_acc(const Tensor& w, const double* x, double* y) {
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = w.row(r);
    const double xr = x[r];
    for (int c = 0; c < w.cols; ++c) y[c] += wr[c] * xr;
  }
}

// W += a b^T  (a: m, b: n, W: m x n)
inline void outer_acc(Tensor& w, const double* a, const double* b) {
  for (int r = 0; r < w.rows; ++r) {
    double* wr = w.row(r);
    const double ar = a[r];
    for (int c = 0; c < w.cols; ++c) wr[c] += ar * b[c];
  }
}

}  // namespace tokrl
