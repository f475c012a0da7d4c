#include "ct/kernels.hpp"

#include <algorithm>
#include <cassert>

namespace ct::kernels {

namespace serial {

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
  assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> gy,
                std::span<double> gx) {
  assert(w.size() == rows * cols && gy.size() == rows && gx.size() == cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double g = gy[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) gx[c] += row[c] * g;
  }
}

void ger_acc(std::span<const double> gy, std::span<const double> x, std::span<double> gw) {
  assert(gw.size() == gy.size() * x.size());
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < gy.size(); ++r) {
    double g = gy[r];
    if (g == 0.0) continue;
    double* row = gw.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

}  // namespace serial

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
  if (rows * cols < kParallelThreshold) return serial::gemv(w, rows, cols, x, y);
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const double* row = w.data() + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[static_cast<std::size_t>(r)] = acc;
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> gy,
                std::span<double> gx) {
  if (rows * cols < kParallelThreshold) return serial::gemv_t_acc(w, rows, cols, gy, gx);
  // Threads own contiguous column blocks and sweep rows in serial order, so
  // each gx[c] sees the same additions as the reference.
  constexpr std::size_t kBlock = 64;
  const auto blocks = static_cast<std::ptrdiff_t>((cols + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t c0 = static_cast<std::size_t>(b) * kBlock;
    const std::size_t c1 = std::min(cols, c0 + kBlock);
    for (std::size_t r = 0; r < rows; ++r) {
      double g = gy[r];
      if (g == 0.0) continue;
      const double* row = w.data() + r * cols;
      for (std::size_t c = c0; c < c1; ++c) gx[c] += row[c] * g;
    }
  }
}

void ger_acc(std::span<const double> gy, std::span<const double> x, std::span<double> gw) {
  const std::size_t cols = x.size();
  if (gy.size() * cols < kParallelThreshold) return serial::ger_acc(gy, x, gw);
  const auto n = static_cast<std::ptrdiff_t>(gy.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    double g = gy[static_cast<std::size_t>(r)];
    if (g == 0.0) continue;
    double* row = gw.data() + static_cast<std::size_t>(r) * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace ct::kernels
