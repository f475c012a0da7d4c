#pragma once

#include <cstddef>
#include <span>

// Dense row-major kernels behind the encoder-decoder. The default versions
// split rows across OpenMP threads once the matrix is large enough to pay for
// the fork; ct::kernels::serial holds the plain loops they are tested against.
namespace ct::kernels {

/// Row count * column count above which the OpenMP path is taken.
inline constexpr std::size_t kParallelThreshold = 1 << 14;

/// y = W x, W is rows x cols.
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
/// gx += W^T gy.
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> gy,
                std::span<double> gx);
/// gw += gy x^T.
void ger_acc(std::span<const double> gy, std::span<const double> x, std::span<double> gw);

double dot(std::span<const double> a, std::span<const double> b);

namespace serial {
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols, std::span<const double> gy,
                std::span<double> gx);
void ger_acc(std::span<const double> gy, std::span<const double> x, std::span<double> gw);
}  // namespace serial

}  // namespace ct::kernels
