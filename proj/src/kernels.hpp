#pragma once

#include <cstddef>

// Dense kernels with a fixed accumulation order: every output row depends
// only on its own input row, so results do not change with batch size.
namespace inflect::nn::kernels {

// C[M x N] += A[M x K] * B[K x N]
template <class Real>
void gemm_nn(std::size_t M, std::size_t K, std::size_t N, const Real* __restrict A, const Real* __restrict B,
             Real* __restrict C) {
  for (std::size_t i = 0; i < M; ++i) {
    Real* c = C + i * N;
    const Real* a = A + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      const Real aik = a[k];
      if (aik == Real(0)) continue;
      const Real* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += aik * b[j];
    }
  }
}

// C[M x N] += A^T * B with A[K x M], B[K x N]
template <class Real>
void gemm_tn(std::size_t M, std::size_t K, std::size_t N, const Real* __restrict A, const Real* __restrict B,
             Real* __restrict C) {
  for (std::size_t k = 0; k < K; ++k) {
    const Real* b = B + k * N;
    for (std::size_t i = 0; i < M; ++i) {
      const Real aki = A[k * M + i];
      if (aki == Real(0)) continue;
      Real* c = C + i * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += aki * b[j];
    }
  }
}

// dst[cols x rows] = src[rows x cols]^T
template <class Real>
void transpose(std::size_t rows, std::size_t cols, const Real* __restrict src, Real* __restrict dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

}  // namespace inflect::nn::kernels
