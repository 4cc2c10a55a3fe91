// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Dense GEMM kernels in two flavours. `serial` is the reference loop nest and
// `omp` splits output rows across OpenMP threads. Both accumulate each output
// element over the inner dimension in the same order, so their results are
// bitwise identical for any thread count.
//
// Layouts (row-major):
//   gemm_nn: C[m x n] = A[m x k] * B[k x n]
//   gemm_nt: C[m x n] = A[m x k] * B[n x k]^T
//   gemm_tn: C[m x n] = A[k x m]^T * B[k x n]
// With accumulate=false C is overwritten, otherwise the product is added.

namespace mgtd::kernels {

namespace serial {
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
}  // namespace serial

namespace omp {
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
}  // namespace omp

/// Multiply-add count below which the omp kernels stay on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 16;

// Entry points used by the rest of the library.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  omp::gemm_nn(m, n, k, a, b, c, accumulate);
}
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  omp::gemm_nt(m, n, k, a, b, c, accumulate);
}
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  omp::gemm_tn(m, n, k, a, b, c, accumulate);
}

int max_threads();

}  // namespace mgtd::kernels
