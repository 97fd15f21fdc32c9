#pragma once

#include <cstddef>

namespace mutor::kernels {

// Row-major products. Every output element is computed as
//   acc = 0; for p in [0, k): acc = fma(a[i][p], b[p][j], acc)
// and then stored (or added to the existing value when `accumulate`).
// The order is fixed and independent of m, so row i of the result depends
// only on row i of `a`: inserting or removing other rows never changes it.

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate);

// c[m x n] (+)= a[m x k] * b[n x k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

// c[m x n] (+)= a[k x m]^T * b[k x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

template <typename T>
void transpose(const T* src, T* dst, std::size_t rows, std::size_t cols);

}  // namespace mutor::kernels
