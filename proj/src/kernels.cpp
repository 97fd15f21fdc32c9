#include "mutor/kernels.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mutor::kernels {
namespace {

// Register tile: MR rows of `a` times NR columns of `b`. The column count is
// two 64-byte vectors wide for the element type.
template <typename T>
constexpr std::size_t kTileCols = 128 / sizeof(T);
constexpr std::size_t kTileRows = 8;

template <typename T, std::size_t MR, std::size_t NR>
inline void tile(const T* a, const T* panel, T* c, std::size_t k, std::size_t ldc, std::size_t cols,
                 bool accumulate) {
  T acc[MR][NR] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = panel + p * NR;
    for (std::size_t r = 0; r < MR; ++r) {
      const T x = a[r * k + p];
      for (std::size_t q = 0; q < NR; ++q) acc[r][q] = std::fma(x, brow[q], acc[r][q]);
    }
  }
  if (cols == NR) {
    for (std::size_t r = 0; r < MR; ++r) {
      T* crow = c + r * ldc;
      if (accumulate) {
        for (std::size_t q = 0; q < NR; ++q) crow[q] += acc[r][q];
      } else {
        for (std::size_t q = 0; q < NR; ++q) crow[q] = acc[r][q];
      }
    }
    return;
  }
  for (std::size_t r = 0; r < MR; ++r) {
    T* crow = c + r * ldc;
    if (accumulate) {
      for (std::size_t q = 0; q < cols; ++q) crow[q] += acc[r][q];
    } else {
      for (std::size_t q = 0; q < cols; ++q) crow[q] = acc[r][q];
    }
  }
}

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> buffers[2];
  return buffers[slot];
}

}  // namespace

// Every output cell is a single fma chain over k in increasing order, so a
// cell's value does not depend on m, on n or on where it falls in a tile.
// b is copied into k x NR column panels, the last one zero-padded; rows go in
// chunks of 64.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  constexpr std::size_t NR = kTileCols<T>;
  constexpr std::size_t kChunkRows = 64;
  const std::size_t panels = (n + NR - 1) / NR;
  std::vector<T>& packed = scratch<T>(0);
  packed.assign(panels * k * NR, T(0));
  for (std::size_t s = 0; s < panels; ++s) {
    const std::size_t j0 = s * NR, w = std::min(NR, n - j0);
    T* dst = packed.data() + s * k * NR;
    for (std::size_t p = 0; p < k; ++p) std::copy(b + p * n + j0, b + p * n + j0 + w, dst + p * NR);
  }
  for (std::size_t i0 = 0; i0 < m; i0 += kChunkRows) {
    const std::size_t i1 = std::min(m, i0 + kChunkRows);
    for (std::size_t s = 0; s < panels; ++s) {
      const T* panel = packed.data() + s * k * NR;
      const std::size_t j0 = s * NR, w = std::min(NR, n - j0);
      std::size_t i = i0;
      for (; i + kTileRows <= i1; i += kTileRows) {
        tile<T, kTileRows, NR>(a + i * k, panel, c + i * n + j0, k, n, w, accumulate);
      }
      for (; i < i1; ++i) tile<T, 1, NR>(a + i * k, panel, c + i * n + j0, k, n, w, accumulate);
    }
  }
}

template <typename T>
void transpose(const T* src, T* dst, std::size_t rows, std::size_t cols) {
  constexpr std::size_t B = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += B) {
    for (std::size_t j0 = 0; j0 < cols; j0 += B) {
      const std::size_t i1 = std::min(rows, i0 + B);
      const std::size_t j1 = std::min(cols, j0 + B);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
      }
    }
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  std::vector<T>& bt = scratch<T>(1);
  bt.resize(k * n);
  transpose(b, bt.data(), n, k);
  gemm(a, bt.data(), c, m, k, n, accumulate);
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  std::vector<T>& at = scratch<T>(1);
  at.resize(m * k);
  transpose(a, at.data(), k, m);
  gemm(at.data(), b, c, m, k, n, accumulate);
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t,
                           std::size_t, bool);
template void gemm_nt<float>(const float*, const float*, float*, std::size_t, std::size_t,
                             std::size_t, bool);
template void gemm_nt<double>(const double*, const double*, double*, std::size_t, std::size_t,
                              std::size_t, bool);
template void gemm_tn<float>(const float*, const float*, float*, std::size_t, std::size_t,
                             std::size_t, bool);
template void gemm_tn<double>(const double*, const double*, double*, std::size_t, std::size_t,
                              std::size_t, bool);
template void transpose<float>(const float*, float*, std::size_t, std::size_t);
template void transpose<double>(const double*, double*, std::size_t, std::size_t);

}  // namespace mutor::kernels
