#include "numeric/kernels.hpp"

#include <algorithm>
#include <vector>

namespace afg::kernels {

void gemm_nn(const Real* __restrict a, const Real* __restrict b, Real* __restrict c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, Real{0});
  for (std::size_t i = 0; i < m; ++i) {
    Real* __restrict crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  // Transpose B once so the inner loop streams contiguously.
  thread_local std::vector<Real> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

void gemm_tn(const Real* __restrict a, const Real* __restrict b, Real* __restrict c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, Real{0});
  for (std::size_t p = 0; p < k; ++p) {
    const Real* arow = a + p * m;
    const Real* __restrict brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Real av = arow[i];
      Real* __restrict crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace afg::kernels
