#pragma once

// Plain loops over contiguous row-major buffers. Summation order is fixed
// (ascending inner index), so results are reproducible run to run.

#include <cstddef>

#include "afg/tensor.hpp"

namespace afg::kernels {

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

// C[m x n] (+)= A[m x k] * B[n x k]^T
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

// C[m x n] (+)= A[k x m]^T * B[k x n]
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

}  // namespace afg::kernels
