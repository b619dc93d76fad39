#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gebc::kernels {

// Row-major GEMM kernels. Each has a serial reference and an OpenMP variant
// parallelized over output rows with identical per-row arithmetic, so the
// two produce bitwise-equal results. `use_parallel()` gates dispatch.

inline bool& parallel_enabled() {
  static bool enabled = true;
  return enabled;
}

inline bool use_parallel(size_t m, size_t work_per_row) {
#ifdef _OPENMP
  return parallel_enabled() && m >= 4 && m * work_per_row >= 16384;
#else
  (void)m;
  (void)work_per_row;
  return false;
#endif
}

// C[M,N] = A[M,K] * B[K,N]
template <typename T>
void gemm_nn_serial(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = T(0);
    const T* ai = a + i * k;
    for (size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_nn_omp(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const size_t i = static_cast<size_t>(ii);
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = T(0);
    const T* ai = a + i * k;
    for (size_t p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_nn(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
  if (use_parallel(m, k * n)) {
    gemm_nn_omp(c, a, b, m, k, n);
  } else {
    gemm_nn_serial(c, a, b, m, k, n);
  }
}

// C[M,N] = A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt_serial(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

template <typename T>
void gemm_nt_omp(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const size_t i = static_cast<size_t>(ii);
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

template <typename T>
void gemm_nt(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
  if (use_parallel(m, k * n)) {
    gemm_nt_omp(c, a, b, m, k, n);
  } else {
    gemm_nt_serial(c, a, b, m, k, n);
  }
}

// C[M,N] = A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn_serial(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (size_t p = 0; p < k; ++p) {
      const T av = a[p * m + i];
      const T* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_tn_omp(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < static_cast<long long>(m); ++ii) {
    const size_t i = static_cast<size_t>(ii);
    T* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (size_t p = 0; p < k; ++p) {
      const T av = a[p * m + i];
      const T* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void gemm_tn(T* c, const T* a, const T* b, size_t m, size_t k, size_t n) {
  if (use_parallel(m, k * n)) {
    gemm_tn_omp(c, a, b, m, k, n);
  } else {
    gemm_tn_serial(c, a, b, m, k, n);
  }
}

}  // namespace gebc::kernels
