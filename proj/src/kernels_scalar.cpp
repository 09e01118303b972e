#include "sggan/kernels.hpp"

#include <cstdint>

#include "sggan/threadpool.hpp"

namespace sggan::kern {
namespace {

void s_add(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(static_cast<int64_t>(n), 32768,
                                      [&](int64_t i0, int64_t i1) {
                                        for (int64_t i = i0; i < i1; ++i) y[i] = a[i] + b[i];
                                      });
}
void s_sub(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(static_cast<int64_t>(n), 32768,
                                      [&](int64_t i0, int64_t i1) {
                                        for (int64_t i = i0; i < i1; ++i) y[i] = a[i] - b[i];
                                      });
}
void s_mul(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(static_cast<int64_t>(n), 32768,
                                      [&](int64_t i0, int64_t i1) {
                                        for (int64_t i = i0; i < i1; ++i) y[i] = a[i] * b[i];
                                      });
}
void s_div(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(static_cast<int64_t>(n), 32768,
                                      [&](int64_t i0, int64_t i1) {
                                        for (int64_t i = i0; i < i1; ++i) y[i] = a[i] / b[i];
                                      });
}
void s_scale(const double* x, double a, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a * x[i];
}
void s_axpy(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
double s_dot(const double* a, const double* b, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
double s_sum(const double* x, size_t n) {
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

int64_t row_grain(size_t n, size_t k) {
  // aim for ~256k flops per chunk
  size_t work = 2 * n * k;
  if (work == 0) return 1;
  size_t g = 262144 / work;
  return static_cast<int64_t>(g < 1 ? 1 : g);
}

// C[m,n] = A[m,k] * B[k,n]
void s_gemm_nn(size_t m, size_t n, size_t k, const double* a, const double* b,
               double* c, bool acc) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(m), row_grain(n, k), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
          double* crow = c + i * n;
          if (!acc)
            for (size_t j = 0; j < n; ++j) crow[j] = 0.0;
          const double* arow = a + i * k;
          for (size_t p = 0; p < k; ++p) {
            double av = arow[p];
            const double* brow = b + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
          }
        }
      });
}

// C[m,n] = A^T * B with A stored KxM
void s_gemm_tn(size_t m, size_t n, size_t k, const double* a, const double* b,
               double* c, bool acc) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(m), row_grain(n, k), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
          double* crow = c + i * n;
          if (!acc)
            for (size_t j = 0; j < n; ++j) crow[j] = 0.0;
          for (size_t p = 0; p < k; ++p) {
            double av = a[p * m + i];
            const double* brow = b + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
          }
        }
      });
}

// C[m,n] = A * B^T with B stored NxK
void s_gemm_nt(size_t m, size_t n, size_t k, const double* a, const double* b,
               double* c, bool acc) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(m), row_grain(n, k), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
          const double* arow = a + i * k;
          double* crow = c + i * n;
          for (size_t j = 0; j < n; ++j) {
            double s = 0.0;
            const double* brow = b + j * k;
            for (size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] = acc ? crow[j] + s : s;
          }
        }
      });
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      "scalar", s_add, s_sub, s_mul, s_div, s_scale, s_axpy,
      s_dot,    s_sum, s_gemm_nn, s_gemm_tn, s_gemm_nt,
  };
  return k;
}

}  // namespace sggan::kern
