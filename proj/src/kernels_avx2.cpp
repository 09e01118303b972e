// AVX2/FMA kernel variants. This TU is compiled with -mavx2 -mfma; it is
// only referenced after the runtime CPU check in kernels_dispatch.cpp.

#include <cstdint>

#include "sggan/kernels.hpp"
#include "sggan/threadpool.hpp"

#if defined(SGGAN_HAVE_AVX2_BUILD)

#include <immintrin.h>

namespace sggan::kern {
namespace {

void v_add(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(n / 4), 8192, [&](int64_t q0, int64_t q1) {
        for (int64_t q = q0; q < q1; ++q) {
          size_t i = static_cast<size_t>(q) * 4;
          _mm256_storeu_pd(y + i,
                           _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        }
      });
  for (size_t i = n - n % 4; i < n; ++i) y[i] = a[i] + b[i];
}
void v_sub(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(n / 4), 8192, [&](int64_t q0, int64_t q1) {
        for (int64_t q = q0; q < q1; ++q) {
          size_t i = static_cast<size_t>(q) * 4;
          _mm256_storeu_pd(y + i,
                           _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        }
      });
  for (size_t i = n - n % 4; i < n; ++i) y[i] = a[i] - b[i];
}
void v_mul(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(n / 4), 8192, [&](int64_t q0, int64_t q1) {
        for (int64_t q = q0; q < q1; ++q) {
          size_t i = static_cast<size_t>(q) * 4;
          _mm256_storeu_pd(y + i,
                           _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        }
      });
  for (size_t i = n - n % 4; i < n; ++i) y[i] = a[i] * b[i];
}
void v_div(const double* a, const double* b, double* y, size_t n) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(n / 4), 8192, [&](int64_t q0, int64_t q1) {
        for (int64_t q = q0; q < q1; ++q) {
          size_t i = static_cast<size_t>(q) * 4;
          _mm256_storeu_pd(y + i,
                           _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        }
      });
  for (size_t i = n - n % 4; i < n; ++i) y[i] = a[i] / b[i];
}
void v_scale(const double* x, double a, double* y, size_t n) {
  __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = a * x[i];
}
void v_axpy(double a, const double* x, double* y, size_t n) {
  __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double hsum(__m256d v) {
  // fixed lane order: ((l0+l1)+l2)+l3
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

double v_dot(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}
double v_sum(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

int64_t row_grain(size_t n, size_t k) {
  size_t work = 2 * n * k;
  if (work == 0) return 1;
  size_t g = 262144 / work;
  return static_cast<int64_t>(g < 1 ? 1 : g);
}

// 4x8 register tile; A values broadcast, B rows streamed. Each C element
// accumulates over p in-order, so results do not depend on the thread
// partition.
template <bool Tn>
void gemm_bcast(size_t m, size_t n, size_t k, const double* a, const double* b,
                double* c, bool acc) {
  auto aval = [&](size_t i, size_t p) -> double {
    return Tn ? a[p * m + i] : a[i * k + p];
  };
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>((m + 3) / 4), row_grain(4 * n, k),
      [&](int64_t t0, int64_t t1) {
        for (int64_t t = t0; t < t1; ++t) {
          size_t i0 = static_cast<size_t>(t) * 4;
          size_t ilim = i0 + 4 <= m ? i0 + 4 : m;
          size_t rows = ilim - i0;
          size_t j = 0;
          if (rows == 4) {
            for (; j + 8 <= n; j += 8) {
              __m256d c00, c01, c10, c11, c20, c21, c30, c31;
              if (acc) {
                c00 = _mm256_loadu_pd(c + (i0 + 0) * n + j);
                c01 = _mm256_loadu_pd(c + (i0 + 0) * n + j + 4);
                c10 = _mm256_loadu_pd(c + (i0 + 1) * n + j);
                c11 = _mm256_loadu_pd(c + (i0 + 1) * n + j + 4);
                c20 = _mm256_loadu_pd(c + (i0 + 2) * n + j);
                c21 = _mm256_loadu_pd(c + (i0 + 2) * n + j + 4);
                c30 = _mm256_loadu_pd(c + (i0 + 3) * n + j);
                c31 = _mm256_loadu_pd(c + (i0 + 3) * n + j + 4);
              } else {
                c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
              }
              for (size_t p = 0; p < k; ++p) {
                __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                __m256d a0 = _mm256_set1_pd(aval(i0 + 0, p));
                __m256d a1 = _mm256_set1_pd(aval(i0 + 1, p));
                __m256d a2 = _mm256_set1_pd(aval(i0 + 2, p));
                __m256d a3 = _mm256_set1_pd(aval(i0 + 3, p));
                c00 = _mm256_fmadd_pd(a0, b0, c00);
                c01 = _mm256_fmadd_pd(a0, b1, c01);
                c10 = _mm256_fmadd_pd(a1, b0, c10);
                c11 = _mm256_fmadd_pd(a1, b1, c11);
                c20 = _mm256_fmadd_pd(a2, b0, c20);
                c21 = _mm256_fmadd_pd(a2, b1, c21);
                c30 = _mm256_fmadd_pd(a3, b0, c30);
                c31 = _mm256_fmadd_pd(a3, b1, c31);
              }
              _mm256_storeu_pd(c + (i0 + 0) * n + j, c00);
              _mm256_storeu_pd(c + (i0 + 0) * n + j + 4, c01);
              _mm256_storeu_pd(c + (i0 + 1) * n + j, c10);
              _mm256_storeu_pd(c + (i0 + 1) * n + j + 4, c11);
              _mm256_storeu_pd(c + (i0 + 2) * n + j, c20);
              _mm256_storeu_pd(c + (i0 + 2) * n + j + 4, c21);
              _mm256_storeu_pd(c + (i0 + 3) * n + j, c30);
              _mm256_storeu_pd(c + (i0 + 3) * n + j + 4, c31);
            }
          }
          // remaining rows: 1x8 vector kernel over the full width
          if (rows != 4) {
            for (size_t i = i0; i < ilim; ++i) {
              size_t jj = 0;
              for (; jj + 8 <= n; jj += 8) {
                __m256d c0, c1;
                if (acc) {
                  c0 = _mm256_loadu_pd(c + i * n + jj);
                  c1 = _mm256_loadu_pd(c + i * n + jj + 4);
                } else {
                  c0 = c1 = _mm256_setzero_pd();
                }
                for (size_t p = 0; p < k; ++p) {
                  __m256d av = _mm256_set1_pd(aval(i, p));
                  c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * n + jj), c0);
                  c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * n + jj + 4), c1);
                }
                _mm256_storeu_pd(c + i * n + jj, c0);
                _mm256_storeu_pd(c + i * n + jj + 4, c1);
              }
              j = jj;  // handled below with the column tail
            }
          }
          // column tail: k-outer accumulation keeps B reads contiguous
          if (j < n) {
            size_t tail = n - j;
            for (size_t i = i0; i < ilim; ++i) {
              double accv[7];
              for (size_t t = 0; t < tail; ++t) accv[t] = acc ? c[i * n + j + t] : 0.0;
              for (size_t p = 0; p < k; ++p) {
                double av = aval(i, p);
                const double* brow = b + p * n + j;
                for (size_t t = 0; t < tail; ++t) accv[t] += av * brow[t];
              }
              for (size_t t = 0; t < tail; ++t) c[i * n + j + t] = accv[t];
            }
          }
        }
      });
}

void v_gemm_nn(size_t m, size_t n, size_t k, const double* a, const double* b,
               double* c, bool acc) {
  gemm_bcast<false>(m, n, k, a, b, c, acc);
}
void v_gemm_tn(size_t m, size_t n, size_t k, const double* a, const double* b,
               double* c, bool acc) {
  gemm_bcast<true>(m, n, k, a, b, c, acc);
}

// dot-product form; B stored NxK
void v_gemm_nt(size_t m, size_t n, size_t k, const double* a, const double* b,
               double* c, bool acc) {
  ThreadPool::instance().parallel_for(
      static_cast<int64_t>(m), row_grain(n, k), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
          const double* arow = a + i * k;
          double* crow = c + i * n;
          for (size_t j = 0; j < n; ++j) {
            double s = v_dot(arow, b + j * k, k);
            crow[j] = acc ? crow[j] + s : s;
          }
        }
      });
}

}  // namespace

const Kernels* avx2_kernels_impl() {
  static const Kernels k = {
      "avx2", v_add, v_sub, v_mul, v_div, v_scale, v_axpy,
      v_dot,  v_sum, v_gemm_nn, v_gemm_tn, v_gemm_nt,
  };
  return &k;
}

}  // namespace sggan::kern

#else

namespace sggan::kern {
const Kernels* avx2_kernels_impl() { return nullptr; }
}  // namespace sggan::kern

#endif
