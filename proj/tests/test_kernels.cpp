#include <doctest.h>

#include <cmath>
#include <vector>

#include "sggan/kernels.hpp"
#include "sggan/rng.hpp"

using namespace sggan;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// independent reference for all three gemm layouts
void naive_gemm(char mode, size_t m, size_t n, size_t k, const double* a, const double* b,
                double* c, bool acc) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double s = acc ? c[i * n + j] : 0.0;
      for (size_t p = 0; p < k; ++p) {
        double av = mode == 't' ? a[p * m + i] : a[i * k + p];  // tn stores A as KxM
        double bv = mode == 'n' ? b[j * k + p] : b[p * n + j];  // nt stores B as NxK
        s += av * bv;
      }
      c[i * n + j] = s;
    }
}

void check_gemm_all(const kern::Kernels& K, Rng& rng) {
  // sizes chosen to hit vector tails and tiny edges
  const size_t dims[][3] = {{1, 1, 1},  {3, 5, 7},   {4, 8, 16}, {5, 9, 3},
                            {16, 33, 21}, {2, 64, 64}, {7, 2, 129}};
  for (auto& d : dims) {
    size_t m = d[0], n = d[1], k = d[2];
    auto a_nn = random_vec(m * k, rng);
    auto a_tn = random_vec(k * m, rng);
    auto b_nn = random_vec(k * n, rng);
    auto b_nt = random_vec(n * k, rng);
    for (bool acc : {false, true}) {
      std::vector<double> c0 = random_vec(m * n, rng);
      std::vector<double> c1 = c0, ref = c0;

      K.gemm_nn(m, n, k, a_nn.data(), b_nn.data(), c1.data(), acc);
      naive_gemm('x', m, n, k, a_nn.data(), b_nn.data(), ref.data(), acc);
      for (size_t i = 0; i < m * n; ++i)
        CHECK(std::fabs(c1[i] - ref[i]) < 1e-10 * (1 + std::fabs(ref[i])) * k);

      c1 = c0;
      ref = c0;
      K.gemm_tn(m, n, k, a_tn.data(), b_nn.data(), c1.data(), acc);
      naive_gemm('t', m, n, k, a_tn.data(), b_nn.data(), ref.data(), acc);
      for (size_t i = 0; i < m * n; ++i)
        CHECK(std::fabs(c1[i] - ref[i]) < 1e-10 * (1 + std::fabs(ref[i])) * k);

      c1 = c0;
      ref = c0;
      K.gemm_nt(m, n, k, a_nn.data(), b_nt.data(), c1.data(), acc);
      naive_gemm('n', m, n, k, a_nn.data(), b_nt.data(), ref.data(), acc);
      for (size_t i = 0; i < m * n; ++i)
        CHECK(std::fabs(c1[i] - ref[i]) < 1e-10 * (1 + std::fabs(ref[i])) * k);
    }
  }
}

}  // namespace

TEST_CASE("scalar kernels match the naive gemm reference") {
  Rng rng(11);
  check_gemm_all(kern::scalar_kernels(), rng);
}

TEST_CASE("avx2 kernels match the naive gemm reference") {
  const kern::Kernels* K = kern::avx2_kernels();
  if (!K) return;  // CPU without AVX2
  Rng rng(12);
  check_gemm_all(*K, rng);
}

TEST_CASE("scalar and simd elementwise kernels agree") {
  const kern::Kernels* V = kern::avx2_kernels();
  if (!V) return;
  const kern::Kernels& S = kern::scalar_kernels();
  Rng rng(13);
  for (size_t n : {size_t(1), size_t(3), size_t(4), size_t(7), size_t(64), size_t(1001)}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    std::vector<double> y1(n), y2(n);

    S.add(a.data(), b.data(), y1.data(), n);
    V->add(a.data(), b.data(), y2.data(), n);
    CHECK(y1 == y2);
    S.sub(a.data(), b.data(), y1.data(), n);
    V->sub(a.data(), b.data(), y2.data(), n);
    CHECK(y1 == y2);
    S.mul(a.data(), b.data(), y1.data(), n);
    V->mul(a.data(), b.data(), y2.data(), n);
    CHECK(y1 == y2);
    S.div(a.data(), b.data(), y1.data(), n);
    V->div(a.data(), b.data(), y2.data(), n);
    CHECK(y1 == y2);
    S.scale(a.data(), 1.7, y1.data(), n);
    V->scale(a.data(), 1.7, y2.data(), n);
    CHECK(y1 == y2);

    y1 = b;
    y2 = b;
    S.axpy(0.3, a.data(), y1.data(), n);
    V->axpy(0.3, a.data(), y2.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(std::fabs(y1[i] - y2[i]) < 1e-14);

    CHECK(std::fabs(S.dot(a.data(), b.data(), n) - V->dot(a.data(), b.data(), n)) <
          1e-12 * static_cast<double>(n));
    CHECK(std::fabs(S.sum(a.data(), n) - V->sum(a.data(), n)) <
          1e-12 * static_cast<double>(n));
  }
}

TEST_CASE("gemm results are bitwise reproducible across repeated runs") {
  Rng rng(14);
  size_t m = 37, n = 53, k = 29;
  auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
  std::vector<double> c1(m * n), c2(m * n);
  kern::active().gemm_nn(m, n, k, a.data(), b.data(), c1.data(), false);
  kern::active().gemm_nn(m, n, k, a.data(), b.data(), c2.data(), false);
  CHECK(c1 == c2);
}

TEST_CASE("backend dispatch is forced and restored") {
  const char* original = kern::active_name();
  kern::force_backend("scalar");
  CHECK(std::string(kern::active_name()) == "scalar");
  CHECK_THROWS(kern::force_backend("neon"));
  if (kern::avx2_kernels()) {
    kern::force_backend("avx2");
    CHECK(std::string(kern::active_name()) == "avx2");
  }
  kern::force_backend(original);
}
