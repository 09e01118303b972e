#pragma once

#include <cstddef>

namespace sggan::kern {

// Hot arithmetic kernels behind the tensor ops. Two implementations exist:
// a scalar reference and an AVX2/FMA variant; the active one is picked at
// runtime from CPU features (override with SGGAN_KERNELS=scalar|avx2).
// GEMMs are row-major. gemm_tn takes A as KxM (computes A^T B); gemm_nt
// takes B as NxK (computes A B^T). With acc=false C is overwritten,
// otherwise accumulated into.
struct Kernels {
  const char* name;

  void (*add)(const double* a, const double* b, double* y, size_t n);
  void (*sub)(const double* a, const double* b, double* y, size_t n);
  void (*mul)(const double* a, const double* b, double* y, size_t n);
  void (*div)(const double* a, const double* b, double* y, size_t n);
  void (*scale)(const double* x, double a, double* y, size_t n);  // y = a*x
  void (*axpy)(double a, const double* x, double* y, size_t n);   // y += a*x
  double (*dot)(const double* a, const double* b, size_t n);
  double (*sum)(const double* x, size_t n);

  void (*gemm_nn)(size_t m, size_t n, size_t k, const double* a, const double* b,
                  double* c, bool acc);
  void (*gemm_tn)(size_t m, size_t n, size_t k, const double* a, const double* b,
                  double* c, bool acc);
  void (*gemm_nt)(size_t m, size_t n, size_t k, const double* a, const double* b,
                  double* c, bool acc);
};

const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr when the CPU or build lacks AVX2

const Kernels& active();
const char* active_name();
void force_backend(const char* name);  // test hook; throws on unknown/unsupported

}  // namespace sggan::kern
