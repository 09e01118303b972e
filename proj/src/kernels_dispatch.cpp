#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "sggan/kernels.hpp"

namespace sggan::kern {

namespace {
// Tensor ops allocate and free MB-scale buffers at op granularity; keep
// glibc from bouncing those through mmap/munmap on every node.
struct MallocTuning {
  MallocTuning() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
  }
};
const MallocTuning g_malloc_tuning;
}  // namespace

const Kernels* avx2_kernels_impl();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* g_active = nullptr;

const Kernels* pick() {
  if (const char* env = std::getenv("SGGAN_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (std::strcmp(env, "avx2") == 0) {
      const Kernels* k = avx2_kernels();
      if (!k) throw std::runtime_error("SGGAN_KERNELS=avx2 but AVX2 is unavailable");
      return k;
    }
    throw std::runtime_error(std::string("unknown SGGAN_KERNELS value: ") + env);
  }
  if (const Kernels* k = avx2_kernels()) return k;
  return &scalar_kernels();
}

}  // namespace

const Kernels* avx2_kernels() {
  return cpu_has_avx2() ? avx2_kernels_impl() : nullptr;
}

const Kernels& active() {
  if (!g_active) g_active = pick();
  return *g_active;
}

const char* active_name() { return active().name; }

void force_backend(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    g_active = &scalar_kernels();
    return;
  }
  if (std::strcmp(name, "avx2") == 0) {
    const Kernels* k = avx2_kernels();
    if (!k) throw std::runtime_error("force_backend: AVX2 is unavailable on this CPU/build");
    g_active = k;
    return;
  }
  throw std::runtime_error(std::string("force_backend: unknown backend ") + name);
}

}  // namespace sggan::kern
