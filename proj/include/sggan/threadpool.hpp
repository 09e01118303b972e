#pragma once

#include <cstdint>
#include <functional>

namespace sggan {

// Shared worker pool for data-parallel loops. parallel_for splits [0, n)
// into fixed chunks of `grain` indices; every index is computed by exactly
// one thread with the same per-index arithmetic, so results are identical
// for any worker count or schedule. Nested calls run inline on the calling
// thread.
class ThreadPool {
public:
  static ThreadPool& instance();

  // Total compute lanes (workers + calling thread).
  int threads() const;

  // body(begin, end) over contiguous chunks covering [0, n).
  void parallel_for(int64_t n, int64_t grain,
                    const std::function<void(int64_t, int64_t)>& body);

  static bool in_worker();

private:
  ThreadPool();
};

}  // namespace sggan
