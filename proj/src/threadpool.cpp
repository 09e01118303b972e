#include "sggan/threadpool.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace sggan {
namespace {

thread_local int tl_depth = 0;

int env_threads() {
  if (const char* s = std::getenv("SGGAN_THREADS")) {
    int v = std::atoi(s);
    if (v > 0) return v > 64 ? 64 : v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

struct Pool {
  struct Task {
    const std::function<void(int64_t, int64_t)>* body = nullptr;
    int64_t n = 0;
    int64_t grain = 1;
    std::atomic<int64_t> next{0};
    std::atomic<int> live{0};
  };

  std::vector<std::thread> workers;
  std::mutex mu;
  std::condition_variable cv_work;
  std::condition_variable cv_done;
  Task* task = nullptr;
  uint64_t generation = 0;
  bool stop = false;

  explicit Pool(int nthreads) {
    for (int i = 1; i < nthreads; ++i)
      workers.emplace_back([this] { worker_loop(); });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu);
      stop = true;
    }
    cv_work.notify_all();
    for (auto& w : workers) w.join();
  }

  static void run_chunks(Task& t) {
    tl_depth++;
    for (;;) {
      int64_t b = t.next.fetch_add(t.grain);
      if (b >= t.n) break;
      int64_t e = b + t.grain;
      if (e > t.n) e = t.n;
      (*t.body)(b, e);
    }
    tl_depth--;
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      Task* t = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu);
        cv_work.wait(lk, [&] { return stop || generation != seen; });
        if (stop) return;
        seen = generation;
        t = task;
        if (t) t->live.fetch_add(1);
      }
      if (!t) continue;
      run_chunks(*t);
      if (t->live.fetch_sub(1) == 1) {
        // Lock so the notify cannot slip between the caller's predicate
        // check and its sleep.
        std::lock_guard<std::mutex> lk(mu);
        cv_done.notify_all();
      }
    }
  }

  void run(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& body) {
    Task t;
    t.body = &body;
    t.n = n;
    t.grain = grain < 1 ? 1 : grain;
    {
      std::lock_guard<std::mutex> lk(mu);
      task = &t;
      generation++;
    }
    cv_work.notify_all();
    run_chunks(t);
    {
      std::unique_lock<std::mutex> lk(mu);
      cv_done.wait(lk, [&] { return t.live.load() == 0; });
      task = nullptr;
    }
  }
};

Pool& pool() {
  static Pool p(env_threads());
  return p;
}

}  // namespace

ThreadPool::ThreadPool() = default;

ThreadPool& ThreadPool::instance() {
  static ThreadPool tp;
  (void)pool();
  return tp;
}

int ThreadPool::threads() const { return static_cast<int>(pool().workers.size()) + 1; }

bool ThreadPool::in_worker() { return tl_depth > 0; }

void ThreadPool::parallel_for(int64_t n, int64_t grain,
                              const std::function<void(int64_t, int64_t)>& body) {
  if (n <= 0) return;
  if (grain < 1) grain = 1;
  // Inline when nested, single-lane, or too small to be worth a handoff.
  if (tl_depth > 0 || threads() == 1 || n <= grain) {
    tl_depth++;
    body(0, n);
    tl_depth--;
    return;
  }
  pool().run(n, grain, body);
}

}  // namespace sggan
