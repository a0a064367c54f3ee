#include "hetnet/threadpool.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

#include "hetnet/common.hpp"

namespace hetnet {

struct ThreadPool::Impl {
  std::vector<std::thread> workers;
  std::mutex m;
  std::condition_variable cv_work;
  std::condition_variable cv_done;
  bool stop = false;

  // One parallel_for at a time; workers pull chunk indices from a counter.
  const std::function<void(int64_t, int64_t)>* fn = nullptr;
  int64_t n = 0;
  int64_t chunk = 0;
  int64_t n_chunks = 0;
  std::atomic<int64_t> next{0};
  std::atomic<int64_t> done{0};
  uint64_t generation = 0;

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m);
        cv_work.wait(lk, [&] { return stop || generation != seen; });
        if (stop) return;
        seen = generation;
      }
      run_chunks();
    }
  }

  void run_chunks() {
    for (;;) {
      const int64_t c = next.fetch_add(1);
      if (c >= n_chunks) break;
      const int64_t b = c * chunk;
      const int64_t e = std::min<int64_t>(n, b + chunk);
      (*fn)(b, e);
      if (done.fetch_add(1) + 1 == n_chunks) {
        std::lock_guard<std::mutex> lk(m);
        cv_done.notify_all();
      }
    }
  }
};

ThreadPool::ThreadPool() : impl_(new Impl) {
  int n = 0;
  if (const char* env = std::getenv("HETNET_THREADS")) n = std::atoi(env);
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  set_threads(n);
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard<std::mutex> lk(impl_->m);
    impl_->stop = true;
  }
  impl_->cv_work.notify_all();
  for (auto& w : impl_->workers) w.join();
  delete impl_;
}

ThreadPool& ThreadPool::instance() {
  static ThreadPool pool;
  return pool;
}

void ThreadPool::set_threads(int n) {
  if (n < 1) n = 1;
  {
    std::lock_guard<std::mutex> lk(impl_->m);
    impl_->stop = true;
  }
  impl_->cv_work.notify_all();
  for (auto& w : impl_->workers) w.join();
  impl_->workers.clear();
  impl_->stop = false;
  for (int i = 0; i + 1 < n; ++i) {
    impl_->workers.emplace_back([this] { impl_->worker_loop(); });
  }
}

int ThreadPool::threads() const {
  return static_cast<int>(impl_->workers.size()) + 1;
}

void ThreadPool::parallel_for(int64_t n, int64_t grain,
                              const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  if (grain < 1) grain = 1;
  const int nthreads = threads();
  int64_t chunk = (n + nthreads - 1) / nthreads;
  if (chunk < grain) chunk = grain;
  const int64_t n_chunks = (n + chunk - 1) / chunk;
  if (nthreads == 1 || n_chunks == 1) {
    for (int64_t b = 0; b < n; b += chunk) fn(b, std::min(n, b + chunk));
    return;
  }
  {
    std::lock_guard<std::mutex> lk(impl_->m);
    impl_->fn = &fn;
    impl_->n = n;
    impl_->chunk = chunk;
    impl_->n_chunks = n_chunks;
    impl_->next.store(0);
    impl_->done.store(0);
    ++impl_->generation;
  }
  impl_->cv_work.notify_all();
  impl_->run_chunks();
  std::unique_lock<std::mutex> lk(impl_->m);
  impl_->cv_done.wait(lk, [&] { return impl_->done.load() == impl_->n_chunks; });
  impl_->fn = nullptr;
}

}  // namespace hetnet
