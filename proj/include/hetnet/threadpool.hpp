#pragma once

#include <cstdint>
#include <functional>

namespace hetnet {

// Fixed-size worker pool. parallel_for partitions [0, n) into chunks and
// each chunk is executed exactly once by some worker; kernels built on top
// must write disjoint outputs per chunk and keep per-element reduction
// order independent of the chunking, so results are bitwise identical for
// any thread count.
class ThreadPool {
 public:
  static ThreadPool& instance();

  void set_threads(int n);
  int threads() const;

  // fn(begin, end) over half-open chunk ranges. grain is the minimum chunk
  // size; with one worker (or a single chunk) runs inline on the caller.
  void parallel_for(int64_t n, int64_t grain,
                    const std::function<void(int64_t, int64_t)>& fn);

 private:
  ThreadPool();
  ~ThreadPool();
  struct Impl;
  Impl* impl_;
};

}  // namespace hetnet
