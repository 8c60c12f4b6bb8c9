#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace msbp {

// Replicate blocks have a fixed size so block boundaries (and therefore the
// reduction tree) never depend on the worker count.
inline constexpr std::size_t kReplicateBlock = 256;

inline std::size_t block_count(std::size_t replicates) noexcept {
  return (replicates + kReplicateBlock - 1) / kReplicateBlock;
}

// Owned by the driver and passed into experiment code, which never starts
// threads of its own. Work is handed out block-by-block from an atomic cursor.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned threads = 1) : threads_(std::max(1u, threads)) {}

  unsigned threads() const noexcept { return threads_; }

  // Calls fn(block_index, worker_index) for every block in [0, blocks).
  template <class Fn>
  void for_each_block(std::size_t blocks, Fn&& fn) const {
    if (blocks == 0) return;
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(threads_, blocks));
    if (workers == 1) {
      for (std::size_t b = 0; b < blocks; ++b) fn(b, 0u);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&](unsigned worker) {
      try {
        for (std::size_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) {
          fn(b, worker);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body, w);
    body(0);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Calls fn(replicate, worker) for replicate in [0, n), grouped by block.
  template <class Fn>
  void for_each_replicate(std::size_t n, Fn&& fn) const {
    for_each_block(block_count(n), [&](std::size_t b, unsigned worker) {
      const std::size_t lo = b * kReplicateBlock;
      const std::size_t hi = std::min(n, lo + kReplicateBlock);
      for (std::size_t i = lo; i < hi; ++i) fn(i, worker);
    });
  }

 private:
  unsigned threads_;
};

}  // namespace msbp
