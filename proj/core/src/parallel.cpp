#include "wviab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace wviab {

namespace {

std::atomic<int> g_max_threads{0};  // 0 = hardware default

int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Work items this small are not worth a thread spawn.
constexpr std::size_t kSerialCutoff = 64;

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 0); }

int max_threads() {
  int n = g_max_threads.load();
  return n > 0 ? n : hardware_threads();
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  int workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()),
                                      (n + kSerialCutoff - 1) / kSerialCutoff);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    std::size_t begin = static_cast<std::size_t>(w) * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    std::exception_ptr* slot = &errors[static_cast<std::size_t>(w)];
    pool.emplace_back([&fn, begin, end, slot] {
      try {
        fn(begin, end);
      } catch (...) {
        *slot = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace wviab
