#include "ghiest/parallel.hpp"

#include <atomic>

namespace ghiest {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_thread_count(unsigned n) {
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  g_threads.store(n);
}

unsigned thread_count() { return g_threads.load(); }

}  // namespace ghiest
