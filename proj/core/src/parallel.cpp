#include "rwdre/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rwdre {

namespace {
std::atomic<int> g_threads{0};
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int thread_count() {
  if (const char* env = std::getenv("RWRW_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (...) {
    }
  }
  int n = g_threads.load();
  if (n >= 1) return n;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace rwdre
