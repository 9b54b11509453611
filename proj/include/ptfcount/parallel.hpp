#pragma once

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ptf {

// PTFCOUNT_THREADS: 0 or unset = hardware concurrency.
inline int thread_count() {
  int t = 0;
  if (const char* s = std::getenv("PTFCOUNT_THREADS")) t = std::atoi(s);
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  return t <= 0 ? 1 : t;
}

// Runs body(i) for i in [0, n). Work items are independent; callers reduce
// results in index order so output does not depend on the thread count.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) body(i);
    });
  for (auto& th : pool) th.join();
}

// Counter-based generator: output k of stream s is splitmix64(seed, s, k).
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ull))) {}

  std::uint64_t at(std::uint64_t k) const { return mix(key_ + k * 0x9e3779b97f4a7c15ull); }
  std::uint64_t next() { return at(ctr_++); }
  // Uniform in (0, 1).
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace ptf
