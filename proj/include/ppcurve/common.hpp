#ifndef PPCURVE_COMMON_HPP
#define PPCURVE_COMMON_HPP

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ppcurve {

using Point = std::vector<double>;

inline double sq_euclid(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclid(const Point& a, const Point& b) {
  return std::sqrt(sq_euclid(a, b));
}

/// Deterministic parallel map over [0, n); results must go to disjoint slots.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned max_threads = 0) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (max_threads > 0 && max_threads < hw) hw = max_threads;
  if (hw <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(hw);
  for (unsigned t = 0; t < hw; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& w : workers) w.join();
}

/// FNV-1a over raw bytes; used for content-addressed caching and provenance.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t hash_doubles(const std::vector<double>& v, std::uint64_t h = 1469598103934665603ull) {
  return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(double), h);
}

struct BackendMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace ppcurve

#endif
