#pragma once

// Seeded generators for property tests. Kept separate from the simulator's
// RNG so a bug there cannot hide in the oracles.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace testgen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::vector<double> vec(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  std::vector<double> gaussian(std::size_t n, double sigma = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = sigma * normal();
    return v;
  }

 private:
  std::uint64_t state_;
};

inline std::vector<double> sine(std::size_t n, double rate, double freq, double amp = 1.0, double phase = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase);
  }
  return v;
}

}  // namespace testgen
