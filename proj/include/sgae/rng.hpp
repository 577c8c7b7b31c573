#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace sgae {

/// Deterministic 64-bit random generator (splitmix64 stream).
///
/// The full generator state is a single u64, which makes it trivial to
/// serialize into checkpoints and to fork independent streams for
/// per-scene work. Box-Muller normals are computed pairwise without a
/// cached spare so draw sequences depend only on the call count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-free modulo is fine here: n is
  /// always tiny relative to 2^64 so the bias is far below double noise.
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Standard normal via Box-Muller. Always consumes exactly two uniforms.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  /// Independent child stream; mixing keeps streams decorrelated even for
  /// adjacent ids.
  Rng fork(std::uint64_t stream_id) const {
    std::uint64_t z = state_ ^ (0x632be59bd9b4e019ull + stream_id * 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t state_;
};

}  // namespace sgae
