#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fskws {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic random stream. All distribution helpers are implemented
// here rather than with std:: distributions so that draw sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), exact (rejection sampling).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  // Standard normal via Box-Muller; two draws per call, no cached state.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream; derivation depends only on this stream's
  // seed, never on its draw position.
  Rng split(std::string_view name) const { return Rng(splitmix64(seed_ ^ fnv1a64(name))); }
  Rng split(std::uint64_t index) const { return Rng(splitmix64(seed_ ^ splitmix64(index))); }

  std::string state_string() const {
    std::ostringstream os;
    os << seed_ << ' ' << gen_;
    return os.str();
  }

  static Rng from_state(const std::string& s) {
    std::istringstream is(s);
    std::uint64_t seed = 0;
    is >> seed;
    Rng r(seed);
    is >> r.gen_;
    return r;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// Fisher-Yates shuffle driven by Rng::uniform_int (stable across platforms).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices drawn uniformly from [0, n), in draw order.
inline std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
    out.push_back(idx[i]);
  }
  return out;
}

}  // namespace fskws
