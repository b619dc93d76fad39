#pragma once

#include <cmath>
#include <cstdint>

namespace gebc {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Self-contained generator so streams are identical across platforms and
// standard libraries (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    state_ = splitmix64(seed ^ 0xd1b54a32d192ed03ull);
    have_spare_ = false;
    spare_ = 0.0;
  }

  uint64_t next_u64() {
    state_ = splitmix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Box-Muller, cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) {
    state_ = s;
    have_spare_ = false;
  }

 private:
  uint64_t state_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gebc
