#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dehaze {

// Deterministic random stream. Every random draw in the project flows
// through an explicitly passed Rng; nothing reads ambient global state.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Derived draws use documented arithmetic only, so a stream
// replays identically for a given seed:
//   uniform()  = (next_u64() >> 11) * 2^-53                 in [0,1)
//   below(n)   = high 64 bits of next_u64() * n             in [0,n)
//   normal()   = Box-Muller on two uniform draws (second value cached)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1] so log() is always defined.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dehaze
