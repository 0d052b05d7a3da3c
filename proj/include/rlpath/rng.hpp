#pragma once

#include <cstdint>
#include <random>

namespace rlpath {

// Seeded generator shared by weight initialization and action sampling.
// Every draw consumes exactly one 64-bit output of the engine, so a stream
// position can be reproduced with `discard`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  void discard(unsigned long long draws) { engine_.discard(draws); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rlpath
