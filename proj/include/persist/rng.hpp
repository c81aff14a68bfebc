#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace persist {

// Seeded generator with platform-independent output.
//
// The engine is std::mt19937_64, whose sequence is fixed by the standard.
// The uniform and normal transforms are implemented here because the
// std:: distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal (Box-Muller, spare value cached).
  double normal();

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Independent stream seed for (seed, stream) via the SplitMix64 finalizer.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace persist
