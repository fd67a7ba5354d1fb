#pragma once

#include <cstdint>
#include <random>

namespace suplab {

// splitmix64 mix of (seed, stream); used to give every shard, grid point
// and suite member its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// mt19937_64 with hand-rolled transforms: the std:: distributions are
// implementation-defined and would break bit-exact reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double exponential(double scale);

 private:
  std::mt19937_64 gen_;
};

}  // namespace suplab
