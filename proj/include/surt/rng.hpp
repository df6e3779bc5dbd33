#pragma once

#include <cstdint>
#include <random>

namespace surt {

// mt19937_64 engine with hand-rolled variate transforms. The transforms are
// our own (polar normal, Marsaglia-Tsang gamma) because the algorithms behind
// std::normal_distribution / std::gamma_distribution are implementation
// defined, and chain reproducibility from a seed is part of the contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return gen_(); }
  // uniform on [0, 1) with 53 random bits
  double uniform();
  // uniform on (0, 1], safe as a log() argument
  double uniform_pos();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential();  // rate 1
  // Gamma(shape, scale); shape > 0
  double gamma(double shape, double scale);
  double chisq(double df) { return gamma(0.5 * df, 2.0); }
  // uniform integer in {0, ..., n-1}, n >= 1, unbiased
  int uniform_int(int n);

  // Independent stream derived from the construction seed and a stream tag;
  // the derived stream does not consume or disturb this generator's state.
  Rng derive(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 step; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace surt
