#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace bbmlab {

// splitmix64 finalizer; used to derive independent substreams from
// (master seed, counter) pairs so replicate k never depends on how many
// replicates ran before it or on which worker picked it up.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  return mix64(master ^ mix64(counter + 0x71c9d3a5b2f08e1dULL));
}

// Thin wrapper around mt19937_64 so every sampling site uses the same
// distribution implementations (determinism is same-binary only).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  double uniform() { return uni_(gen_); }
  double normal(double mean = 0.0, double sd = 1.0) {
    return mean + sd * norm_(gen_);
  }
  double exponential(double rate) { return exp_(gen_) / rate; }
  std::uint64_t raw() { return gen_(); }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
  std::exponential_distribution<double> exp_{1.0};
};

}  // namespace bbmlab
