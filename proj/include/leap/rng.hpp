#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace leap {

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. Substreams are derived by hashing the base
// seed with stream tags so training phases (init, shuffle, masking, gumbel
// noise) never share draws.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(mix64(seed)) {}
  Rng(uint64_t seed, uint64_t stream, uint64_t index = 0)
      : gen_(mix64(mix64(mix64(seed) ^ stream) ^ index)) {}

  uint64_t next_u64() { return gen_(); }

  // strictly inside (0,1); safe under log(-log(u))
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // [a, b)
  double uniform(double a, double b) {
    double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
  }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

  double gumbel() { return -std::log(-std::log(uniform_open())); }

 private:
  std::mt19937_64 gen_;
};

// Stream tags for substream derivation.
namespace stream {
constexpr uint64_t param_init = 0x01;
constexpr uint64_t emb_init = 0x02;
constexpr uint64_t shuffle = 0x03;
constexpr uint64_t gumbel = 0x04;
constexpr uint64_t schedule_mask = 0x05;
constexpr uint64_t dev_split = 0x06;
constexpr uint64_t sample_cases = 0x07;
}  // namespace stream

}  // namespace leap
