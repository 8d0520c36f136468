#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace predint {

// SplitMix64, used for seed expansion and stream derivation.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

// xoshiro256++ (Blackman & Vigna). All randomness in this library flows
// through this generator so that results are bit-reproducible across
// platforms for a given seed; the four state words are expanded from the
// 64-bit seed with SplitMix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0,1), 53-bit resolution.
  double uniform();
  // Uniform on (0,1), never returns an endpoint.
  double uniform_open();
  // Unbiased integer in [0, bound) via rejection sampling; bound > 0.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via inverse-CDF transform of uniform_open().
  double normal();

 private:
  std::array<std::uint64_t, 4> state_;
};

// Derives n independent stream seeds from a master seed (SplitMix64 chain).
std::vector<std::uint64_t> derive_stream_seeds(std::uint64_t seed, std::size_t n);

}  // namespace predint
