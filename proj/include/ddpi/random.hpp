#pragma once

#include <cstdint>
#include <random>

namespace ddpi {

/// Independent random streams addressed by (seed, stream, index). Any index can be
/// generated on its own, so timesteps and samples reproduce in any order or thread.
enum class Stream : std::uint32_t {
  kNoise = 1,
  kDither = 2,
  kPerturbation = 3,
};

inline std::mt19937_64 stream_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace ddpi
