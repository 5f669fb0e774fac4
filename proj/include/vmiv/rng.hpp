#pragma once

#include <cstdint>
#include <random>

namespace vmiv {

using Engine = std::mt19937_64;

// Independent engine for (master seed, stream index). Streams never depend on
// scheduling, so parallel runs reproduce serial ones.
inline Engine stream_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                    std::uint32_t(index >> 32), 0x766d6976u};
  return Engine(seq);
}

// Derived master seed for nested streams (e.g. bootstrap draws inside a replicate).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  Engine e = stream_engine(seed, index);
  return e();
}

}  // namespace vmiv
