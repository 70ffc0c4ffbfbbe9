#pragma once

#include <cstdint>
#include <random>

namespace sodgp {

using Rng = std::mt19937_64;

// Independent streams derived from one master seed, so that e.g. changing the
// number of MC samples does not perturb the minibatch order.
enum class Stream : std::uint32_t {
  Init = 1,
  Subset = 2,
  Batch = 3,
  Noise = 4,
  Split = 5,
  Predict = 6,
};

inline Rng make_stream(std::uint64_t master_seed, Stream stream, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(salt & 0xffffffffu),
                    static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

}  // namespace sodgp
