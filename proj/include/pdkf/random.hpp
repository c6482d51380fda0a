#pragma once

#include <cstdint>
#include <random>

namespace pdkf {

using Rng = std::mt19937_64;

/// Named sub-streams of the master seed. Each consumer of randomness draws
/// from its own stream so adding draws in one place does not shift another.
enum class SeedStream : std::uint64_t {
  kTopology = 1,
  kSensors = 2,
  kTrajectory = 3,
  kSchedule = 4,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic seed for (master, stream, index).
std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index = 0);

/// Maps 64 random bits onto [0, 1) using the top 53 bits.
inline double bits_to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace pdkf
