#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hardedge {

inline constexpr const char* kRngAlgorithmLabel = "mt19937_64/splitmix64-seed_seq";

/// Identifies one reproducible random stream: a master seed plus a
/// per-trial stream id. The engine state is a pure function of the pair.
struct RngStreamSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
  std::string algorithm_label = kRngAlgorithmLabel;

  RngStreamSpec child(std::uint64_t sub_id) const;

  friend bool operator==(const RngStreamSpec&, const RngStreamSpec&) = default;
};

std::uint64_t splitmix64(std::uint64_t x);

using Engine = std::mt19937_64;

Engine make_engine(const RngStreamSpec& spec);

}  // namespace hardedge
