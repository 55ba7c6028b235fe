#pragma once

#include <cstdint>

#include "roost/errors.hpp"

namespace roost {

inline constexpr std::uint32_t kTagFieldLimit = 1U << 12;

/// Message tag for one send/receive at protocol step `t`.
///
/// Layout: [ t mod 2^40 | chain (12 bits) | machine (12 bits) ]. Injective for
/// chain, machine < 2^12 within any window of 2^40 consecutive steps.
constexpr std::uint64_t tag(std::uint64_t t, std::uint32_t chain, std::uint32_t machine) {
  if (chain >= kTagFieldLimit || machine >= kTagFieldLimit)
    throw ArgumentError("tag: chain and machine must be below 4096");
  return ((t & ((std::uint64_t{1} << 40) - 1)) << 24) | (std::uint64_t{chain} << 12) | machine;
}

/// Protocol steps per scan. A scan's messages use steps
/// [t * kStepsPerScan, (t + 1) * kStepsPerScan); phases below index into it.
inline constexpr std::uint64_t kStepsPerScan = 64;

namespace phase {
inline constexpr std::uint64_t kDirectoryExchange = 1;
inline constexpr std::uint64_t kDirectoryReply = 2;
inline constexpr std::uint64_t kLogRatio = 3;
inline constexpr std::uint64_t kChainExchange = 4;
inline constexpr std::uint64_t kDirectorySet = 5;
inline constexpr std::uint64_t kReduceBase = 8;  // one step per tree level, up to 13
inline constexpr std::uint64_t kBroadcast = 24;
inline constexpr std::uint64_t kGatherTrace = 25;
inline constexpr std::uint64_t kGatherReplicas = 26;
inline constexpr std::uint64_t kGatherDirectory = 27;
inline constexpr std::uint64_t kTestBase = 40;
}  // namespace phase

constexpr std::uint64_t protocol_step(std::uint64_t scan, std::uint64_t ph) {
  return scan * kStepsPerScan + ph;
}

}  // namespace roost
