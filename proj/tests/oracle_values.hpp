#pragma once

// Reference values produced by the scripts in tests/oracles/ before the
// library existed. Regenerate with `python3 tests/oracles/<script>.py`.

#include <array>
#include <cstdint>

namespace oracle {

// SplitMix64: first 16 outputs of new_rng(s), s = 0, 1, 2.
inline constexpr std::array<std::array<std::uint64_t, 16>, 3> kStream{{
    {0xe220a8397b1dcdafULL, 0x6e789e6aa1b965f4ULL, 0x06c45d188009454fULL, 0xf88bb8a8724c81ecULL,
     0x1b39896a51a8749bULL, 0x53cb9f0c747ea2eaULL, 0x2c829abe1f4532e1ULL, 0xc584133ac916ab3cULL,
     0x3ee5789041c98ac3ULL, 0xf3b8488c368cb0a6ULL, 0x657eecdd3cb13d09ULL, 0xc2d326e0055bdef6ULL,
     0x8621a03fe0bbdb7bULL, 0x8e1f7555983aa92fULL, 0xb54e0f1600cc4d19ULL, 0x84bb3f97971d80abULL},
    {0x910a2dec89025cc1ULL, 0xbeeb8da1658eec67ULL, 0xf893a2eefb32555eULL, 0x71c18690ee42c90bULL,
     0x71bb54d8d101b5b9ULL, 0xc34d0bff90150280ULL, 0xe099ec6cd7363ca5ULL, 0x85e7bb0f12278575ULL,
     0x491718de357e3da8ULL, 0xcb435c8e74616796ULL, 0x6775dc7701564f61ULL, 0x9afcd44d14cf8bfeULL,
     0x7476cf8a4baa5dc0ULL, 0x87b341d690d7a28aULL, 0x6f9b6dae6f4c57a8ULL, 0x2ac2ce17a5794a3bULL},
    {0x975835de1c9756ceULL, 0xbfc846100bfc1e42ULL, 0x987bbcbfdd7e532fULL, 0xc3f2827affe7f664ULL,
     0x4fc446b53f17fb29ULL, 0x58bc3cb37bc7b2b3ULL, 0xb9f24f7bae4a6586ULL, 0xbd34d3aef603e583ULL,
     0x401478bc5887ccffULL, 0xba450a33ef6ff86cULL, 0x56e84498e8b0e635ULL, 0x701560ad31bb9977ULL,
     0x8e4858b561b10361ULL, 0x5fb1940eb8cbf1aeULL, 0xee979f2730a45df3ULL, 0x34116e681eda3219ULL},
}};

// First output and gamma of each of three successive splits of new_rng(s).
inline constexpr std::array<std::array<std::uint64_t, 3>, 3> kSplitFirst{{
    {0x184c6c53fb60892dULL, 0xccb4b92f2f011612ULL, 0x0fb91397ebf3d900ULL},
    {0xc5160d22e54d74b9ULL, 0x56f26fc1ba2aa942ULL, 0xfbb2eaa88c3fbc48ULL},
    {0xa3fd70d1427b2d6fULL, 0x4268501d9af9c28fULL, 0x1618a95c7031a4fdULL},
}};
inline constexpr std::array<std::array<std::uint64_t, 3>, 3> kSplitGamma{{
    {0xd30b054265133dd7ULL, 0x6ae4c48206c1097fULL, 0x23828c1ddf82f351ULL},
    {0xe85028e6b31f8e7bULL, 0x1991df90c96fbf6dULL, 0x037cad89b07249c5ULL},
    {0x6453dd522580790dULL, 0x956f0bcbe242a581ULL, 0x296bb424517a8af9ULL},
}};

// keyed_rng(seed, k1, k2) first outputs.
inline constexpr std::uint64_t kKeyed_1_3_2 = 0xce717d6330cc775fULL;
inline constexpr std::uint64_t kKeyed_1_0_0 = 0x5f47167dab1e6f33ULL;
inline constexpr std::uint64_t kKeyed_1_0_1 = 0xdb0f9160fb234b5fULL;

// Quadrature oracles.
inline constexpr double kCoinflipLogZ = -11.8794411721609;        // n = 1e5, y = 5e4
inline constexpr double kCoinflipSmallLogZ = -1.28093384546206;   // n = 2, y = 1
inline constexpr double kCoinflipMeanP1 = 0.721342317137613;      // n = 1e5, y = 5e4
inline constexpr double kBimodalQuadrantMass = 0.4999683297612345;  // c = 2, sd = 0.5
inline constexpr double kMvnLogRatio_d2_s2 = -1.3862943611198906;  // -2 log 2

// Published reduction values for x = 10 e.
inline constexpr double kTreeSum = 978.5814582452562;
inline constexpr double kFoldSum = 978.5814582452563;
// Published index-process directory after steps 1, 2, 3 (N = 4, all accepted).
inline constexpr std::array<std::array<int, 4>, 3> kDirectoryTrace{{
    {2, 1, 4, 3},
    {2, 4, 1, 3},
    {4, 2, 3, 1},
}};

}  // namespace oracle
