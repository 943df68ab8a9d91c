// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_RNG_HPP
#define THZDET_RNG_HPP

#include <cstdint>
#include <random>

namespace thzdet {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche, used only for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent substream seed from a master seed and up to three
// indices (e.g. sweep point, trial). The mapping is injective enough for
// Monte Carlo purposes and, crucially, does not depend on scheduling, so
// results are identical for any worker count.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(master ^ 0x243f6a8885a308d3ULL);
    s = mix64(s ^ mix64(a));
    s = mix64(s ^ mix64(b + 0x13198a2e03707344ULL));
    s = mix64(s ^ mix64(c + 0xa4093822299f31d0ULL));
    return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

} // namespace thzdet

#endif // THZDET_RNG_HPP
