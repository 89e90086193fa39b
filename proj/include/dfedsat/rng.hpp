#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dfedsat {

// Deterministic substream derivation. Every random decision in the simulator
// draws from an engine seeded through derive_seed(root, {tags...}), so results
// do not depend on thread or iteration order.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = splitmix64(root);
    for (std::uint64_t t : tags) {
        s = splitmix64(s ^ splitmix64(t));
    }
    return s;
}

using Rng = std::mt19937_64;

inline Rng substream(std::uint64_t root, std::initializer_list<std::uint64_t> tags) {
    return Rng(derive_seed(root, tags));
}

// Stream tags used by the experiment loop. Kept in one place so the
// per-(round, satellite, link) streams never collide.
enum StreamTag : std::uint64_t {
    kStreamDataset = 1,
    kStreamPartition = 2,
    kStreamLocalUpdate = 3,
    kStreamGossipMask = 4,
    kStreamRetransmit = 5,
    kStreamSweepCell = 6,
    kStreamRound = 7,
    kStreamTestSet = 8,
};

}  // namespace dfedsat
