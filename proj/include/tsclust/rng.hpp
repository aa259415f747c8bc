#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tsclust {

using Rng = std::mt19937_64;

/// One SplitMix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent stream seed from a master seed and a path of
/// identifiers (cell, replicate, restart, ...). Same inputs, same seed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
    return Rng(derive_seed(master, path));
}

}  // namespace tsclust
