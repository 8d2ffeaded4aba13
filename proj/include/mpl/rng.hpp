#pragma once

#include <cstdint>
#include <random>

namespace mpl {

using Engine = std::mt19937_64;

// Tags separate the independent random streams used by one replica.
enum class Purpose : std::uint64_t {
    matrix = 1,
    flow = 2,
    driver = 3,
    companion = 4,
    comparison = 5,
    probe = 6,
    bootstrap = 7,
    lanczos = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stream for (master seed, replica, purpose). Distinct keys give
/// statistically independent engines; equal keys give identical ones.
Engine make_stream(std::uint64_t master_seed, std::uint64_t replica, Purpose purpose);

}  // namespace mpl
