#include "mpl/rng.hpp"

#include <array>

namespace mpl {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Engine make_stream(std::uint64_t master_seed, std::uint64_t replica, Purpose purpose) {
    std::uint64_t key = splitmix64(master_seed);
    key = splitmix64(key ^ replica);
    key = splitmix64(key ^ static_cast<std::uint64_t>(purpose));
    std::array<std::uint32_t, 8> words{};
    std::uint64_t s = key;
    for (std::size_t i = 0; i < words.size(); i += 2) {
        s = splitmix64(s);
        words[i] = static_cast<std::uint32_t>(s);
        words[i + 1] = static_cast<std::uint32_t>(s >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

}  // namespace mpl
