#pragma once

#include <cstdint>
#include <string>

namespace adtrial {

// Counter-based keyed RNG. Each draw is a pure function of its key, so
// results do not depend on call order.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t state, std::uint64_t value) {
    return splitmix64(state ^ splitmix64(value));
}

inline std::uint64_t hash_string(std::uint64_t state, const std::string& s) {
    // FNV-1a folded through splitmix64
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return mix(state, h);
}

// Uniform in (0, 1); never returns exactly 0 or 1.
inline double uniform01(std::uint64_t key) {
    return (static_cast<double>(key >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace rng
}  // namespace adtrial
