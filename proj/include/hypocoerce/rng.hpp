// Counter-based normal variates: Philox4x32-10 keyed by the 64-bit run seed,
// with the counter laid out as (path, salt, step, channel pair).  Every
// normal increment is a pure function of (seed, path, step, channel, salt),
// so trajectories are reproducible bit-for-bit for any worker count and any
// estimator bundling.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace hypo {

namespace detail {

constexpr uint32_t kPhiloxW32A = 0x9E3779B9;
constexpr uint32_t kPhiloxW32B = 0xBB67AE85;
constexpr uint32_t kPhiloxM4x32A = 0xD2511F53;
constexpr uint32_t kPhiloxM4x32B = 0xCD9E8D57;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, uint32_t k0, uint32_t k1) {
    for (int round = 0; round < 10; ++round) {
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM4x32A, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM4x32B, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
        k0 += kPhiloxW32A;
        k1 += kPhiloxW32B;
    }
    return ctr;
}

} // namespace detail

struct NormalPair {
    double z0, z1;
};

// Box-Muller on the four 32-bit words of one Philox block.
inline NormalPair normal_pair(uint64_t seed, uint64_t path, uint64_t step,
                              uint64_t channel_pair, uint32_t salt = 0) {
    std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(path),
        static_cast<uint32_t>(path >> 32) ^ (salt * 0x9E3779B9u),
        static_cast<uint32_t>(step),
        static_cast<uint32_t>(channel_pair)};
    auto words = detail::philox4x32(ctr, static_cast<uint32_t>(seed),
                                    static_cast<uint32_t>(seed >> 32));
    uint64_t u64a = (static_cast<uint64_t>(words[0]) << 32) | words[1];
    uint64_t u64b = (static_cast<uint64_t>(words[2]) << 32) | words[3];
    // u1 in (0,1] so the log is finite; u2 in [0,1)
    double u1 = (static_cast<double>(u64a) + 1.0) * 0x1p-64;
    double u2 = static_cast<double>(u64b) * 0x1p-64;
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

inline double normal(uint64_t seed, uint64_t path, uint64_t step, uint64_t channel,
                     uint32_t salt = 0) {
    NormalPair p = normal_pair(seed, path, step, channel >> 1, salt);
    return (channel & 1) ? p.z1 : p.z0;
}

// Fill count consecutive channels starting at channel_base (even counts hit
// every Philox block exactly once).
inline void fill_normals(uint64_t seed, uint64_t path, uint64_t step, uint64_t channel_base,
                         double* out, size_t count, uint32_t salt = 0) {
    size_t i = 0;
    uint64_t ch = channel_base;
    if ((ch & 1) && count > 0) {
        out[i++] = normal(seed, path, step, ch, salt);
        ++ch;
    }
    while (i + 1 < count) {
        NormalPair p = normal_pair(seed, path, step, ch >> 1, salt);
        out[i++] = p.z0;
        out[i++] = p.z1;
        ch += 2;
    }
    if (i < count) out[i] = normal(seed, path, step, ch, salt);
}

// Uniform in [0,1): used for randomized probe points, not for increments.
inline double uniform01(uint64_t seed, uint64_t path, uint64_t step, uint64_t channel,
                        uint32_t salt = 0) {
    std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(path),
        static_cast<uint32_t>(path >> 32) ^ (salt * 0x9E3779B9u),
        static_cast<uint32_t>(step),
        static_cast<uint32_t>(channel)};
    auto words = detail::philox4x32(ctr, static_cast<uint32_t>(seed),
                                    static_cast<uint32_t>(seed >> 32) ^ 0x5DEECE66u);
    uint64_t u = (static_cast<uint64_t>(words[0]) << 32) | words[1];
    return static_cast<double>(u) * 0x1p-64;
}

} // namespace hypo
