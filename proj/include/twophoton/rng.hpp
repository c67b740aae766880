#pragma once

// Counter-based random numbers (Philox4x32-10). A stream is addressed by
// (seed, stream_index); within a stream, independent lanes give per-chunk
// substreams so parallel work never shares generator state.

#include <array>
#include <cstdint>
#include <limits>

namespace twophoton {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

constexpr PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += detail::kPhiloxW0;
            key[1] += detail::kPhiloxW1;
        }
        const std::uint64_t p0 = std::uint64_t{detail::kPhiloxM0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{detail::kPhiloxM1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

// Identifies an independent random sequence.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_index = 0;

    // Deterministic child stream, e.g. one per scan point or bootstrap resample.
    constexpr RngStream split(std::uint64_t child) const noexcept
    {
        return {seed, detail::splitmix64(stream_index ^ detail::splitmix64(child + 0x632BE59BD9B4E019ull))};
    }

    friend constexpr bool operator==(const RngStream&, const RngStream&) = default;
};

// UniformRandomBitGenerator over a (stream, lane) pair. Counter layout:
// {block, lane, stream_lo, stream_hi}; key = seed.
class PhiloxEngine {
public:
    using result_type = std::uint64_t;

    explicit PhiloxEngine(RngStream stream, std::uint32_t lane = 0) noexcept
        : key_{static_cast<std::uint32_t>(stream.seed), static_cast<std::uint32_t>(stream.seed >> 32)},
          counter_{0u, lane, static_cast<std::uint32_t>(stream.stream_index),
                   static_cast<std::uint32_t>(stream.stream_index >> 32)}
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        if (used_ == 2) {
            block_ = philox4x32_10(counter_, key_);
            ++counter_[0];
            used_ = 0;
        }
        const std::size_t i = 2 * used_++;
        return (std::uint64_t{block_[i]} << 32) | block_[i + 1];
    }

    // Uniform double in [0,1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    PhiloxKey key_;
    PhiloxCounter counter_;
    PhiloxCounter block_{};
    std::size_t used_ = 2;
};

} // namespace twophoton
