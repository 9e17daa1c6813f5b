#pragma once

#include <cstdint>
#include <limits>

namespace qwalk {

// Finalizer of the splitmix64 generator (D. Stafford's mix13 constants).
// Bijective on 64-bit words with full avalanche.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// splitmix64 stream. Fully specified arithmetic, so sequences are identical
// on every platform. Satisfies std uniform random bit generator requirements.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    constexpr std::uint64_t operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

private:
    std::uint64_t state_;
};

// Uniform double in [0, 1) from one 64-bit draw: top 53 bits scaled by 2^-53.
// Requires a full-range 64-bit generator.
template <class URBG>
inline double uniform_unit(URBG& gen) {
    static_assert(sizeof(typename URBG::result_type) == 8,
                  "uniform_unit needs a 64-bit generator");
    static_assert(URBG::min() == 0 && URBG::max() == std::numeric_limits<std::uint64_t>::max(),
                  "uniform_unit needs a full-range generator");
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace qwalk
