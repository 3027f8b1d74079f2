#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fkstat {

using RngEngine = std::mt19937_64;

// Key for one generator stream. Distinct keys give distinct seed sequences:
// the components are fed verbatim (fixed length, fixed order) into a
// std::seed_seq, so two streams collide only if all four components match.
struct StreamKey {
    std::uint64_t base_seed = 0;
    std::uint64_t experiment = 0;
    std::uint64_t scale = 0;    // particle count N, or 0 when not applicable
    std::uint64_t replica = 0;
};

inline RngEngine make_stream(const StreamKey& key) {
    const std::uint32_t words[8] = {
        static_cast<std::uint32_t>(key.base_seed), static_cast<std::uint32_t>(key.base_seed >> 32),
        static_cast<std::uint32_t>(key.experiment), static_cast<std::uint32_t>(key.experiment >> 32),
        static_cast<std::uint32_t>(key.scale),      static_cast<std::uint32_t>(key.scale >> 32),
        static_cast<std::uint32_t>(key.replica),    static_cast<std::uint32_t>(key.replica >> 32),
    };
    std::seed_seq seq(std::begin(words), std::end(words));
    return RngEngine(seq);
}

inline RngEngine make_stream(std::uint64_t base_seed, std::uint64_t experiment,
                             std::uint64_t scale, std::uint64_t replica) {
    return make_stream(StreamKey{base_seed, experiment, scale, replica});
}

// Experiment ids used to key independent streams. Values are part of the
// reproducibility contract: changing them changes every sampled trajectory.
namespace experiment_id {
inline constexpr std::uint64_t ensemble = 1;
inline constexpr std::uint64_t auxiliary = 2;
inline constexpr std::uint64_t auxiliary_unconditioned = 3;
inline constexpr std::uint64_t etk_mixture = 4;
inline constexpr std::uint64_t wick = 5;
inline constexpr std::uint64_t clt = 6;
inline constexpr std::uint64_t hermite = 7;
inline constexpr std::uint64_t derivative = 8;
inline constexpr std::uint64_t reference = 9;
}  // namespace experiment_id

}  // namespace fkstat
