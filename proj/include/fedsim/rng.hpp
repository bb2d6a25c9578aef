#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace fedsim {

/// Stream identifiers used when deriving per-purpose random streams from a
/// base seed.  Keeping them distinct guarantees that e.g. sampling draws and
/// channel draws never share a generator state.
enum StreamId : std::uint64_t {
    kStreamSchedule = 1,
    kStreamAnchor = 2,
    kStreamSampling = 3,
    kStreamChannel = 4,
    kStreamLocal = 5,
    kStreamReplicate = 6,
    kStreamAlgorithm = 7,
    kStreamProbe = 8,
};

/// One step of the splitmix64 generator; used as a mixing function so that
/// structured keys (seed, purpose, client, round) map to well-spread 64-bit
/// states.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Folds an ordered list of key parts into a single 64-bit seed.
constexpr std::uint64_t mix_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (std::uint64_t p : parts) {
        h = splitmix64(h ^ p);
    }
    return h;
}

/// Deterministic random stream: a counter-based splitmix64 generator.  All
/// draws are explicit transformations of its 64-bit output words, so results
/// are identical across platforms and standard library implementations, and
/// constructing a stream is free — the engine derives several fresh streams
/// per round.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    static RandomStream from_key(std::initializer_list<std::uint64_t> parts) {
        return RandomStream(mix_key(parts));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        const auto offset = static_cast<std::uint64_t>(uniform() * static_cast<double>(span));
        const auto clamped = offset >= span ? span - 1 : offset;
        return lo + static_cast<int>(clamped);
    }

    /// Standard normal draw via the Marsaglia polar method.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fedsim
