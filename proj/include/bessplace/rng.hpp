#pragma once

#include <cstdint>

namespace bessplace {

// Counter-based generator (splitmix64 core). Chosen over std::mt19937 so that
// substreams derived from (seed, iteration, sample-index) are cheap and the
// produced doubles are identical on every platform, which the determinism
// contract of the optimizers depends on.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        return next_u64() % n;
    }

private:
    uint64_t state_;
};

// Mix a stream id into a seed; used to derive per-(iteration, sample) substreams.
inline uint64_t substream_seed(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t z = seed ^ (a * 0xD6E8FEB86659FD93ull) ^ (b * 0xA5CB3F2E19C482DDull + 0x632BE59BD9B4E019ull);
    z = (z ^ (z >> 32)) * 0xFF51AFD7ED558CCDull;
    z = (z ^ (z >> 32)) * 0xC4CEB9FE1A85EC53ull;
    return z ^ (z >> 32);
}

}  // namespace bessplace
