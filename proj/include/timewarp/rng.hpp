#pragma once

#include <cmath>
#include <cstdint>

#include "timewarp/message.hpp"

namespace timewarp {

// splitmix64; good enough mixing for per-event streams and dirt cheap.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-event random stream. Seeded from (run seed, message id),
// so re-executing an event after a rollback replays the exact same draws.
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t run_seed, MessageId id)
        : state_(mix64(run_seed ^ mix64((std::uint64_t{id.src_lp} << 32) ^ 0xabcdu) ^ mix64(id.seq))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // uniform in [0, 1)
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // uniform integer in [lo, hi] inclusive
    std::uint64_t next_range(std::uint64_t lo, std::uint64_t hi) {
        return lo + next_below(hi - lo + 1);
    }

    double next_exponential(double mean) { return -mean * std::log1p(-next_unit()); }

private:
    std::uint64_t state_ = 0;
};

}  // namespace timewarp
