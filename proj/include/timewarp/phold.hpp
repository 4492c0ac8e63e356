#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "timewarp/fault.hpp"
#include "timewarp/message.hpp"
#include "timewarp/model.hpp"
#include "timewarp/rng.hpp"

namespace timewarp {

// Synthetic workload: homogeneous LPs juggling variable-size byte buffers.
// Each deallocation event frees one local buffer, sweeps part of the local
// state, then schedules an allocation at some other LP and its own successor
// deallocation. Allocations add a buffer and sweep but schedule nothing, so
// the event population and the global buffer count both hold steady.
struct PholdConfig {
    unsigned num_lps = 32;
    unsigned initial_buffers_per_lp = 64;
    std::size_t buffer_min_bytes = 4096;
    std::size_t buffer_max_bytes = 65536;
    double read_fraction = 0.20;
    double write_fraction = 0.10;
    VirtualTime mean_delay = 1.0;
    VirtualTime t_end = 100.0;
    std::uint64_t seed = 42;
    // Biases allocation targets toward a fixed neighborhood of each LP
    // instead of choosing uniformly, clustering load. The bias is a static
    // ring-distance weighting, so event handling stays a pure function of
    // (own state, event, rng stream).
    bool skewed_destinations = false;
};

inline void validate(const PholdConfig& cfg) {
    if (cfg.num_lps < 1) throw ConfigError("num_lps must be at least 1");
    if (cfg.buffer_min_bytes < 1) throw ConfigError("buffer_min_bytes must be at least 1");
    if (cfg.buffer_min_bytes > cfg.buffer_max_bytes)
        throw ConfigError("buffer_min_bytes exceeds buffer_max_bytes");
    if (cfg.read_fraction < 0.0 || cfg.read_fraction > 1.0)
        throw ConfigError("read_fraction must lie in [0, 1]");
    if (cfg.write_fraction < 0.0 || cfg.write_fraction > 1.0)
        throw ConfigError("write_fraction must lie in [0, 1]");
    if (!(cfg.mean_delay > 0.0)) throw ConfigError("mean_delay must be positive");
    if (!(cfg.t_end > 0.0)) throw ConfigError("t_end must be positive");
}

struct PholdState {
    std::vector<std::vector<std::uint8_t>> buffers;
    std::uint64_t checksum = 0;
    std::size_t total_bytes = 0;

    void fold(std::uint64_t v) { checksum = mix64(checksum ^ v); }

    // Shape- and history-sensitive summary used for run equivalence checks.
    std::uint64_t digest() const {
        std::uint64_t d = mix64(checksum ^ (total_bytes * 0x9e3779b97f4a7c15ull));
        d = mix64(d ^ buffers.size());
        for (const auto& b : buffers) {
            d = mix64(d ^ b.size());
            if (!b.empty()) d = mix64(d ^ (std::uint64_t(b.front()) << 8 | b.back()));
        }
        return d;
    }
};

inline constexpr std::uint8_t kAllocTag = 1;
inline constexpr std::uint8_t kDeallocTag = 2;

// Below this, events would tie with their cause; every scheduled delay gets
// at least this much lookahead.
inline constexpr VirtualTime kMinDelay = 1e-6;

// Reserved stream tags; LP sequence counters start at 1 (the seed event is
// seq 0) and can never collide with these.
inline constexpr std::uint64_t kInitStateTag = ~std::uint64_t{0};
inline constexpr std::uint64_t kInitEventTag = ~std::uint64_t{0} - 1;

class PholdModel {
public:
    using State = PholdState;

    explicit PholdModel(const PholdConfig& cfg) : cfg_(cfg) {
        validate(cfg_);
        if (cfg_.skewed_destinations && cfg_.num_lps > 1) {
            // Cumulative 1/(1+rank) weights over ring distance 1..num_lps-1.
            ring_cdf_.reserve(cfg_.num_lps - 1);
            double acc = 0.0;
            for (unsigned r = 0; r + 1 < cfg_.num_lps; ++r) {
                acc += 1.0 / (1.0 + r);
                ring_cdf_.push_back(acc);
            }
            for (double& w : ring_cdf_) w /= acc;
        }
    }

    const PholdConfig& config() const { return cfg_; }

    State initial_state(LpId lp) const {
        RngStream rng(cfg_.seed, MessageId{lp, kInitStateTag});
        State s;
        s.buffers.reserve(cfg_.initial_buffers_per_lp);
        for (unsigned i = 0; i < cfg_.initial_buffers_per_lp; ++i) allocate(s, rng);
        return s;
    }

    void handle(State& s, const Message& ev, EventContext& ctx) const {
        require(ev.payload.len == 1, "malformed workload event payload");
        switch (ev.payload.bytes[0]) {
            case kDeallocTag: {
                if (!s.buffers.empty()) {
                    const std::size_t victim = ctx.rng().next_below(s.buffers.size());
                    s.fold(s.buffers[victim].size());
                    s.total_bytes -= s.buffers[victim].size();
                    s.buffers[victim] = std::move(s.buffers.back());
                    s.buffers.pop_back();
                }
                sweep(s, ctx.rng());
                ctx.send(pick_destination(ctx), delayed(ctx), Payload::of_byte(kAllocTag));
                ctx.send(ctx.self(), delayed(ctx), Payload::of_byte(kDeallocTag));
                return;
            }
            case kAllocTag: {
                allocate(s, ctx.rng());
                sweep(s, ctx.rng());
                return;
            }
            default:
                require(false, "unknown workload event tag");
        }
    }

private:
    void allocate(State& s, RngStream& rng) const {
        const std::size_t size =
            cfg_.buffer_min_bytes +
            static_cast<std::size_t>(rng.next_below(cfg_.buffer_max_bytes - cfg_.buffer_min_bytes + 1));
        const auto fill = static_cast<std::uint8_t>(rng.next_below(256));
        s.buffers.emplace_back(size, fill);
        s.total_bytes += size;
        s.fold(size);
        s.fold(fill);
    }

    // Read then overwrite a prefix of the state, sized by the configured
    // fractions. Reads feed a sink the optimizer cannot discard; writes fold
    // into the checksum so divergent replays cannot go unnoticed.
    void sweep(State& s, RngStream& rng) const {
        std::size_t to_read = static_cast<std::size_t>(cfg_.read_fraction * s.total_bytes);
        std::uint64_t acc = 0;
        for (const auto& b : s.buffers) {
            if (to_read == 0) break;
            const std::size_t n = std::min(to_read, b.size());
            for (std::size_t i = 0; i < n; ++i) acc += b[i];
            to_read -= n;
        }
        asm volatile("" : : "r"(acc));

        std::size_t to_write = static_cast<std::size_t>(cfg_.write_fraction * s.total_bytes);
        const auto delta = static_cast<std::uint8_t>(rng.next_below(255) + 1);
        std::uint64_t folded = 0;
        for (auto& b : s.buffers) {
            if (to_write == 0) break;
            const std::size_t n = std::min(to_write, b.size());
            for (std::size_t i = 0; i < n; ++i) {
                b[i] = static_cast<std::uint8_t>(b[i] + delta);
                folded += b[i];
            }
            to_write -= n;
        }
        s.fold(folded);
    }

    LpId pick_destination(EventContext& ctx) const {
        const unsigned n = cfg_.num_lps;
        if (n == 1) return ctx.self();
        unsigned distance;
        if (ring_cdf_.empty()) {
            distance = 1 + static_cast<unsigned>(ctx.rng().next_below(n - 1));
        } else {
            const double u = ctx.rng().next_unit();
            const auto it = std::lower_bound(ring_cdf_.begin(), ring_cdf_.end(), u);
            distance = 1 + static_cast<unsigned>(it - ring_cdf_.begin());
        }
        return (ctx.self() + distance) % n;
    }

    VirtualTime delayed(EventContext& ctx) const {
        return ctx.now() + kMinDelay + ctx.rng().next_exponential(cfg_.mean_delay);
    }

    PholdConfig cfg_;
    std::vector<double> ring_cdf_;
};

// One self-addressed deallocation per LP at an exponential offset, ids
// {lp, 0}. Fully determined by the config.
inline std::vector<Message> phold_initial_events(const PholdConfig& cfg) {
    std::vector<Message> out;
    out.reserve(cfg.num_lps);
    for (LpId lp = 0; lp < cfg.num_lps; ++lp) {
        RngStream rng(cfg.seed, MessageId{lp, kInitEventTag});
        Message m;
        m.id = MessageId{lp, 0};
        m.src = lp;
        m.dst = lp;
        m.send_time = 0.0;
        m.recv_time = kMinDelay + rng.next_exponential(cfg.mean_delay);
        m.kind = MsgKind::Event;
        m.payload = Payload::of_byte(kDeallocTag);
        out.push_back(m);
    }
    return out;
}

// key=value config text, one pair per line, '#' comments and blank lines
// ignored. Unknown keys and unparseable values are configuration errors.
inline PholdConfig parse_phold_config(std::istream& in) {
    PholdConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string{};
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "num_lps")
                cfg.num_lps = static_cast<unsigned>(std::stoul(val));
            else if (key == "initial_buffers_per_lp")
                cfg.initial_buffers_per_lp = static_cast<unsigned>(std::stoul(val));
            else if (key == "buffer_min_bytes")
                cfg.buffer_min_bytes = static_cast<std::size_t>(std::stoull(val));
            else if (key == "buffer_max_bytes")
                cfg.buffer_max_bytes = static_cast<std::size_t>(std::stoull(val));
            else if (key == "read_fraction")
                cfg.read_fraction = std::stod(val);
            else if (key == "write_fraction")
                cfg.write_fraction = std::stod(val);
            else if (key == "mean_delay")
                cfg.mean_delay = std::stod(val);
            else if (key == "t_end")
                cfg.t_end = std::stod(val);
            else if (key == "seed")
                cfg.seed = std::stoull(val);
            else if (key == "skewed_destinations")
                cfg.skewed_destinations = (val == "1" || val == "true" || val == "yes");
            else
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        }
    }
    validate(cfg);
    return cfg;
}

inline PholdConfig load_phold_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_phold_config(in);
}

}  // namespace timewarp
