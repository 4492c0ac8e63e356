#pragma once

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "timewarp/engine.hpp"
#include "timewarp/fault.hpp"
#include "timewarp/gvt_fh.hpp"
#include "timewarp/gvt_waitfree.hpp"
#include "timewarp/oracle.hpp"
#include "timewarp/phold.hpp"

namespace timewarp {

enum class ProtocolKind { WaitFree, FujimotoHybinette, Serial };

inline const char* protocol_name(ProtocolKind p) {
    switch (p) {
        case ProtocolKind::WaitFree: return "wf";
        case ProtocolKind::FujimotoHybinette: return "fh";
        case ProtocolKind::Serial: return "serial";
    }
    return "?";
}

inline ProtocolKind parse_protocol(const std::string& s) {
    if (s == "wf") return ProtocolKind::WaitFree;
    if (s == "fh") return ProtocolKind::FujimotoHybinette;
    if (s == "serial") return ProtocolKind::Serial;
    throw ConfigError("unknown protocol '" + s + "' (expected wf, fh, or serial)");
}

inline std::unique_ptr<GvtProtocol> make_protocol(ProtocolKind p, unsigned workers) {
    switch (p) {
        case ProtocolKind::WaitFree: return std::make_unique<WaitFreeGvt>(workers);
        case ProtocolKind::FujimotoHybinette:
            return std::make_unique<FujimotoHybinetteGvt>(workers);
        case ProtocolKind::Serial: return nullptr;
    }
    return nullptr;
}

struct RunConfig {
    ProtocolKind protocol = ProtocolKind::WaitFree;
    unsigned workers = 2;
    double gvt_interval_ms = 1000.0;
    PholdConfig phold;
    unsigned interference = 0;
    bool audit = false;  // cooperative single-stepped run with safety sweeps
    unsigned repetitions = 1;
    std::uint32_t checkpoint_interval = 1;
    bool collect_committed = false;
    double max_wall_s = 0.0;
};

inline void validate(const RunConfig& cfg) {
    if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
    if (cfg.repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (cfg.checkpoint_interval < 1) throw ConfigError("checkpoint interval must be at least 1");
    if (!(cfg.gvt_interval_ms > 0.0)) throw ConfigError("gvt interval must be positive");
    validate(cfg.phold);
}

struct RunMetrics {
    ProtocolKind protocol = ProtocolKind::Serial;
    unsigned workers = 1;
    unsigned interference = 0;
    std::uint64_t seed = 0;
    double wall_clock_s = 0.0;
    std::uint64_t committed_events = 0;
    std::uint64_t executed_events = 0;
    std::uint64_t rollbacks = 0;
    std::uint64_t gvt_rounds = 0;
    std::uint64_t spin_tries = 0;
    double efficiency = 1.0;
    std::vector<VirtualTime> gvt_values;
    std::vector<double> per_worker_throughput;  // executed events per second
};

// n busy-loop child processes, alive for the lifetime of this handle. They
// contend for cores with the simulator, nothing more.
class InterferenceSet {
public:
    explicit InterferenceSet(unsigned n) {
        pids_.reserve(n);
        for (unsigned i = 0; i < n; ++i) {
            const pid_t pid = ::fork();
            if (pid == 0) {
                volatile std::uint64_t spin = 0;
                for (;;) spin = spin + 1;
            }
            if (pid < 0) {
                const unsigned achieved = i;
                release();
                throw std::runtime_error("spawned only " + std::to_string(achieved) + " of " +
                                         std::to_string(n) + " interference processes");
            }
            pids_.push_back(pid);
        }
    }

    InterferenceSet(const InterferenceSet&) = delete;
    InterferenceSet& operator=(const InterferenceSet&) = delete;
    ~InterferenceSet() { release(); }

    void release() {
        for (pid_t pid : pids_) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, nullptr, 0);
        }
        pids_.clear();
    }

    std::size_t live() const { return pids_.size(); }
    const std::vector<pid_t>& pids() const { return pids_; }

private:
    std::vector<pid_t> pids_;
};

namespace detail {

inline RunMetrics run_serial(const RunConfig& cfg, std::uint64_t seed) {
    PholdConfig pc = cfg.phold;
    pc.seed = seed;
    PholdModel model(pc);
    const auto initial = phold_initial_events(pc);
    const auto t0 = std::chrono::steady_clock::now();
    const auto oracle = run_sequential(model, pc.num_lps, initial, pc.t_end, pc.seed);
    const auto t1 = std::chrono::steady_clock::now();

    RunMetrics m;
    m.protocol = ProtocolKind::Serial;
    m.workers = 1;
    m.interference = cfg.interference;
    m.seed = seed;
    m.wall_clock_s = std::chrono::duration<double>(t1 - t0).count();
    m.committed_events = oracle.executed;
    m.executed_events = oracle.executed;
    m.efficiency = 1.0;
    m.per_worker_throughput.push_back(
        m.wall_clock_s > 0.0 ? static_cast<double>(oracle.executed) / m.wall_clock_s : 0.0);
    return m;
}

// Single-thread cooperative run: workers are stepped round-robin, triggers
// armed at a fixed stepping cadence, and after every completed GVT round the
// frozen world is swept for safety (nothing live below the published GVT)
// and conservation (every message accounted for exactly once).
template <typename ModelT>
inline RunOutcome drive_audited(Engine<ModelT>& engine, GvtProtocol& proto, VirtualTime t_end,
                                double max_wall_s) {
    const unsigned n = engine.worker_count();
    const std::uint64_t trigger_stride = 8;
    std::uint64_t sweeps = 0;
    std::uint64_t seen_rounds = proto.rounds_completed();
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out;

    while (proto.published() < t_end) {
        if (sweeps % trigger_stride == 0 && !proto.round_active())
            engine.worker((sweeps / trigger_stride) % n).arm_trigger();
        for (unsigned w = 0; w < n; ++w) {
            engine.worker(w).iterate();
            if (const std::uint64_t r = proto.rounds_completed(); r != seen_rounds) {
                seen_rounds = r;
                const AuditSweep s = engine.audit();
                check_protocol(s.live_floor >= proto.published(),
                               "audit sweep found live work below the published GVT");
                check_protocol(s.originated == s.accounted,
                               "audit sweep found unaccounted messages");
            }
        }
        ++sweeps;
        if (max_wall_s > 0.0 && (sweeps & 0x3ff) == 0) {
            const auto el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
            if (el.count() > max_wall_s) {
                out.hit_wall_cap = true;
                break;
            }
        }
    }

    if (proto.published() >= t_end)
        for (unsigned w = 0; w < n; ++w) engine.worker(w).commit_sweep(t_end);
    out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.final_gvt = proto.published();
    return out;
}

inline RunMetrics run_parallel(const RunConfig& cfg, std::uint64_t seed) {
    PholdConfig pc = cfg.phold;
    pc.seed = seed;
    PholdModel model(pc);
    auto proto = make_protocol(cfg.protocol, cfg.workers);

    EngineConfig ec;
    ec.workers = cfg.workers;
    ec.lps = pc.num_lps;
    ec.seed = pc.seed;
    ec.t_end = pc.t_end;
    ec.checkpoint_interval = cfg.checkpoint_interval;
    ec.gvt_interval_ms = cfg.gvt_interval_ms;
    ec.wall_clock_triggers = !cfg.audit;
    ec.collect_committed = cfg.collect_committed;
    ec.max_wall_s = cfg.max_wall_s;

    Engine<PholdModel> engine(ec, model, proto.get());
    engine.seed_all(phold_initial_events(pc));
    const RunOutcome outcome = cfg.audit
                                   ? drive_audited(engine, *proto, pc.t_end, cfg.max_wall_s)
                                   : engine.run();

    const EngineTotals t = engine.totals();
    RunMetrics m;
    m.protocol = cfg.protocol;
    m.workers = cfg.workers;
    m.interference = cfg.interference;
    m.seed = seed;
    m.wall_clock_s = outcome.wall_s;
    m.committed_events = t.committed;
    m.executed_events = t.executed;
    m.rollbacks = t.rollbacks;
    m.gvt_rounds = proto->rounds_completed();
    m.spin_tries = proto->spin_tries();
    m.efficiency = t.executed > 0 ? static_cast<double>(t.committed) / static_cast<double>(t.executed)
                                  : 1.0;
    m.gvt_values = engine.gvt_history();
    for (unsigned w = 0; w < engine.worker_count(); ++w) {
        const auto executed =
            engine.worker(w).metrics().executed.load(std::memory_order_relaxed);
        m.per_worker_throughput.push_back(
            outcome.wall_s > 0.0 ? static_cast<double>(executed) / outcome.wall_s : 0.0);
    }
    return m;
}

}  // namespace detail

// One repetition. Paired comparisons across protocols reuse the same seed by
// passing the same (config seed, rep) pair.
inline RunMetrics run_once(const RunConfig& cfg, unsigned rep) {
    validate(cfg);
    const std::uint64_t seed = cfg.phold.seed + rep;
    if (cfg.protocol == ProtocolKind::Serial) return detail::run_serial(cfg, seed);
    return detail::run_parallel(cfg, seed);
}

// All repetitions of one configuration, under one shared interference load.
inline std::vector<RunMetrics> run_experiment(const RunConfig& cfg) {
    validate(cfg);
    InterferenceSet load(cfg.interference);
    std::vector<RunMetrics> rows;
    rows.reserve(cfg.repetitions);
    for (unsigned rep = 0; rep < cfg.repetitions; ++rep) rows.push_back(run_once(cfg, rep));
    return rows;
}

inline constexpr const char* kCsvHeader =
    "protocol,workers,interference,seed,wall_clock_s,committed_events,rollbacks,gvt_rounds,"
    "spin_tries,efficiency";

inline void emit_csv(const std::vector<RunMetrics>& rows, std::ostream& os) {
    os << kCsvHeader << '\n';
    for (const RunMetrics& m : rows) {
        os << protocol_name(m.protocol) << ',' << m.workers << ',' << m.interference << ','
           << m.seed << ',' << std::fixed << std::setprecision(6) << m.wall_clock_s << ','
           << m.committed_events << ',' << m.rollbacks << ',' << m.gvt_rounds << ','
           << m.spin_tries << ',' << std::fixed << std::setprecision(6) << m.efficiency << '\n';
        os.unsetf(std::ios::fixed);
    }
}

inline void emit_csv(const std::vector<RunMetrics>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    emit_csv(rows, out);
    if (!out) throw ConfigError("failed while writing: " + path);
}

// Round-trip reader for the columns emit_csv writes.
inline std::vector<RunMetrics> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw ConfigError("unexpected CSV header");
    std::vector<RunMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        auto next = [&]() {
            if (!std::getline(ss, field, ',')) throw ConfigError("short CSV row");
            return field;
        };
        RunMetrics m;
        m.protocol = parse_protocol(next());
        m.workers = static_cast<unsigned>(std::stoul(next()));
        m.interference = static_cast<unsigned>(std::stoul(next()));
        m.seed = std::stoull(next());
        m.wall_clock_s = std::stod(next());
        m.committed_events = std::stoull(next());
        m.rollbacks = std::stoull(next());
        m.gvt_rounds = std::stoull(next());
        m.spin_tries = std::stoull(next());
        m.efficiency = std::stod(next());
        rows.push_back(std::move(m));
    }
    return rows;
}

}  // namespace timewarp
