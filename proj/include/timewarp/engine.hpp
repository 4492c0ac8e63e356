#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "timewarp/fault.hpp"
#include "timewarp/gvt_protocol.hpp"
#include "timewarp/model.hpp"
#include "timewarp/worker.hpp"

namespace timewarp {

struct EngineConfig {
    unsigned workers = 2;
    unsigned lps = 4;
    std::uint64_t seed = 1;
    VirtualTime t_end = kInfinity;
    std::uint32_t checkpoint_interval = 1;
    double gvt_interval_ms = 1.0;
    bool wall_clock_triggers = true;
    bool collect_committed = false;
    bool yield_on_idle = true;
    double max_wall_s = 0.0;  // safety cap for threaded runs; 0 means none
};

struct EngineTotals {
    std::uint64_t iterations = 0;
    std::uint64_t executed = 0;
    std::uint64_t committed = 0;
    std::uint64_t rollbacks = 0;
    std::uint64_t sent = 0;
    std::uint64_t annihilated_pairs = 0;
    std::uint64_t fossil_dropped = 0;
};

struct RunOutcome {
    double wall_s = 0.0;
    VirtualTime final_gvt = -kInfinity;
    bool hit_wall_cap = false;
};

// Snapshot of the message-conservation ledger plus the smallest timestamp
// still live anywhere. Only meaningful while all workers are quiescent.
struct AuditSweep {
    std::uint64_t originated = 0;  // sends plus seeded events
    std::uint64_t accounted = 0;   // live + retired, per the conservation identity
    VirtualTime live_floor = kInfinity;
};

// Owns the workers, maps LPs to them round-robin, and routes messages. Runs
// either free-threaded (one thread per worker) or under a cooperative driver
// that single-steps workers and may freeze the world to audit it.
template <typename Model>
    requires SimulationModel<Model>
class Engine final : public MessageRouter {
public:
    using WorkerT = Worker<Model>;

    Engine(const EngineConfig& cfg, const Model& model, GvtProtocol* protocol)
        : cfg_(cfg), protocol_(protocol) {
        require(cfg.workers >= 1, "engine needs at least one worker");
        require(cfg.lps >= 1, "engine needs at least one LP");
        KernelSettings ks;
        ks.seed = cfg.seed;
        ks.t_end = cfg.t_end;
        ks.checkpoint_interval = cfg.checkpoint_interval;
        ks.gvt_interval_ms = cfg.gvt_interval_ms;
        ks.wall_clock_triggers = cfg.wall_clock_triggers;
        ks.collect_committed = cfg.collect_committed;
        workers_.reserve(cfg.workers);
        for (WorkerId w = 0; w < cfg.workers; ++w)
            workers_.push_back(std::make_unique<WorkerT>(w, cfg.workers, model, ks, *this, protocol));
        for (LpId lp = 0; lp < cfg.lps; ++lp) workers_[owner_of(lp)]->add_lp(lp);
        for (auto& w : workers_)
            w->set_round_observer([this](VirtualTime g) {
                std::lock_guard<std::mutex> lock(history_mutex_);
                gvt_history_.push_back(g);
            });
    }

    void deliver(WorkerId from, Message m) override {
        workers_[owner_of(m.dst)]->inbox().push(from, std::move(m));
    }

    WorkerId owner_of(LpId lp) const { return static_cast<WorkerId>(lp % cfg_.workers); }

    // Pre-run seeding: the event goes to its destination's owner, and the
    // nominal sender's sequence counter advances so the id is never reissued.
    void seed(const Message& m) {
        require(m.kind == MsgKind::Event, "runs are seeded with events, not anti-messages");
        workers_[owner_of(m.dst)]->seed_event(m);
        workers_[owner_of(m.id.src_lp)]->note_seeded_send(m.id.src_lp, m.id.seq);
        ++seeded_;
    }

    void seed_all(const std::vector<Message>& ms) {
        for (const Message& m : ms) seed(m);
    }

    // Free-threaded run: one thread per worker until the published GVT
    // reaches the horizon (or the wall cap trips). Shutdown is two-phase so
    // no GVT round can start after any worker has left its loop: every
    // worker first disables its trigger and acknowledges the stop; only when
    // all have acknowledged and no round is live does anyone exit.
    RunOutcome run() {
        require(protocol_ != nullptr, "threaded runs need a GVT coordinator");
        stop_.store(false);
        abort_.store(false);
        hit_cap_.store(false);
        stop_acks_.store(0);
        first_error_ = nullptr;
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::thread> threads;
        threads.reserve(workers_.size());
        for (auto& w : workers_)
            threads.emplace_back([this, &w, t0] { worker_loop(*w, t0); });
        for (auto& t : threads) t.join();
        const auto t1 = std::chrono::steady_clock::now();

        if (first_error_) std::rethrow_exception(first_error_);
        if (protocol_->published() >= cfg_.t_end)
            for (auto& w : workers_) w->commit_sweep(cfg_.t_end);

        RunOutcome out;
        out.wall_s = std::chrono::duration<double>(t1 - t0).count();
        out.final_gvt = protocol_->published();
        out.hit_wall_cap = hit_cap_.load();
        return out;
    }

    WorkerT& worker(WorkerId w) { return *workers_[w]; }
    const WorkerT& worker(WorkerId w) const { return *workers_[w]; }
    unsigned worker_count() const { return static_cast<unsigned>(workers_.size()); }
    GvtProtocol* protocol() { return protocol_; }

    std::vector<VirtualTime> gvt_history() const {
        std::lock_guard<std::mutex> lock(history_mutex_);
        return gvt_history_;
    }

    EngineTotals totals() const {
        EngineTotals t;
        for (const auto& w : workers_) {
            const WorkerMetrics& m = w->metrics();
            t.iterations += m.iterations.load(std::memory_order_relaxed);
            t.executed += m.executed.load(std::memory_order_relaxed);
            t.committed += m.committed.load(std::memory_order_relaxed);
            t.rollbacks += m.rollbacks.load(std::memory_order_relaxed);
            t.sent += m.sent.load(std::memory_order_relaxed);
            t.annihilated_pairs += m.annihilated_pairs.load(std::memory_order_relaxed);
            t.fossil_dropped += m.fossil_dropped.load(std::memory_order_relaxed);
        }
        return t;
    }

    // Stop-the-world audit for the cooperative driver. Checks two global
    // invariants: every message ever originated is still findable in exactly
    // one place (in transit, queued, processed, parked, annihilated in a
    // pair, or fossil-collected), and nothing live sits below the published
    // GVT. Callers assert on the returned counts.
    AuditSweep audit() const {
        AuditSweep s;
        s.originated = seeded_;
        for (const auto& w : workers_) {
            s.originated += w->metrics().sent.load(std::memory_order_relaxed);
            s.accounted += 2 * w->metrics().annihilated_pairs.load(std::memory_order_relaxed);
            s.accounted += w->metrics().fossil_dropped.load(std::memory_order_relaxed);
            w->inbox().scan([&s](const Message& m) {
                ++s.accounted;
                if (m.recv_time < s.live_floor) s.live_floor = m.recv_time;
            });
            for (const auto& lp : w->lps()) {
                s.accounted += lp.queue.unprocessed_count();
                s.accounted += lp.queue.processed_count();
                s.accounted += lp.queue.pending_anti_count();
                if (VirtualTime t = lp.queue.unprocessed_min(); t < s.live_floor) s.live_floor = t;
            }
        }
        return s;
    }

private:
    void worker_loop(WorkerT& w, std::chrono::steady_clock::time_point t0) {
        try {
            iterate_until_stopped(w, t0);
        } catch (...) {
            // First fault wins; everyone else bails out unconditionally (the
            // faulted worker cannot finish its part of a live GVT round).
            std::lock_guard<std::mutex> lock(error_mutex_);
            if (!first_error_) first_error_ = std::current_exception();
            abort_.store(true, std::memory_order_relaxed);
        }
    }

    void iterate_until_stopped(WorkerT& w, std::chrono::steady_clock::time_point t0) {
        bool acked = false;
        for (;;) {
            if (abort_.load(std::memory_order_relaxed)) break;
            if (!stop_.load(std::memory_order_relaxed)) {
                bool done = protocol_->published() >= cfg_.t_end;
                if (!done && cfg_.max_wall_s > 0.0) {
                    const auto elapsed = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0);
                    if (elapsed.count() > cfg_.max_wall_s) {
                        done = true;
                        hit_cap_.store(true, std::memory_order_relaxed);
                    }
                }
                if (done) stop_.store(true, std::memory_order_relaxed);
            }
            if (stop_.load(std::memory_order_relaxed)) {
                if (!acked) {
                    w.set_triggers_enabled(false);
                    acked = true;
                    stop_acks_.fetch_add(1);
                }
                if (stop_acks_.load() == workers_.size() && !protocol_->round_active()) break;
            }
            IterationReport rep = w.iterate();
            if (!rep.any_work() && cfg_.yield_on_idle) std::this_thread::yield();
        }
    }

    EngineConfig cfg_;
    GvtProtocol* protocol_;
    std::vector<std::unique_ptr<WorkerT>> workers_;
    std::uint64_t seeded_ = 0;

    std::atomic<bool> stop_{false};
    std::atomic<bool> abort_{false};
    std::atomic<bool> hit_cap_{false};
    std::atomic<std::size_t> stop_acks_{0};
    std::mutex error_mutex_;
    std::exception_ptr first_error_;

    mutable std::mutex history_mutex_;
    std::vector<VirtualTime> gvt_history_;
};

}  // namespace timewarp
