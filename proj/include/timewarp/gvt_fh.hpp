#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "timewarp/fault.hpp"
#include "timewarp/gvt_protocol.hpp"

namespace timewarp {

#if defined(__x86_64__) || defined(__i386__)
inline void cpu_pause() { __builtin_ia32_pause(); }
#else
inline void cpu_pause() {}
#endif

// Critical-section GVT baseline. A round sets a shared countdown flag to N;
// each worker then makes exactly one contribution inside a test-and-set
// guarded section: drain the inbox, take min(local minimum, minimum
// timestamp sent since the round began), store it in its slot, decrement
// the flag. The worker that decrements the flag to zero computes and
// publishes the global minimum while still holding the guard.
//
// The guard acquisition spins. Every failed test-and-set is counted, which
// is the contention signal the measurement harness records: workers
// preempted or stalled inside the section stall everyone else's round
// progress, and the failed-attempt counter makes that visible.
class FujimotoHybinetteGvt final : public GvtProtocol {
public:
    explicit FujimotoHybinetteGvt(unsigned n_workers)
        : n_(static_cast<int>(n_workers)), slots_(n_workers), send_min_(n_workers),
          locals_(n_workers) {}

    // Timer expiry path; the round counter CAS picks one starter among
    // racing timers.
    bool try_trigger(WorkerId w) override {
        observe_round(w);
        if (flag_.load() != 0) return false;
        std::uint64_t expected = locals_[w].my_round;
        if (!round_.compare_exchange_strong(expected, expected + 1)) return false;
        start_round();
        return true;
    }

    GvtStepOutcome step(WorkerId w, GvtPort& port) override {
        Local& L = locals_[w];
        observe_round(w);
        if (flag_.load() == 0 || L.contributed) return GvtStepOutcome{};

        acquire_guard();
        if (cs_stall_hook_) cs_stall_hook_(w);
        port.port_drain_incorporate();
        const VirtualTime contrib =
            std::min(port.port_local_min(), send_min_[w].v.load());
        slots_[w].v.store(contrib);
        contributions_.fetch_add(1);
        L.contributed = true;
        GvtStepOutcome out{true, false, kInfinity};
        if (flag_.fetch_sub(1) - 1 == 0) {
            VirtualTime g = kInfinity;
            for (const auto& s : slots_)
                if (VirtualTime t = s.v.load(); t < g) g = t;
            published_.store(g);
            rounds_done_.fetch_add(1);
            out.round_completed = true;
            out.gvt = g;
        }
        guard_.store(false);
        return out;
    }

    // Send-side minimum tracking. The flag check on every send closes the
    // gap between a worker noticing the round and contributing: any message
    // sent while the round is live, before this worker's contribution, is
    // covered either by the send minimum here or by a receiver's drain.
    void note_send(WorkerId w, VirtualTime recv_time) override {
        Local& L = locals_[w];
        observe_round(w);
        if (!L.contributed && flag_.load() > 0) {
            if (recv_time < send_min_[w].v.load()) send_min_[w].v.store(recv_time);
        }
    }

    void note_executed(WorkerId, VirtualTime) override {}

    VirtualTime published() const override { return published_.load(); }
    bool round_active() const override { return flag_.load() != 0; }
    std::uint64_t rounds_started() const override { return rounds_started_.load(); }
    std::uint64_t rounds_completed() const override { return rounds_done_.load(); }
    std::uint64_t spin_tries() const override {
        return spin_tries_.load(std::memory_order_relaxed);
    }
    std::uint64_t contributions() const { return contributions_.load(); }
    VirtualTime send_min_of(WorkerId w) const { return send_min_[w].v.load(); }
    void set_cs_stall_hook(std::function<void(WorkerId)> fn) {
        cs_stall_hook_ = std::move(fn);
    }

private:
    struct alignas(64) Local {
        std::uint64_t my_round = 0;
        bool contributed = false;
    };

    // Round transitions reset the per-worker contribution latch. The send
    // minima are reset by the starter before the flag goes up, so a stale
    // worker can never contribute last round's minimum to this round.
    void observe_round(WorkerId w) {
        Local& L = locals_[w];
        const std::uint64_t r = round_.load();
        if (r != L.my_round) {
            L.my_round = r;
            L.contributed = false;
        }
    }

    void start_round() {
        for (auto& s : send_min_) s.v.store(kInfinity);
        rounds_started_.fetch_add(1);
        flag_.store(n_);
    }

    void acquire_guard() {
        unsigned fails = 0;
        while (guard_.exchange(true)) {
            spin_tries_.fetch_add(1, std::memory_order_relaxed);
            cpu_pause();
            // On oversubscribed cores a pure spin starves the guard holder;
            // yield periodically without stopping the failed-attempt count.
            if (++fails % 128 == 0) std::this_thread::yield();
        }
    }

    const int n_;
    alignas(64) std::atomic<int> flag_{0};
    alignas(64) std::atomic<bool> guard_{false};
    alignas(64) std::atomic<std::uint64_t> round_{0};
    alignas(64) std::atomic<VirtualTime> published_{-kInfinity};
    std::atomic<std::uint64_t> spin_tries_{0};
    std::atomic<std::uint64_t> rounds_started_{0};
    std::atomic<std::uint64_t> rounds_done_{0};
    std::atomic<std::uint64_t> contributions_{0};
    std::vector<PaddedTimeSlot> slots_;
    std::vector<PaddedTimeSlot> send_min_;
    std::vector<Local> locals_;
    std::function<void(WorkerId)> cs_stall_hook_;
};

}  // namespace timewarp
