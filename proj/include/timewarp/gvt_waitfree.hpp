#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "timewarp/fault.hpp"
#include "timewarp/gvt_protocol.hpp"

namespace timewarp {

// Wait-free GVT coordination. A round walks every worker through five
// phases, gated by five shared countdown counters that start at N:
//
//   A      drain + incorporate, record min_a over owned unprocessed events
//   SEND   (once c_a hits 0) drain, execute one event, flush its sends
//   B      (once c_send hits 0) drain again, record min_b, publish
//          min(min_a, min_b) into this worker's slot
//   AWARE  (once c_b hits 0) every worker independently computes the global
//          min over all slots and acts on it; the last one through lowers
//          the round flag
//   END    (once the flag is down) reset to phase A
//
// No step ever waits: a worker whose gate counter is still nonzero simply
// keeps processing events and retries on its next main-loop pass. min_b
// exists to catch messages that slipped in after the receiver computed
// min_a; by the time any worker computes min_b, every send made before the
// senders' c_send decrements is already drained or already processed.
//
// One window stays open after that argument: a worker that has decremented
// c_send keeps executing events between its main-loop passes, and a message
// it sends there can reach a peer whose phase-B drain already happened. The
// worker therefore folds the minimum timestamp it executed or sent in that
// window into its own min_b, which closes the window locally and without
// coordination.
class WaitFreeGvt final : public GvtProtocol {
public:
    explicit WaitFreeGvt(unsigned n_workers)
        : n_(static_cast<int>(n_workers)), slots_(n_workers), locals_(n_workers) {}

    // Arms a fresh round: all five counters to N first, flag raised last.
    void init_round() {
        c_a_.store(n_);
        c_send_.store(n_);
        c_b_.store(n_);
        c_aware_.store(n_);
        c_end_.store(n_);
        rounds_started_.fetch_add(1);
        flag_.store(true);
    }

    // Timer expiry path. The round counter CAS arbitrates racing timers:
    // whoever advances current_round from their own last observed round owns
    // the start. Stale losers fail the CAS and back off.
    bool try_trigger(WorkerId w) override {
        if (flag_.load() || c_end_.load() != 0) return false;
        std::uint64_t expected = locals_[w].my_round;
        if (!round_.compare_exchange_strong(expected, expected + 1)) return false;
        init_round();
        return true;
    }

    GvtStepOutcome step(WorkerId w, GvtPort& port) override {
        Local& L = locals_[w];
        if (!flag_.load()) {
            if (L.phase == Phase::End) {
                L.phase = Phase::A;
                c_end_.fetch_sub(1);
                return GvtStepOutcome{true, false, kInfinity};
            }
            return GvtStepOutcome{};
        }

        L.my_round = round_.load();  // idempotent re-store on every pass, by design
        switch (L.phase) {
            case Phase::A: {
                L.mints = kInfinity;
                L.mints_open = true;
                port.port_drain_incorporate();
                L.min_a = port.port_local_min();
                L.phase = Phase::Send;
                c_a_.fetch_sub(1);
                return GvtStepOutcome{true, false, kInfinity};
            }
            case Phase::Send: {
                if (c_a_.load() != 0) return GvtStepOutcome{};
                port.port_drain_incorporate();
                port.port_execute_one();
                L.phase = Phase::B;
                L.mints_open = false;
                // Sends between the decrement below and the phase-B minimum
                // can outrun every phase-B drain; track them locally.
                L.window_min = kInfinity;
                L.in_window = true;
                c_send_.fetch_sub(1);
                return GvtStepOutcome{true, false, kInfinity};
            }
            case Phase::B: {
                if (c_send_.load() != 0) return GvtStepOutcome{};
                port.port_drain_incorporate();
                L.min_b = std::min(port.port_local_min(), L.window_min);
                L.in_window = false;
                slots_[w].v.store(std::min(L.min_a, L.min_b));
                L.phase = Phase::Aware;
                c_b_.fetch_sub(1);
                if (after_b_hook_) after_b_hook_(w);
                return GvtStepOutcome{true, false, kInfinity};
            }
            case Phase::Aware: {
                if (c_b_.load() != 0) return GvtStepOutcome{};
                // Every worker computes the same value; the redundancy means
                // nobody waits on a designated reducer.
                const VirtualTime g = compute_global_min();
                published_.store(g);
                L.phase = Phase::End;
                c_aware_.fetch_sub(1);
                GvtStepOutcome out{true, false, g};
                if (c_aware_.load() == 0) {
                    bool up = true;
                    if (flag_.compare_exchange_strong(up, false)) {
                        rounds_done_.fetch_add(1);
                        out.round_completed = true;
                    }
                }
                return out;
            }
            case Phase::End:
                return GvtStepOutcome{};  // flag still up; wait for the reset
        }
        return GvtStepOutcome{};
    }

    void note_send(WorkerId w, VirtualTime recv_time) override {
        Local& L = locals_[w];
        if (L.in_window && recv_time < L.window_min) L.window_min = recv_time;
        if (L.mints_open && recv_time < L.mints) L.mints = recv_time;
    }

    void note_executed(WorkerId w, VirtualTime recv_time) override {
        Local& L = locals_[w];
        if (L.in_window && recv_time < L.window_min) L.window_min = recv_time;
    }

    VirtualTime compute_global_min() const {
        VirtualTime g = kInfinity;
        for (const auto& s : slots_)
            if (VirtualTime t = s.v.load(); t < g) g = t;
        return g;
    }

    VirtualTime published() const override { return published_.load(); }
    bool round_active() const override { return flag_.load() || c_end_.load() != 0; }
    std::uint64_t rounds_started() const override { return rounds_started_.load(); }
    std::uint64_t rounds_completed() const override { return rounds_done_.load(); }

    // Audit / test access.
    enum class Phase : std::uint8_t { A, Send, B, Aware, End };
    Phase phase_of(WorkerId w) const { return locals_[w].phase; }
    VirtualTime min_a_of(WorkerId w) const { return locals_[w].min_a; }
    VirtualTime min_b_of(WorkerId w) const { return locals_[w].min_b; }
    VirtualTime mints_of(WorkerId w) const { return locals_[w].mints; }
    VirtualTime slot_of(WorkerId w) const { return slots_[w].v.load(); }
    int counter_a() const { return c_a_.load(); }
    int counter_send() const { return c_send_.load(); }
    int counter_b() const { return c_b_.load(); }
    int counter_aware() const { return c_aware_.load(); }
    int counter_end() const { return c_end_.load(); }
    bool flag() const { return flag_.load(); }
    void set_after_b_hook(std::function<void(WorkerId)> fn) { after_b_hook_ = std::move(fn); }

private:
    struct alignas(64) Local {
        Phase phase = Phase::A;
        std::uint64_t my_round = 0;
        VirtualTime min_a = kInfinity;
        VirtualTime min_b = kInfinity;
        VirtualTime window_min = kInfinity;
        bool in_window = false;
        // Audit record: minimum timestamp sent from round observation until
        // the end of this worker's SEND phase.
        VirtualTime mints = kInfinity;
        bool mints_open = false;
    };

    const int n_;
    alignas(64) std::atomic<int> c_a_{0};
    alignas(64) std::atomic<int> c_send_{0};
    alignas(64) std::atomic<int> c_b_{0};
    alignas(64) std::atomic<int> c_aware_{0};
    alignas(64) std::atomic<int> c_end_{0};
    alignas(64) std::atomic<bool> flag_{false};
    alignas(64) std::atomic<std::uint64_t> round_{0};
    alignas(64) std::atomic<VirtualTime> published_{-kInfinity};
    std::atomic<std::uint64_t> rounds_started_{0};
    std::atomic<std::uint64_t> rounds_done_{0};
    std::vector<PaddedTimeSlot> slots_;
    std::vector<Local> locals_;
    std::function<void(WorkerId)> after_b_hook_;
};

}  // namespace timewarp
