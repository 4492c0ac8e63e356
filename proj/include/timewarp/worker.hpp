#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "timewarp/event_queue.hpp"
#include "timewarp/fault.hpp"
#include "timewarp/gvt_protocol.hpp"
#include "timewarp/inbox.hpp"
#include "timewarp/lp_state.hpp"
#include "timewarp/model.hpp"

namespace timewarp {

class MessageRouter {
public:
    virtual ~MessageRouter() = default;
    virtual void deliver(WorkerId from, Message m) = 0;
};

// Single-writer counters; other threads may read them mid-run (progress
// probes), hence relaxed atomics rather than plain fields.
struct alignas(64) WorkerMetrics {
    std::atomic<std::uint64_t> iterations{0};
    std::atomic<std::uint64_t> executed{0};
    std::atomic<std::uint64_t> committed{0};
    std::atomic<std::uint64_t> rollbacks{0};
    std::atomic<std::uint64_t> sent{0};
    std::atomic<std::uint64_t> annihilated_pairs{0};
    std::atomic<std::uint64_t> fossil_dropped{0};
};

struct IterationReport {
    std::size_t drained = 0;
    std::size_t executed = 0;
    std::size_t rollbacks = 0;
    bool protocol_work = false;

    bool any_work() const { return drained != 0 || executed != 0 || rollbacks != 0 || protocol_work; }
};

struct KernelSettings {
    std::uint64_t seed = 1;
    VirtualTime t_end = kInfinity;  // events at or past this never execute
    std::uint32_t checkpoint_interval = 1;
    double gvt_interval_ms = 1000.0;
    bool wall_clock_triggers = true;  // off under the cooperative driver
    bool collect_committed = false;   // record (id, recv) of committed events
};

// One scheduler thread's worth of the optimistic kernel: a set of owned LPs,
// an inbox, and one bounded main-loop iteration. Nothing in here waits on
// another thread; blocking (if any) is the GVT coordinator's business.
template <typename Model>
    requires SimulationModel<Model>
class Worker final : public GvtPort {
public:
    using State = typename Model::State;

    Worker(WorkerId id, unsigned n_workers, const Model& model, const KernelSettings& settings,
           MessageRouter& router, GvtProtocol* protocol)
        : id_(id),
          model_(&model),
          settings_(settings),
          router_(&router),
          protocol_(protocol),
          inbox_(n_workers),
          next_trigger_(std::chrono::steady_clock::now() + interval()) {}

    Worker(const Worker&) = delete;
    Worker& operator=(const Worker&) = delete;

    void add_lp(LpId lp) {
        lp_index_.emplace(lp, lps_.size());
        lps_.emplace_back(lp, model_->initial_state(lp));
        stats_.emplace_back();
    }

    // Pre-run seeding; not thread safe, the engine uses it before starting.
    void seed_event(Message m) { lp_ref(m.dst).queue.insert_unprocessed(std::move(m)); }

    // Keeps a seeded send's sequence number from being reissued by its LP.
    // The pre-run baseline snapshot must agree, or a rollback that lands on
    // it would hand the counter back to the seeds' range.
    void note_seeded_send(LpId src, std::uint64_t seq) {
        auto& lp = lp_ref(src);
        if (seq >= lp.next_seq) {
            lp.next_seq = seq + 1;
            lp.snapshots.front().next_seq = lp.next_seq;
        }
    }

    // One pass of the main loop: incorporate arrivals (running any rollbacks
    // they force), execute at most one event, then give the GVT coordinator
    // exactly one dispatch step. Bounded regardless of other threads.
    IterationReport iterate() {
        metrics_.iterations.fetch_add(1, std::memory_order_relaxed);
        IterationReport r;
        cur_report_ = &r;
        drain_and_incorporate(r);
        execute_next(r);
        if (protocol_ != nullptr) {
            if (trigger_due() && protocol_->try_trigger(id_)) r.protocol_work = true;
            GvtStepOutcome out = protocol_->step(id_, *this);
            r.protocol_work |= out.worked;
            if (out.round_completed && round_observer_) round_observer_(out.gvt);
            const VirtualTime g = protocol_->published();
            if (g > last_gvt_acted_) {
                on_gvt(g);
                r.protocol_work = true;
            }
        }
        cur_report_ = nullptr;
        return r;
    }

    // Pull everything from the inbox into the owning LPs' queues and finish
    // any rollbacks that stragglers or anti-messages force. Afterwards every
    // owned queue is causally consistent again.
    void drain_and_incorporate(IterationReport& r) {
        r.drained += inbox_.drain([&](Message m) {
            auto it = lp_index_.find(m.dst);
            check_protocol(it != lp_index_.end(), "message delivered to a worker that does not own its LP");
            auto& lp = lps_[it->second];
            if (m.kind == MsgKind::AntiEvent)
                check_protocol(m.recv_time >= lp.committed_watermark,
                               "anti-message targets the committed past");
            lp.queue.incorporate(std::move(m), stats_[it->second]);
        });
        for (std::size_t i = 0; i < lps_.size(); ++i) {
            IncorporateStats st = std::exchange(stats_[i], IncorporateStats{});
            if (st.annihilated_pairs != 0)
                metrics_.annihilated_pairs.fetch_add(st.annihilated_pairs, std::memory_order_relaxed);
            if (st.rollback_needed()) rollback_before(lps_[i], st.rollback_bound, r);
        }
    }

    // Execute the lowest-timestamp unprocessed event across owned LPs, if
    // any sits below the horizon. Returns whether an event ran.
    bool execute_next(IterationReport& r) {
        LpState<State>* best = nullptr;
        for (auto& lp : lps_) {
            if (!lp.queue.has_unprocessed()) continue;
            if (best == nullptr ||
                event_cmp(lp.queue.peek_next(), best->queue.peek_next()) == std::strong_ordering::less)
                best = &lp;
        }
        if (best == nullptr || best->queue.peek_next().recv_time >= settings_.t_end) return false;
        if (exec_budget_ == 0) return false;
        if (exec_budget_ != kUnlimited) --exec_budget_;

        auto& lp = *best;
        Message ev = lp.queue.take_next();
        const VirtualTime now = ev.recv_time;
        outbox_.clear();
        EventContext ctx(now, lp.id, RngStream(settings_.seed, ev.id), lp.next_seq, &outbox_);
        model_->handle(lp.state, ev, ctx);
        lp.queue.push_processed(std::move(ev));
        ++lp.processed_ordinal;
        if (++lp.events_since_snapshot >= settings_.checkpoint_interval) {
            lp.snapshots.push_back(
                Snapshot<State>{now, lp.processed_ordinal, lp.next_seq, lp.state});
            lp.events_since_snapshot = 0;
        }
        for (const Message& m : outbox_) lp.output_log.push_back(OutputEntry{now, m});
        for (Message& m : outbox_) send_message(std::move(m));
        outbox_.clear();
        if (protocol_ != nullptr) protocol_->note_executed(id_, now);
        metrics_.executed.fetch_add(1, std::memory_order_relaxed);
        ++r.executed;
        return true;
    }

    // Undo every processed event with recv_time >= bound: emit anti-messages
    // for sends made at or after the bound, refill the undone events into the
    // unprocessed set, restore the newest surviving snapshot and coast
    // forward over the still-processed suffix with sends suppressed.
    void rollback_before(LpState<State>& lp, VirtualTime bound, IterationReport& r) {
        if (protocol_ != nullptr)
            check_protocol(bound >= protocol_->published(), "rollback below published GVT");
        check_protocol(bound >= lp.committed_watermark, "rollback below committed horizon");
        metrics_.rollbacks.fetch_add(1, std::memory_order_relaxed);
        ++r.rollbacks;

        while (!lp.output_log.empty() && lp.output_log.back().time >= bound) {
            send_message(make_antimessage(lp.output_log.back().msg));
            lp.output_log.pop_back();
        }

        std::size_t annihilated = 0;
        lp.queue.refill_from(bound, &annihilated);
        if (annihilated != 0)
            metrics_.annihilated_pairs.fetch_add(annihilated, std::memory_order_relaxed);
        lp.processed_ordinal = lp.fossil_dropped + lp.queue.processed_count();

        while (!lp.snapshots.empty() && lp.snapshots.back().ordinal > lp.processed_ordinal)
            lp.snapshots.pop_back();
        check_protocol(!lp.snapshots.empty(), "rollback target precedes every surviving snapshot");
        const Snapshot<State>& snap = lp.snapshots.back();
        lp.state = snap.state;
        lp.next_seq = snap.next_seq;

        const auto& done = lp.queue.processed();
        for (std::size_t i = snap.ordinal - lp.fossil_dropped; i < done.size(); ++i) {
            const Message& ev = done[i];
            EventContext ctx(ev.recv_time, lp.id, RngStream(settings_.seed, ev.id), lp.next_seq,
                             nullptr);
            model_->handle(lp.state, ev, ctx);
        }
        lp.events_since_snapshot =
            static_cast<std::uint32_t>(lp.processed_ordinal - snap.ordinal);
    }

    // Smallest timestamp this worker still has to account for.
    VirtualTime local_min() const {
        VirtualTime lo = kInfinity;
        for (const auto& lp : lps_)
            if (VirtualTime t = lp.queue.unprocessed_min(); t < lo) lo = t;
        return lo;
    }

    // Reclaim everything the new GVT makes unreachable, after banking the
    // events it commits. Keeps, per LP, the newest snapshot strictly below
    // gvt plus every processed event needed to coast forward from it.
    void fossil_collect(VirtualTime gvt) {
        commit_sweep(std::min(gvt, settings_.t_end));
        for (auto& lp : lps_) {
            std::size_t keep = lp.snapshots.size();
            while (keep > 0 && !(lp.snapshots[keep - 1].time < gvt)) --keep;
            check_protocol(keep >= 1, "fossil collection would drop every usable snapshot");
            lp.snapshots.erase(lp.snapshots.begin(), lp.snapshots.begin() + (keep - 1));
            const std::size_t dropped = lp.queue.drop_processed_before(lp.snapshots.front().time);
            lp.fossil_dropped += dropped;
            metrics_.fossil_dropped.fetch_add(dropped, std::memory_order_relaxed);
            while (!lp.output_log.empty() && lp.output_log.front().time < gvt)
                lp.output_log.pop_front();
        }
    }

    // Count (and optionally record) processed events that the horizon makes
    // immune to rollback. Idempotent per event via the per-LP watermark.
    void commit_sweep(VirtualTime horizon) {
        for (auto& lp : lps_) {
            if (horizon <= lp.committed_watermark) continue;
            for (const Message& m : lp.queue.processed()) {
                if (m.recv_time >= horizon) break;
                if (m.recv_time >= lp.committed_watermark) {
                    metrics_.committed.fetch_add(1, std::memory_order_relaxed);
                    if (settings_.collect_committed) committed_.emplace_back(m.id, m.recv_time);
                }
            }
            lp.committed_watermark = horizon;
        }
    }

    void on_gvt(VirtualTime gvt) {
        check_protocol(gvt >= last_gvt_acted_, "published GVT went backwards");
        fossil_collect(gvt);
        if (commit_hook_) commit_hook_(id_, gvt);
        last_gvt_acted_ = gvt;
    }

    // GvtPort
    void port_drain_incorporate() override {
        IterationReport scratch;
        drain_and_incorporate(cur_report_ != nullptr ? *cur_report_ : scratch);
    }
    void port_execute_one() override {
        IterationReport scratch;
        execute_next(cur_report_ != nullptr ? *cur_report_ : scratch);
    }
    VirtualTime port_local_min() override { return local_min(); }

    void send_message(Message m) {
        metrics_.sent.fetch_add(1, std::memory_order_relaxed);
        if (protocol_ != nullptr) protocol_->note_send(id_, m.recv_time);
        router_->deliver(id_, std::move(m));
    }

    WorkerId id() const { return id_; }
    Inbox& inbox() { return inbox_; }
    const Inbox& inbox() const { return inbox_; }
    WorkerMetrics& metrics() { return metrics_; }
    const WorkerMetrics& metrics() const { return metrics_; }
    std::vector<LpState<State>>& lps() { return lps_; }
    const std::vector<LpState<State>>& lps() const { return lps_; }
    VirtualTime last_gvt_acted() const { return last_gvt_acted_; }
    const std::vector<std::pair<MessageId, VirtualTime>>& committed_trace() const {
        return committed_;
    }

    // Test and driver knobs.
    void arm_trigger() { armed_trigger_ = true; }
    void set_triggers_enabled(bool on) { triggers_enabled_ = on; }
    void set_exec_budget(std::uint64_t n) { exec_budget_ = n; }
    void set_commit_hook(std::function<void(WorkerId, VirtualTime)> fn) {
        commit_hook_ = std::move(fn);
    }
    void set_round_observer(std::function<void(VirtualTime)> fn) {
        round_observer_ = std::move(fn);
    }

private:
    static constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

    std::chrono::steady_clock::duration interval() const {
        return std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double, std::milli>(settings_.gvt_interval_ms));
    }

    bool trigger_due() {
        if (!triggers_enabled_) return false;
        if (armed_trigger_) {
            armed_trigger_ = false;
            return true;
        }
        if (!settings_.wall_clock_triggers) return false;
        const auto now = std::chrono::steady_clock::now();
        if (now < next_trigger_) return false;
        next_trigger_ = now + interval();
        return true;
    }

    LpState<State>& lp_ref(LpId id) {
        auto it = lp_index_.find(id);
        check_protocol(it != lp_index_.end(), "unknown LP id");
        return lps_[it->second];
    }

    WorkerId id_;
    const Model* model_;
    KernelSettings settings_;
    MessageRouter* router_;
    GvtProtocol* protocol_;
    Inbox inbox_;

    std::vector<LpState<State>> lps_;
    std::unordered_map<LpId, std::size_t> lp_index_;
    std::vector<IncorporateStats> stats_;
    std::vector<Message> outbox_;
    std::vector<std::pair<MessageId, VirtualTime>> committed_;

    WorkerMetrics metrics_;
    VirtualTime last_gvt_acted_ = -kInfinity;
    IterationReport* cur_report_ = nullptr;

    bool triggers_enabled_ = true;
    bool armed_trigger_ = false;
    std::uint64_t exec_budget_ = kUnlimited;
    std::chrono::steady_clock::time_point next_trigger_;

    std::function<void(WorkerId, VirtualTime)> commit_hook_;
    std::function<void(VirtualTime)> round_observer_;
};

}  // namespace timewarp
