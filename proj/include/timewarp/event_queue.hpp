#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <deque>
#include <set>
#include <unordered_map>

#include "timewarp/fault.hpp"
#include "timewarp/message.hpp"

namespace timewarp {

// Accumulated over one incorporation batch. rollback_bound == kInfinity means
// the batch stayed in this LP's future and no rollback is required.
struct IncorporateStats {
    std::size_t inserted = 0;
    std::size_t annihilated_pairs = 0;
    VirtualTime rollback_bound = kInfinity;

    bool rollback_needed() const { return rollback_bound != kInfinity; }
};

// Per-LP event store, split into the processed past (ascending event order)
// and the unprocessed future. Anti-messages cancel their target on contact;
// an anti that beats its target into the queue waits in a pending table and
// cancels at insertion time instead.
//
// Cancellation matches on (id, recv_time), not id alone: after a rollback
// the sender re-issues an id whose receive time may have moved, and the
// anti-message aimed at the superseded copy must not eat the current one.
class EventQueue {
public:
    // recv_time of the last processed event; 0 before anything ran.
    VirtualTime clock() const { return processed_.empty() ? 0.0 : processed_.back().recv_time; }

    // Route one arriving message. Stragglers and anti-messages aimed at the
    // processed past only *flag* the rollback (via stats); queue surgery for
    // those happens when the owner runs the rollback.
    void incorporate(Message m, IncorporateStats& st) {
        const VirtualTime recv = m.recv_time;
        if (m.kind == MsgKind::Event) {
            const bool straggler = !processed_.empty() && recv <= clock();
            if (insert_unprocessed(std::move(m))) {
                ++st.inserted;
                if (straggler) bump_bound(st, recv);
            } else {
                ++st.annihilated_pairs;
            }
            return;
        }
        // anti-message
        if (cancel_unprocessed(m)) {
            ++st.annihilated_pairs;
            return;
        }
        if (!processed_.empty() && recv <= clock()) {
            // Target sits in the processed past. The rollback refills it into
            // the unprocessed set, where the pending entry cancels it.
            bump_bound(st, recv);
        }
        pending_anti_[CopyKey{m.id, recv}] += 1;
    }

    // True if the event went in; false if it died against a pending anti.
    bool insert_unprocessed(Message m) {
        if (auto it = pending_anti_.find(CopyKey{m.id, m.recv_time}); it != pending_anti_.end()) {
            if (--it->second == 0) pending_anti_.erase(it);
            return false;
        }
        auto [it, fresh] = unprocessed_.insert(std::move(m));
        check_protocol(fresh, "duplicate live message id in unprocessed queue");
        index_.emplace(CopyKey{it->id, it->recv_time}, it);
        return true;
    }

    bool has_unprocessed() const { return !unprocessed_.empty(); }
    const Message& peek_next() const { return *unprocessed_.begin(); }

    Message take_next() {
        auto it = unprocessed_.begin();
        Message m = *it;
        index_.erase(CopyKey{m.id, m.recv_time});
        unprocessed_.erase(it);
        return m;
    }

    void push_processed(Message m) {
        if (!processed_.empty())
            require(event_cmp(processed_.back(), m) == std::strong_ordering::less,
                    "processed events must advance in event order");
        processed_.push_back(std::move(m));
    }

    // Smallest timestamp this LP still has to account for: unprocessed events
    // plus any parked anti-messages (those name work that is not finished).
    VirtualTime unprocessed_min() const {
        VirtualTime lo = unprocessed_.empty() ? kInfinity : unprocessed_.begin()->recv_time;
        for (const auto& [key, count] : pending_anti_)
            if (key.recv_time < lo) lo = key.recv_time;
        return lo;
    }

    // Move every processed event with recv_time >= bound back into the
    // unprocessed set (newest first, so the processed deque stays ordered).
    // Returns how many were moved; refilled events can cancel against
    // pending anti-messages on the way in.
    std::size_t refill_from(VirtualTime bound, std::size_t* annihilated = nullptr) {
        std::size_t moved = 0;
        while (!processed_.empty() && processed_.back().recv_time >= bound) {
            Message m = std::move(processed_.back());
            processed_.pop_back();
            if (insert_unprocessed(std::move(m))) {
                ++moved;
            } else if (annihilated != nullptr) {
                ++*annihilated;
            }
        }
        return moved;
    }

    const std::deque<Message>& processed() const { return processed_; }

    std::size_t drop_processed_before(VirtualTime t) {
        std::size_t dropped = 0;
        while (!processed_.empty() && processed_.front().recv_time < t) {
            processed_.pop_front();
            ++dropped;
        }
        return dropped;
    }

    std::size_t unprocessed_count() const { return unprocessed_.size(); }
    std::size_t processed_count() const { return processed_.size(); }
    std::size_t pending_anti_count() const {
        std::size_t n = 0;
        for (const auto& [key, count] : pending_anti_) n += count;
        return n;
    }

    template <typename Fn>
    void for_each_unprocessed(Fn&& fn) const {
        for (const auto& m : unprocessed_) fn(m);
    }

private:
    // One concrete copy of a message: the id plus the receive time this copy
    // carries. Distinct copies of a re-sent id get distinct keys.
    struct CopyKey {
        MessageId id;
        VirtualTime recv_time = 0;

        friend bool operator==(const CopyKey&, const CopyKey&) = default;
    };

    struct CopyKeyHash {
        std::size_t operator()(const CopyKey& k) const noexcept {
            std::uint64_t bits;
            static_assert(sizeof bits == sizeof k.recv_time);
            std::memcpy(&bits, &k.recv_time, sizeof bits);
            std::uint64_t h = MessageIdHash{}(k.id) ^ (bits * 0x9e3779b97f4a7c15ULL);
            h ^= h >> 29;
            return static_cast<std::size_t>(h);
        }
    };

    static void bump_bound(IncorporateStats& st, VirtualTime t) {
        if (t < st.rollback_bound) st.rollback_bound = t;
    }

    bool cancel_unprocessed(const Message& anti) {
        auto it = index_.find(CopyKey{anti.id, anti.recv_time});
        if (it == index_.end()) return false;
        unprocessed_.erase(it->second);
        index_.erase(it);
        return true;
    }

    std::set<Message, EventOrderLess> unprocessed_;
    std::unordered_map<CopyKey, std::set<Message, EventOrderLess>::iterator, CopyKeyHash> index_;
    std::unordered_map<CopyKey, std::size_t, CopyKeyHash> pending_anti_;
    std::deque<Message> processed_;
};

}  // namespace timewarp
