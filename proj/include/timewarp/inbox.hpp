#pragma once

#include <atomic>
#include <cstddef>
#include <utility>
#include <vector>

#include "timewarp/message.hpp"

namespace timewarp {

// Unbounded single-producer single-consumer linked queue. Both ends are
// wait-free: push is one allocation plus one release store, pop follows one
// acquire load. A completed push is always visible to a later pop; there is
// no CAS retry and no window where a stalled producer hides another's work.
template <typename T>
class SpscQueue {
public:
    SpscQueue() {
        Node* stub = new Node{};
        head_ = stub;
        tail_ = stub;
    }
    SpscQueue(const SpscQueue&) = delete;
    SpscQueue& operator=(const SpscQueue&) = delete;
    SpscQueue(SpscQueue&& other) noexcept
        : head_(std::exchange(other.head_, nullptr)), tail_(std::exchange(other.tail_, nullptr)) {}
    SpscQueue& operator=(SpscQueue&&) = delete;

    ~SpscQueue() {
        for (Node* n = head_; n != nullptr;) {
            Node* next = n->next.load(std::memory_order_relaxed);
            delete n;
            n = next;
        }
    }

    // producer side
    void push(T value) {
        Node* n = new Node{};
        n->value = std::move(value);
        tail_->next.store(n, std::memory_order_release);
        tail_ = n;
    }

    // consumer side; returns false when no completed push is pending
    bool pop(T& out) {
        Node* next = head_->next.load(std::memory_order_acquire);
        if (next == nullptr) return false;
        out = std::move(next->value);
        delete std::exchange(head_, next);
        return true;
    }

    // Read-only walk of pending entries. Only safe when producer and consumer
    // are quiescent (used by the cooperative driver's audit sweeps).
    template <typename Fn>
    void scan(Fn&& fn) const {
        for (Node* n = head_->next.load(std::memory_order_acquire); n != nullptr;
             n = n->next.load(std::memory_order_acquire)) {
            fn(n->value);
        }
    }

private:
    struct Node {
        std::atomic<Node*> next{nullptr};
        T value{};
    };

    alignas(64) Node* head_;  // consumer-owned; first node is a consumed stub
    alignas(64) Node* tail_;  // producer-owned
};

// Per-worker message inbox: one SPSC lane per sending worker. Messages from
// one sender are drained in send order (the anti-message of a send can never
// overtake the send itself); cross-sender order is whatever the drain's lane
// sweep produces.
class Inbox {
public:
    explicit Inbox(unsigned n_producers) : lanes_(n_producers) {}

    void push(WorkerId from, Message m) { lanes_[from].push(std::move(m)); }

    // Consumer only. Invokes fn on every message whose push completed before
    // this call; returns the number of messages handed over.
    template <typename Fn>
    std::size_t drain(Fn&& fn) {
        std::size_t count = 0;
        Message m;
        for (auto& lane : lanes_) {
            while (lane.pop(m)) {
                fn(std::move(m));
                ++count;
            }
        }
        return count;
    }

    // Quiescent-only inspection for audit sweeps.
    template <typename Fn>
    void scan(Fn&& fn) const {
        for (const auto& lane : lanes_) lane.scan(fn);
    }

private:
    std::vector<SpscQueue<Message>> lanes_;
};

}  // namespace timewarp
