#pragma once

#include <concepts>
#include <cstdint>
#include <vector>

#include "timewarp/fault.hpp"
#include "timewarp/message.hpp"
#include "timewarp/rng.hpp"

namespace timewarp {

// Handed to a model's event handler. Sends go through here so the kernel can
// stamp ids and either materialize the message or, during coast-forward
// re-execution, advance the send sequence without emitting anything.
class EventContext {
public:
    EventContext(VirtualTime now, LpId self, RngStream rng, std::uint64_t& next_seq,
                 std::vector<Message>* out)
        : now_(now), self_(self), rng_(rng), next_seq_(next_seq), out_(out) {}

    VirtualTime now() const { return now_; }
    LpId self() const { return self_; }
    RngStream& rng() { return rng_; }

    void send(LpId dst, VirtualTime recv_time, Payload payload) {
        require(recv_time > now_, "send must target the strict future");
        const std::uint64_t seq = next_seq_++;
        if (out_ != nullptr) {
            out_->push_back(Message{MessageId{self_, seq}, self_, dst, now_, recv_time,
                                    MsgKind::Event, payload});
        }
    }

private:
    VirtualTime now_;
    LpId self_;
    RngStream rng_;
    std::uint64_t& next_seq_;
    std::vector<Message>* out_;  // null while coast-forwarding
};

// A model supplies per-LP state plus a deterministic handler: same state,
// same event, same rng stream => same state mutation and same sends. That
// determinism is what makes rollback re-execution reproduce identical ids.
template <typename M>
concept SimulationModel = std::copy_constructible<typename M::State> &&
    requires(const M m, typename M::State& s, const Message& ev, EventContext& ctx, LpId lp) {
        { m.initial_state(lp) } -> std::same_as<typename M::State>;
        m.handle(s, ev, ctx);
    };

}  // namespace timewarp
