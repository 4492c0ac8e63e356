#pragma once

// Shared helpers for the test suites: a fully scripted model with
// hand-checkable outcomes, a router that just records, and a do-nothing
// GVT port for driving coordinator state machines directly.

#include <map>
#include <utility>
#include <vector>

#include "timewarp/gvt_protocol.hpp"
#include "timewarp/message.hpp"
#include "timewarp/model.hpp"
#include "timewarp/rng.hpp"
#include "timewarp/worker.hpp"

namespace twtest {

using namespace timewarp;

inline Message ev(LpId src, std::uint64_t seq, LpId dst, VirtualTime recv) {
    return Message{MessageId{src, seq}, src, dst, 0.0, recv, MsgKind::Event, Payload{}};
}

struct SendPlan {
    LpId dst;
    VirtualTime at;
};

struct ScriptedState {
    std::vector<std::pair<std::uint64_t, VirtualTime>> log;
    std::uint64_t digest = 0;
};

struct ScriptedModel {
    using State = ScriptedState;
    std::map<std::pair<LpId, std::uint64_t>, std::vector<SendPlan>> script;

    State initial_state(LpId) const { return {}; }

    void handle(State& s, const Message& event, EventContext& ctx) const {
        s.log.emplace_back(event.id.seq, event.recv_time);
        s.digest = mix64(s.digest ^ event.id.seq ^ static_cast<std::uint64_t>(event.recv_time * 8));
        if (auto it = script.find({event.id.src_lp, event.id.seq}); it != script.end())
            for (const SendPlan& p : it->second) ctx.send(p.dst, p.at, Payload::of_byte(1));
    }
};

struct RecordingRouter final : MessageRouter {
    std::vector<Message> out;
    void deliver(WorkerId, Message m) override { out.push_back(std::move(m)); }
};

// Stands in for a worker when only the coordinator is under test.
struct StubPort final : GvtPort {
    VirtualTime min = kInfinity;
    int drains = 0;
    int executes = 0;
    void port_drain_incorporate() override { ++drains; }
    void port_execute_one() override { ++executes; }
    VirtualTime port_local_min() override { return min; }
};

}  // namespace twtest
