#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "timewarp/fault.hpp"
#include "timewarp/message.hpp"
#include "timewarp/model.hpp"

namespace timewarp {

template <typename Model>
struct OracleRun {
    std::vector<std::pair<MessageId, VirtualTime>> trace;  // execution order
    std::vector<typename Model::State> states;             // indexed by LpId
    std::uint64_t executed = 0;
};

// Ground-truth executor: one thread, one ordered pending set, strictly
// lowest-timestamp-first. No rollback can occur, so whatever this produces
// is what any correct optimistic run must commit. The observer fires after
// each event with the event and the full state vector.
template <typename Model, typename Observer>
    requires SimulationModel<Model>
OracleRun<Model> run_sequential(const Model& model, unsigned num_lps,
                                const std::vector<Message>& initial, VirtualTime t_end,
                                std::uint64_t seed, Observer&& after_event,
                                std::uint64_t max_events = ~std::uint64_t{0}) {
    OracleRun<Model> out;
    out.states.reserve(num_lps);
    for (LpId lp = 0; lp < num_lps; ++lp) out.states.push_back(model.initial_state(lp));

    std::vector<std::uint64_t> next_seq(num_lps, 0);
    std::set<Message, EventOrderLess> pending;
    for (const Message& m : initial) {
        require(m.kind == MsgKind::Event, "oracle seeds must be events");
        require(m.dst < num_lps && m.id.src_lp < num_lps, "oracle seed references unknown LP");
        check_protocol(pending.insert(m).second, "duplicate event id among oracle seeds");
        if (m.id.seq >= next_seq[m.id.src_lp]) next_seq[m.id.src_lp] = m.id.seq + 1;
    }

    std::vector<Message> outbox;
    while (!pending.empty() && pending.begin()->recv_time < t_end && out.executed < max_events) {
        Message ev = *pending.begin();
        pending.erase(pending.begin());
        outbox.clear();
        EventContext ctx(ev.recv_time, ev.dst, RngStream(seed, ev.id), next_seq[ev.dst], &outbox);
        model.handle(out.states[ev.dst], ev, ctx);
        for (const Message& m : outbox)
            check_protocol(pending.insert(m).second, "duplicate event id in oracle run");
        out.trace.emplace_back(ev.id, ev.recv_time);
        ++out.executed;
        after_event(ev, out.states);
    }
    return out;
}

template <typename Model>
    requires SimulationModel<Model>
OracleRun<Model> run_sequential(const Model& model, unsigned num_lps,
                                const std::vector<Message>& initial, VirtualTime t_end,
                                std::uint64_t seed, std::uint64_t max_events = ~std::uint64_t{0}) {
    return run_sequential(
        model, num_lps, initial, t_end, seed,
        [](const Message&, const std::vector<typename Model::State>&) {}, max_events);
}

}  // namespace timewarp
