#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "timewarp/event_queue.hpp"
#include "timewarp/message.hpp"

namespace timewarp {

// State checkpoint taken right after processing an event. `ordinal` is the
// absolute count of events processed at that point; recv ties make the time
// alone ambiguous, the ordinal never is.
template <typename State>
struct Snapshot {
    VirtualTime time = -kInfinity;
    std::uint64_t ordinal = 0;
    std::uint64_t next_seq = 0;
    State state;
};

// One send, remembered so a rollback can cancel it. `time` is the recv_time
// of the event whose handler produced the message.
struct OutputEntry {
    VirtualTime time = 0;
    Message msg;
};

template <typename State>
struct LpState {
    LpId id = 0;
    EventQueue queue;
    State state;
    std::uint64_t next_seq = 0;

    std::vector<Snapshot<State>> snapshots;  // ascending; starts with the pre-run state
    std::deque<OutputEntry> output_log;      // ascending by time

    std::uint64_t processed_ordinal = 0;      // events processed over all time
    std::uint64_t fossil_dropped = 0;         // prefix of processed deque reclaimed so far
    std::uint32_t events_since_snapshot = 0;
    VirtualTime committed_watermark = 0;      // commits below this are already counted

    LpState(LpId lp, State initial) : id(lp), state(std::move(initial)) {
        snapshots.push_back(Snapshot<State>{-kInfinity, 0, 0, state});
    }
};

}  // namespace timewarp
