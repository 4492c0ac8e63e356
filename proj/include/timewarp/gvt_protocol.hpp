#pragma once

#include <atomic>
#include <cstdint>

#include "timewarp/virtual_time.hpp"

namespace timewarp {

// The slice of a worker a GVT coordinator is allowed to drive.
class GvtPort {
public:
    virtual ~GvtPort() = default;
    virtual void port_drain_incorporate() = 0;
    virtual void port_execute_one() = 0;
    virtual VirtualTime port_local_min() = 0;
};

struct GvtStepOutcome {
    bool worked = false;           // this step ran a protocol action
    bool round_completed = false;  // this step finished the round (one worker per round)
    VirtualTime gvt = kInfinity;   // valid when round_completed
};

// Coordinators are driven, never driving: each worker calls step() once per
// main-loop iteration and reports activity through the note_* hooks. All
// blocking behavior (or its absence) lives behind this interface.
class GvtProtocol {
public:
    virtual ~GvtProtocol() = default;

    // Called when the worker's GVT interval timer fires. Returns true if this
    // call actually started a new round.
    virtual bool try_trigger(WorkerId w) = 0;

    virtual GvtStepOutcome step(WorkerId w, GvtPort& port) = 0;

    // Every message/anti-message send and every event execution passes
    // through these; some coordinators track minima over send windows.
    virtual void note_send(WorkerId w, VirtualTime recv_time) = 0;
    virtual void note_executed(WorkerId w, VirtualTime recv_time) = 0;

    virtual VirtualTime published() const = 0;
    virtual bool round_active() const = 0;
    virtual std::uint64_t rounds_started() const = 0;
    virtual std::uint64_t rounds_completed() const = 0;
    virtual std::uint64_t spin_tries() const { return 0; }
};

struct alignas(64) PaddedTimeSlot {
    std::atomic<VirtualTime> v{kInfinity};
};

}  // namespace timewarp
