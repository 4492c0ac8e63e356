#include <array>

#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"
#include "timewarp/engine.hpp"
#include "timewarp/gvt_fh.hpp"
#include "timewarp/gvt_waitfree.hpp"

using namespace timewarp;
using twtest::StubPort;
using twtest::ev;

namespace {

// Walk every worker through one full wait-free round, in worker order.
VirtualTime complete_wf_round(WaitFreeGvt& gvt, std::array<StubPort, 3>& ports) {
    REQUIRE(gvt.try_trigger(0));
    VirtualTime published = kInfinity;
    bool completed = false;
    for (int pass = 0; pass < 6 && !completed; ++pass) {
        for (WorkerId w = 0; w < 3; ++w) {
            const GvtStepOutcome out = gvt.step(w, ports[w]);
            if (out.round_completed) {
                completed = true;
                published = out.gvt;
            }
        }
    }
    REQUIRE(completed);
    // let everyone run the end-of-round reset
    for (WorkerId w = 0; w < 3; ++w) gvt.step(w, ports[w]);
    REQUIRE_FALSE(gvt.round_active());
    return published;
}

}  // namespace

TEST_CASE("wait-free round walks the five phases under counter guards") {
    WaitFreeGvt gvt(3);
    std::array<StubPort, 3> ports;
    ports[0].min = 3.2;
    ports[1].min = 7.1;
    ports[2].min = 4.4;

    REQUIRE_FALSE(gvt.round_active());
    REQUIRE(gvt.try_trigger(0));
    CHECK(gvt.round_active());
    CHECK(gvt.flag());
    CHECK(gvt.counter_a() == 3);
    CHECK_FALSE(gvt.try_trigger(1));  // a live round blocks re-triggering

    // first phase: everyone records its local minimum
    CHECK(gvt.step(0, ports[0]).worked);
    CHECK(gvt.phase_of(0) == WaitFreeGvt::Phase::Send);
    CHECK(gvt.counter_a() == 2);

    // worker 0 is gated until the whole phase-A column drains
    CHECK_FALSE(gvt.step(0, ports[0]).worked);
    CHECK(gvt.phase_of(0) == WaitFreeGvt::Phase::Send);

    CHECK(gvt.step(1, ports[1]).worked);
    CHECK(gvt.step(2, ports[2]).worked);
    CHECK(gvt.counter_a() == 0);
    CHECK(gvt.min_a_of(0) == 3.2);
    CHECK(gvt.min_a_of(1) == 7.1);
    CHECK(gvt.min_a_of(2) == 4.4);

    // send phase: each worker executes one event's worth of progress
    for (WorkerId w = 0; w < 3; ++w) REQUIRE(gvt.step(w, ports[w]).worked);
    CHECK(gvt.counter_send() == 0);
    CHECK(ports[0].executes == 1);

    // second minima and slot publication
    for (WorkerId w = 0; w < 3; ++w) REQUIRE(gvt.step(w, ports[w]).worked);
    CHECK(gvt.counter_b() == 0);
    CHECK(gvt.slot_of(0) == 3.2);
    CHECK(gvt.slot_of(1) == 7.1);
    CHECK(gvt.slot_of(2) == 4.4);
    CHECK(gvt.compute_global_min() == 3.2);

    // awareness: the value is published by the first worker through, without
    // waiting for the round to finish
    GvtStepOutcome aware0 = gvt.step(0, ports[0]);
    CHECK(aware0.worked);
    CHECK_FALSE(aware0.round_completed);
    CHECK(aware0.gvt == 3.2);
    CHECK(gvt.published() == 3.2);
    CHECK(gvt.round_active());

    CHECK_FALSE(gvt.step(1, ports[1]).round_completed);
    GvtStepOutcome aware2 = gvt.step(2, ports[2]);
    CHECK(aware2.round_completed);  // only the last one through lowers the flag
    CHECK(aware2.gvt == 3.2);
    CHECK_FALSE(gvt.flag());
    CHECK(gvt.rounds_completed() == 1);

    // lowering the flag is not the end: workers still owe their reset, and
    // re-triggering stays blocked until the last one files it
    CHECK(gvt.round_active());
    CHECK(gvt.step(0, ports[0]).worked);
    CHECK(gvt.phase_of(0) == WaitFreeGvt::Phase::A);
    CHECK_FALSE(gvt.try_trigger(0));
    CHECK(gvt.step(1, ports[1]).worked);
    CHECK(gvt.step(2, ports[2]).worked);
    CHECK(gvt.counter_end() == 0);
    CHECK_FALSE(gvt.round_active());

    // and the next round starts clean
    CHECK(gvt.try_trigger(1));
    CHECK(gvt.counter_a() == 3);
    CHECK(gvt.flag());
}

TEST_CASE("wait-free minima fold in work done after a worker's send-phase exit") {
    WaitFreeGvt gvt(3);
    std::array<StubPort, 3> ports;  // all local minima infinite

    REQUIRE(gvt.try_trigger(0));

    // worker 0 races ahead through A and SEND
    REQUIRE(gvt.step(0, ports[0]).worked);
    // a send made between round observation and the SEND-phase exit lands in
    // the audit window
    gvt.note_send(0, 8.25);
    CHECK(gvt.step(1, ports[1]).worked);
    CHECK(gvt.step(2, ports[2]).worked);
    REQUIRE(gvt.step(0, ports[0]).worked);  // SEND: decrements, opens the late window
    CHECK(gvt.mints_of(0) == 8.25);

    // worker 0 keeps simulating while others are still in SEND: these
    // timestamps can escape every phase-B drain, so they must constrain min_B
    gvt.note_executed(0, 6.0);
    gvt.note_send(0, 6.5);
    CHECK(gvt.mints_of(0) == 8.25);  // the audit window closed at SEND exit

    REQUIRE(gvt.step(1, ports[1]).worked);
    REQUIRE(gvt.step(2, ports[2]).worked);

    REQUIRE(gvt.step(0, ports[0]).worked);  // B: min_b folds the window
    CHECK(gvt.min_b_of(0) == 6.0);
    CHECK(gvt.slot_of(0) == 6.0);

    // after min_B is filed the window is closed
    gvt.note_executed(0, 1.0);
    CHECK(gvt.min_b_of(0) == 6.0);

    REQUIRE(gvt.step(1, ports[1]).worked);
    REQUIRE(gvt.step(2, ports[2]).worked);
    for (WorkerId w = 0; w < 3; ++w) gvt.step(w, ports[w]);  // aware
    CHECK(gvt.published() == 6.0);
}

TEST_CASE("wait-free rounds complete repeatedly with matching start and end counts") {
    WaitFreeGvt gvt(3);
    std::array<StubPort, 3> ports;
    ports[0].min = 10.0;
    for (int round = 0; round < 100; ++round) {
        ports[0].min += 1.0;
        const VirtualTime g = complete_wf_round(gvt, ports);
        CHECK(g == ports[0].min);
    }
    CHECK(gvt.rounds_started() == 100);
    CHECK(gvt.rounds_completed() == 100);
    CHECK(gvt.published() == ports[0].min);
}

TEST_CASE("critical-section round counts down the flag inside the guard") {
    FujimotoHybinetteGvt gvt(3);
    std::array<StubPort, 3> ports;
    ports[0].min = 9.0;
    ports[1].min = 3.0;
    ports[2].min = 7.0;

    REQUIRE_FALSE(gvt.round_active());
    REQUIRE(gvt.try_trigger(2));
    CHECK(gvt.round_active());
    CHECK_FALSE(gvt.try_trigger(0));  // live round blocks re-trigger

    GvtStepOutcome s0 = gvt.step(0, ports[0]);
    CHECK(s0.worked);
    CHECK_FALSE(s0.round_completed);
    CHECK(ports[0].drains == 1);

    // a worker contributes exactly once per round
    CHECK_FALSE(gvt.step(0, ports[0]).worked);
    CHECK(ports[0].drains == 1);

    CHECK_FALSE(gvt.step(1, ports[1]).round_completed);
    GvtStepOutcome s2 = gvt.step(2, ports[2]);
    CHECK(s2.worked);
    CHECK(s2.round_completed);  // last contributor publishes inside the guard
    CHECK(s2.gvt == 3.0);
    CHECK(gvt.published() == 3.0);
    CHECK_FALSE(gvt.round_active());
    CHECK(gvt.rounds_completed() == 1);
    CHECK(gvt.contributions() == 3);
    CHECK(gvt.spin_tries() == 0);  // nobody contended in a single-threaded walk
}

TEST_CASE("critical-section rounds fold the send minimum since round start") {
    FujimotoHybinetteGvt gvt(2);
    std::array<StubPort, 2> ports;  // local minima infinite

    REQUIRE(gvt.try_trigger(0));
    gvt.note_send(0, 4.5);
    gvt.note_send(0, 9.0);  // later send does not raise the minimum
    CHECK(gvt.send_min_of(0) == 4.5);

    CHECK_FALSE(gvt.step(0, ports[0]).round_completed);
    gvt.note_send(0, 1.0);  // after contributing: out of the round, ignored
    CHECK(gvt.send_min_of(0) == 4.5);

    GvtStepOutcome last = gvt.step(1, ports[1]);
    REQUIRE(last.round_completed);
    CHECK(last.gvt == 4.5);

    // the next round must not inherit stale send minima
    REQUIRE(gvt.try_trigger(1));
    CHECK(gvt.send_min_of(0) == kInfinity);
    gvt.step(0, ports[0]);
    GvtStepOutcome done = gvt.step(1, ports[1]);
    REQUIRE(done.round_completed);
    CHECK(done.gvt == kInfinity);
    CHECK(gvt.rounds_started() == 2);
    CHECK(gvt.rounds_completed() == 2);
}

TEST_CASE("sends with no live round never pollute a later one") {
    FujimotoHybinetteGvt gvt(2);
    std::array<StubPort, 2> ports;
    gvt.note_send(0, 0.5);  // no round active: must not stick
    REQUIRE(gvt.try_trigger(0));
    CHECK(gvt.send_min_of(0) == kInfinity);
    gvt.step(0, ports[0]);
    const GvtStepOutcome done = gvt.step(1, ports[1]);
    REQUIRE(done.round_completed);
    CHECK(done.gvt == kInfinity);
}

TEST_CASE("engine-driven cooperative round reaches the true floor") {
    twtest::ScriptedModel model;
    EngineConfig ec;
    ec.workers = 2;
    ec.lps = 2;
    ec.wall_clock_triggers = false;
    WaitFreeGvt gvt(2);
    Engine<twtest::ScriptedModel> engine(ec, model, &gvt);

    engine.seed(ev(0, 0, 0, 3.0));
    engine.seed(ev(0, 1, 0, 5.5));
    engine.seed(ev(1, 0, 1, 4.2));

    // hold all execution so the minimum stays put, then run one round
    engine.worker(0).set_exec_budget(0);
    engine.worker(1).set_exec_budget(0);
    engine.worker(0).arm_trigger();
    for (int pass = 0; pass < 12 && gvt.rounds_completed() == 0; ++pass)
        for (WorkerId w = 0; w < 2; ++w) engine.worker(w).iterate();

    REQUIRE(gvt.rounds_completed() == 1);
    CHECK(gvt.published() == 3.0);

    const AuditSweep sweep = engine.audit();
    CHECK(sweep.live_floor == 3.0);
    CHECK(sweep.originated == 3);
    CHECK(sweep.accounted == 3);

    // release the brakes: everything executes, and the next round ends at
    // "nothing left", publishing infinity
    engine.worker(0).set_exec_budget(std::numeric_limits<std::uint64_t>::max());
    engine.worker(1).set_exec_budget(std::numeric_limits<std::uint64_t>::max());
    for (int pass = 0; pass < 8; ++pass)
        for (WorkerId w = 0; w < 2; ++w) engine.worker(w).iterate();
    engine.worker(1).arm_trigger();
    for (int pass = 0; pass < 12 && gvt.rounds_completed() < 2; ++pass)
        for (WorkerId w = 0; w < 2; ++w) engine.worker(w).iterate();

    REQUIRE(gvt.rounds_completed() == 2);
    CHECK(gvt.published() == kInfinity);

    // give every worker a pass to act on the final value
    for (int pass = 0; pass < 2; ++pass)
        for (WorkerId w = 0; w < 2; ++w) engine.worker(w).iterate();
    CHECK(engine.totals().executed == 3);
    CHECK(engine.totals().committed == 3);  // fossil sweep banked everything
}

TEST_CASE("gvt values never regress across rounds") {
    WaitFreeGvt gvt(3);
    std::array<StubPort, 3> ports;
    ports[1].min = 2.0;
    VirtualTime last = -kInfinity;
    for (int round = 0; round < 20; ++round) {
        ports[1].min += 0.5;
        const VirtualTime g = complete_wf_round(gvt, ports);
        REQUIRE(g >= last);
        last = g;
    }
}
