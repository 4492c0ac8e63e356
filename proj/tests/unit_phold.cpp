#include <cstddef>
#include <sstream>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "timewarp/oracle.hpp"
#include "timewarp/phold.hpp"

using namespace timewarp;

namespace {

std::size_t global_buffers(const std::vector<PholdState>& states) {
    std::size_t n = 0;
    for (const auto& s : states) n += s.buffers.size();
    return n;
}

}  // namespace

TEST_CASE("initialization seeds every LP with its buffers and one event") {
    PholdConfig cfg;
    cfg.num_lps = 4;
    cfg.initial_buffers_per_lp = 2;
    PholdModel model(cfg);

    for (LpId lp = 0; lp < 4; ++lp) {
        const PholdState s = model.initial_state(lp);
        CHECK(s.buffers.size() == 2);
        std::size_t bytes = 0;
        for (const auto& b : s.buffers) {
            CHECK(b.size() >= cfg.buffer_min_bytes);
            CHECK(b.size() <= cfg.buffer_max_bytes);
            bytes += b.size();
        }
        CHECK(s.total_bytes == bytes);
    }

    const auto events = phold_initial_events(cfg);
    REQUIRE(events.size() == 4);
    for (LpId lp = 0; lp < 4; ++lp) {
        CHECK(events[lp].id == MessageId{lp, 0});
        CHECK(events[lp].dst == lp);
        CHECK(events[lp].kind == MsgKind::Event);
        CHECK(events[lp].recv_time > 0.0);
        CHECK(events[lp].payload.bytes[0] == kDeallocTag);
    }

    // same config, same world
    const auto again = phold_initial_events(cfg);
    for (LpId lp = 0; lp < 4; ++lp) REQUIRE(again[lp].recv_time == events[lp].recv_time);
    const PholdState s0 = model.initial_state(2);
    const PholdState s1 = model.initial_state(2);
    CHECK(s0.digest() == s1.digest());
}

TEST_CASE("deallocation frees one buffer and schedules exactly two events") {
    PholdConfig cfg;
    cfg.num_lps = 4;
    cfg.initial_buffers_per_lp = 3;
    PholdModel model(cfg);

    PholdState s = model.initial_state(0);
    REQUIRE(s.buffers.size() == 3);

    const Message ev{MessageId{0, 0}, 0, 0, 0.0, 1.0, MsgKind::Event, Payload::of_byte(kDeallocTag)};
    std::vector<Message> out;
    std::uint64_t next_seq = 1;
    EventContext ctx(ev.recv_time, 0, RngStream(cfg.seed, ev.id), next_seq, &out);
    model.handle(s, ev, ctx);

    CHECK(s.buffers.size() == 2);
    REQUIRE(out.size() == 2);
    CHECK(out[0].payload.bytes[0] == kAllocTag);
    CHECK(out[0].dst != 0);  // allocation goes to some other LP
    CHECK(out[0].dst < 4);
    CHECK(out[1].payload.bytes[0] == kDeallocTag);
    CHECK(out[1].dst == 0);  // the successor deallocation is self-addressed
    for (const Message& m : out) {
        CHECK(m.recv_time > ev.recv_time);
        CHECK(m.id.src_lp == 0);
    }
    CHECK(out[0].id.seq == 1);
    CHECK(out[1].id.seq == 2);
    CHECK(next_seq == 3);
}

TEST_CASE("allocation adds one buffer and schedules nothing") {
    PholdConfig cfg;
    cfg.num_lps = 4;
    cfg.initial_buffers_per_lp = 1;
    PholdModel model(cfg);

    PholdState s = model.initial_state(0);
    const std::size_t bytes_before = s.total_bytes;
    const Message ev{MessageId{1, 5}, 1, 0, 0.0, 2.0, MsgKind::Event, Payload::of_byte(kAllocTag)};
    std::vector<Message> out;
    std::uint64_t next_seq = 0;
    EventContext ctx(ev.recv_time, 0, RngStream(cfg.seed, ev.id), next_seq, &out);
    model.handle(s, ev, ctx);

    CHECK(s.buffers.size() == 2);
    CHECK(s.total_bytes > bytes_before);
    CHECK(out.empty());
}

TEST_CASE("handling is a pure function of state, event, and stream") {
    PholdConfig cfg;
    cfg.num_lps = 8;
    PholdModel model(cfg);
    const Message ev{MessageId{3, 7}, 3, 3, 0.0, 4.0, MsgKind::Event, Payload::of_byte(kDeallocTag)};

    auto run = [&] {
        PholdState s = model.initial_state(3);
        std::vector<Message> out;
        std::uint64_t next_seq = 8;
        EventContext ctx(ev.recv_time, 3, RngStream(cfg.seed, ev.id), next_seq, &out);
        model.handle(s, ev, ctx);
        return std::pair{s.digest(), out};
    };
    const auto [d1, out1] = run();
    const auto [d2, out2] = run();
    CHECK(d1 == d2);
    REQUIRE(out1.size() == out2.size());
    for (std::size_t i = 0; i < out1.size(); ++i) {
        CHECK(out1[i].id == out2[i].id);
        CHECK(out1[i].recv_time == out2[i].recv_time);
        CHECK(out1[i].dst == out2[i].dst);
    }
}

TEST_CASE("skewed destinations stay legal and deterministic") {
    PholdConfig cfg;
    cfg.num_lps = 16;
    cfg.skewed_destinations = true;
    PholdModel model(cfg);

    PholdState s = model.initial_state(5);
    std::vector<LpId> picks;
    for (std::uint64_t k = 0; k < 200; ++k) {
        const Message ev{MessageId{5, k + 1}, 5, 5, 0.0, 1.0 + static_cast<double>(k),
                         MsgKind::Event, Payload::of_byte(kDeallocTag)};
        std::vector<Message> out;
        std::uint64_t next_seq = 1000 * (k + 1);
        EventContext ctx(ev.recv_time, 5, RngStream(cfg.seed, ev.id), next_seq, &out);
        model.handle(s, ev, ctx);
        REQUIRE(out.size() == 2);
        CHECK(out[0].dst != 5);
        CHECK(out[0].dst < 16);
        picks.push_back(out[0].dst);
    }
    // ring-nearest LPs should dominate under the skew
    std::size_t near = 0;
    for (LpId d : picks)
        if (d == 6 || d == 7) ++near;
    CHECK(near > picks.size() / 4);
}

TEST_CASE("oracle runs are ordered, bounded by the horizon, and repeatable") {
    PholdConfig cfg;
    cfg.num_lps = 6;
    cfg.initial_buffers_per_lp = 4;
    cfg.buffer_min_bytes = 64;
    cfg.buffer_max_bytes = 256;
    cfg.t_end = 40.0;
    PholdModel model(cfg);
    const auto initial = phold_initial_events(cfg);

    const auto a = run_sequential(model, cfg.num_lps, initial, cfg.t_end, cfg.seed);
    CHECK(a.executed > 0);
    for (std::size_t i = 1; i < a.trace.size(); ++i)
        REQUIRE(a.trace[i - 1].second <= a.trace[i].second);
    for (const auto& [id, t] : a.trace) REQUIRE(t < cfg.t_end);

    const auto b = run_sequential(model, cfg.num_lps, initial, cfg.t_end, cfg.seed);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        REQUIRE(a.trace[i].first == b.trace[i].first);
        REQUIRE(a.trace[i].second == b.trace[i].second);
    }
    for (LpId lp = 0; lp < cfg.num_lps; ++lp)
        REQUIRE(a.states[lp].digest() == b.states[lp].digest());

    const auto empty = run_sequential(model, cfg.num_lps, {}, cfg.t_end, cfg.seed);
    CHECK(empty.executed == 0);
    CHECK(empty.trace.empty());
}

TEST_CASE("global buffer count holds its band over a medium run") {
    // enough buffers per LP that no LP plausibly runs empty: an empty-handed
    // deallocation still schedules an allocation, which would inject buffers
    PholdConfig cfg;
    cfg.num_lps = 8;
    cfg.initial_buffers_per_lp = 64;
    cfg.buffer_min_bytes = 32;
    cfg.buffer_max_bytes = 128;
    cfg.t_end = 300.0;
    PholdModel model(cfg);

    const std::size_t initial_count = 8 * 64;
    const std::size_t warmup = 500;
    std::size_t lo = initial_count;
    std::size_t hi = initial_count;
    std::size_t count = 0;
    const auto run = run_sequential(model, cfg.num_lps, phold_initial_events(cfg), cfg.t_end,
                                    cfg.seed,
                                    [&](const Message&, const std::vector<PholdState>& states) {
                                        if (++count <= warmup) return;
                                        const std::size_t g = global_buffers(states);
                                        lo = std::min(lo, g);
                                        hi = std::max(hi, g);
                                    });
    REQUIRE(run.executed > 2000);
    // each outstanding allocation event is one buffer in flight; the band
    // stays near the initial population
    CHECK(lo >= initial_count * 3 / 4);
    CHECK(hi <= initial_count * 5 / 4);
}

TEST_CASE("config text round-trips with comments, overrides, and errors") {
    std::stringstream good(R"(# workload shape
num_lps = 12
initial_buffers_per_lp=5
buffer_min_bytes = 128
buffer_max_bytes = 512
read_fraction = 0.25
write_fraction=0.05
mean_delay = 2.5
t_end = 77.0
seed = 99
skewed_destinations = true
)");
    const PholdConfig cfg = parse_phold_config(good);
    CHECK(cfg.num_lps == 12);
    CHECK(cfg.initial_buffers_per_lp == 5);
    CHECK(cfg.buffer_min_bytes == 128);
    CHECK(cfg.buffer_max_bytes == 512);
    CHECK(cfg.read_fraction == 0.25);
    CHECK(cfg.write_fraction == 0.05);
    CHECK(cfg.mean_delay == 2.5);
    CHECK(cfg.t_end == 77.0);
    CHECK(cfg.seed == 99);
    CHECK(cfg.skewed_destinations);

    std::stringstream unknown("no_such_knob = 3\n");
    CHECK_THROWS_AS(parse_phold_config(unknown), ConfigError);
    std::stringstream bad_value("num_lps = twelve\n");
    CHECK_THROWS_AS(parse_phold_config(bad_value), ConfigError);
    std::stringstream no_equals("num_lps 12\n");
    CHECK_THROWS_AS(parse_phold_config(no_equals), ConfigError);
    std::stringstream inverted("buffer_min_bytes = 512\nbuffer_max_bytes = 128\n");
    CHECK_THROWS_AS(parse_phold_config(inverted), ConfigError);
    std::stringstream bad_fraction("read_fraction = 1.5\n");
    CHECK_THROWS_AS(parse_phold_config(bad_fraction), ConfigError);
    CHECK_THROWS_AS(load_phold_config("/no/such/file"), ConfigError);
}
