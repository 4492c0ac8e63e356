#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>

#include "timewarp/fault.hpp"
#include "timewarp/virtual_time.hpp"

namespace timewarp {

// (sender LP, per-LP send sequence number). Rollback re-execution re-issues
// the same sequence numbers, so a message and its later re-send are the same
// id on purpose; an anti-message carries the id of the send it cancels.
struct MessageId {
    LpId src_lp = 0;
    std::uint64_t seq = 0;

    friend auto operator<=>(const MessageId&, const MessageId&) = default;
};

struct MessageIdHash {
    std::size_t operator()(const MessageId& id) const noexcept {
        std::uint64_t h = (std::uint64_t{id.src_lp} << 40) ^ id.seq;
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        return static_cast<std::size_t>(h);
    }
};

enum class MsgKind : std::uint8_t { Event, AntiEvent };

// Small fixed payload keeps messages trivially copyable; the models here
// need a tag byte and a couple of parameters at most.
struct Payload {
    std::array<std::uint8_t, 15> bytes{};
    std::uint8_t len = 0;

    static Payload of_byte(std::uint8_t b) {
        Payload p;
        p.bytes[0] = b;
        p.len = 1;
        return p;
    }
    friend bool operator==(const Payload& a, const Payload& b) {
        return a.len == b.len && std::memcmp(a.bytes.data(), b.bytes.data(), a.len) == 0;
    }
};

struct Message {
    MessageId id;
    LpId src = 0;
    LpId dst = 0;
    VirtualTime send_time = 0;
    VirtualTime recv_time = 0;
    MsgKind kind = MsgKind::Event;
    Payload payload;
};

// Total order on events: receive time, then destination, then id. Gives every
// queue and the sequential oracle the same deterministic execution order.
inline std::strong_ordering event_cmp(const Message& a, const Message& b) {
    if (a.recv_time < b.recv_time) return std::strong_ordering::less;
    if (a.recv_time > b.recv_time) return std::strong_ordering::greater;
    if (auto c = a.dst <=> b.dst; c != 0) return c;
    return a.id <=> b.id;
}

struct EventOrderLess {
    bool operator()(const Message& a, const Message& b) const {
        return event_cmp(a, b) == std::strong_ordering::less;
    }
};

inline Message make_antimessage(const Message& m) {
    require(m.kind == MsgKind::Event, "make_antimessage: argument is already an anti-message");
    Message a = m;
    a.kind = MsgKind::AntiEvent;
    a.payload = Payload{};
    return a;
}

// An event/anti-event pair cancels iff the ids match and the kinds differ.
inline bool annihilates(const Message& a, const Message& b) {
    return a.id == b.id && a.kind != b.kind;
}

}  // namespace timewarp
