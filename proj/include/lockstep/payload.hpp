#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>

namespace lockstep {

// Payloads are opaque byte strings; the canonical total order is the
// lexicographic byte order, used for every deterministic tie-break.
using Payload = std::string;

// Implementation limit on payload size (the model places none).
inline constexpr size_t kMaxPayloadBytes = 4096;

using ProcessorId = int;  // 1-based

enum class Decision : int8_t { Zero = 0, One = 1, Undecided = 2 };

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::Zero: return "0";
        case Decision::One: return "1";
        default: return "undecided";
    }
}

struct RoundPayload {
    int round = 0;
    Payload payload;
    auto operator<=>(const RoundPayload&) const = default;
};

// Multiset of (round, payload) pairs, sender-free by construction.
using MessageMultiset = std::map<RoundPayload, int>;

inline void add_message(MessageMultiset& ms, int round, const Payload& p, int count = 1) {
    ms[{round, p}] += count;
}

inline int round_total(const MessageMultiset& ms, int round) {
    int total = 0;
    for (auto it = ms.lower_bound({round, Payload{}});
         it != ms.end() && it->first.round == round; ++it)
        total += it->second;
    return total;
}

inline std::map<Payload, int> round_counts(const MessageMultiset& ms, int round) {
    std::map<Payload, int> out;
    for (auto it = ms.lower_bound({round, Payload{}});
         it != ms.end() && it->first.round == round; ++it)
        out[it->first.payload] += it->second;
    return out;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

}  // namespace lockstep
