#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "lockstep/dist.hpp"
#include "lockstep/payload.hpp"

namespace lockstep {

enum class MsgKind : int8_t { Init = 0, Echo = 1, Ready = 2 };

struct Message {
    uint64_t id = 0;          // engine-assigned, unique per configuration
    ProcessorId sender = 0;   // transport sender (authentic, engine-stamped)
    ProcessorId origin = 0;   // broadcast-instance origin
    int round = 0;            // round stamped by the origin
    MsgKind kind = MsgKind::Init;
    Payload payload;
};

class CoinSource {
public:
    virtual ~CoinSource() = default;
    virtual Payload draw(ProcessorId p, int round, const ChoiceDistribution& d) = 0;
};

class Process {
public:
    virtual ~Process() = default;
    // delivered == nullopt is an empty step. Sends are (addressee, message);
    // the engine stamps sender and id.
    virtual void step(const std::optional<Message>& delivered, CoinSource& coins,
                      std::vector<std::pair<ProcessorId, Message>>& sends) = 0;
    virtual std::unique_ptr<Process> clone() const = 0;
    virtual void append_state(std::string& out) const = 0;
};

struct Event {
    ProcessorId processor = 0;
    std::optional<uint64_t> message_id;  // nullopt = NONE
    // When set, scripted randomness consumed by the step (replay); after
    // apply_event the completed event carries the outcomes actually used.
    std::optional<std::vector<Payload>> randomness;
};

struct TraceEntry {
    uint64_t step_index = 0;
    ProcessorId processor = 0;
    std::optional<uint64_t> message_id;
    std::vector<Payload> randomness;
};
using Trace = std::vector<TraceEntry>;
using Schedule = std::vector<Event>;

struct NotApplicable : std::runtime_error {
    explicit NotApplicable(const std::string& what, size_t index = 0)
        : std::runtime_error(what), index(index) {}
    size_t index;
};

struct CapExceeded : std::runtime_error {
    explicit CapExceeded(const std::string& what, Trace partial)
        : std::runtime_error(what), partial(std::move(partial)) {}
    Trace partial;
};

struct BufferedMessage {
    ProcessorId to = 0;
    Message msg;
    bool alive = false;
};

class Configuration {
public:
    Configuration() = default;
    Configuration(const Configuration& other) { *this = other; }
    Configuration& operator=(const Configuration& other);
    Configuration(Configuration&&) = default;
    Configuration& operator=(Configuration&&) = default;

    ProcessorId add_processor(std::unique_ptr<Process> p);
    int n() const { return (int)procs_.size(); }
    Process& process(ProcessorId p) { return *procs_.at(p - 1); }
    const Process& process(ProcessorId p) const { return *procs_.at(p - 1); }

    // Applies the event; returns it completed with the randomness used.
    // live_coins supplies outcomes when the event carries none.
    Event apply_event(const Event& e, CoinSource* live_coins);

    size_t pending_count() const { return alive_; }
    // Message ids of the up-to-k oldest undelivered messages.
    std::vector<uint64_t> oldest_pending(size_t k) const;
    std::optional<uint64_t> find_pending(ProcessorId to, ProcessorId sender,
                                         ProcessorId origin, int round, MsgKind kind) const;
    const BufferedMessage& entry(uint64_t id) const { return buffer_.at(id - 1); }
    uint64_t messages_created() const { return (uint64_t)buffer_.size(); }

    uint64_t state_hash() const;

private:
    std::vector<std::unique_ptr<Process>> procs_;
    std::vector<BufferedMessage> buffer_;  // append-only; id = index + 1
    size_t head_ = 0;                      // entries before head_ are delivered
    size_t alive_ = 0;
    // (to, sender, origin, round, kind) -> pending id
    std::map<std::tuple<ProcessorId, ProcessorId, ProcessorId, int, int>, uint64_t> index_;
};

class SchedulerPolicy {
public:
    virtual ~SchedulerPolicy() = default;
    // nullopt = nothing to do (quiescent)
    virtual std::optional<Event> next(const Configuration& c) = 0;
};

// Kicks every processor once with an empty step, then repeatedly delivers a
// seeded-uniform choice among the 8 oldest pending messages. The age window
// guarantees eventual delivery of everything while staying reproducible.
class BenignFairScheduler : public SchedulerPolicy {
public:
    explicit BenignFairScheduler(uint64_t seed) : rng_(splitmix64(seed)) {}
    std::optional<Event> next(const Configuration& c) override;

private:
    std::mt19937_64 rng_;
    int kicked_ = 0;
};

enum class StopReason { ConditionMet, Quiescent };

struct RunResult {
    StopReason reason = StopReason::Quiescent;
    Trace trace;
    uint64_t events = 0;
};

// Left-fold of apply_event over the schedule; throws NotApplicable with the
// offending index.
RunResult run_schedule(Configuration& c, const Schedule& schedule, CoinSource* live_coins);

// Applies scheduler events until stop(c) holds; throws CapExceeded (with the
// partial trace) past event_cap.
RunResult run_until(Configuration& c, SchedulerPolicy& scheduler, CoinSource& coins,
                    const std::function<bool(const Configuration&)>& stop,
                    uint64_t event_cap, bool keep_trace = true);

// Trace export: one record per line
// {"step_index":..,"processor":..,"delivered_message_id":..|null,"randomness_outcome":..|null}
std::string trace_to_ndjson(const Trace& trace);

// Per-processor seeded streams; outcomes are sampled by exact cumulative mass.
class SeededCoins : public CoinSource {
public:
    explicit SeededCoins(uint64_t seed) : seed_(seed) {}
    Payload draw(ProcessorId p, int round, const ChoiceDistribution& d) override;

private:
    uint64_t seed_;
    std::map<ProcessorId, std::mt19937_64> streams_;
};

// Uniform draw from d's mass using the given engine (shared helper).
Payload sample_distribution(const ChoiceDistribution& d, std::mt19937_64& rng);

}  // namespace lockstep
