#pragma once

#include <functional>
#include <map>
#include <set>
#include <vector>

#include "lockstep/protocol.hpp"
#include "lockstep/sim.hpp"

namespace lockstep {

enum class BroadcastKind : int8_t { Trivial = 0, Bracha = 1 };
enum class ValidateKind : int8_t { PerRound = 0, Chained = 1 };

struct SearchBudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SenderMessage {
    ProcessorId sender = 0;
    int round = 0;
    Payload payload;
    auto operator<=>(const SenderMessage&) const = default;
};

// Subset-search budget per (sender, round) validation query.
inline constexpr long long kValidationBudget = 100000;

// Monotone marking of accepted messages, shared by the in-engine processor
// and the standalone validate_* entry points.
class ValidationState {
public:
    ValidationState() = default;
    ValidationState(const ProtocolFunction* pf, int n, int t, ValidateKind kind)
        : pf_(pf), n_(n), t_(t), kind_(kind) {}

    void accept(ProcessorId sender, int round, const Payload& payload);

    bool is_validated(ProcessorId sender, int round, const Payload& payload) const;
    // Distinct senders with a validated round-k message.
    int validated_sender_count(int round) const;
    // All validated messages as a sender-free multiset.
    const MessageMultiset& validated_multiset() const { return validated_; }
    // Payload counts of the first n-t validated round-k messages (the set S).
    std::map<Payload, int> quorum_counts(int round) const;
    std::vector<SenderMessage> marked() const;
    int chained_fallbacks() const { return chained_fallbacks_; }

    void append_state(std::string& out) const;

private:
    bool try_mark(size_t idx);
    bool per_round_ok(int round, const Payload& payload);
    bool chained_ok(ProcessorId sender, int round, const Payload& payload);
    bool composition_search(int round, const Payload& target,
                            const std::map<Payload, int>& avail, long long& budget);

    const ProtocolFunction* pf_ = nullptr;
    int n_ = 0, t_ = 0;
    ValidateKind kind_ = ValidateKind::PerRound;

    struct Item {
        ProcessorId sender;
        int round;
        Payload payload;
        bool valid = false;
    };
    std::vector<Item> items_;
    std::vector<size_t> pending_;
    MessageMultiset validated_;
    std::map<int, std::map<Payload, int>> counts_;            // validated per round
    std::map<int, std::set<ProcessorId>> senders_;            // validated senders per round
    std::map<int, std::vector<std::pair<Payload, int>>> quorum_;  // first n-t per round (payload,count)
    std::map<int, int> quorum_total_;
    std::map<std::pair<ProcessorId, int>, std::vector<Payload>> by_sender_;  // validated
    // per-round support memo: (round, payload, avail signature) -> markable
    std::map<std::tuple<int, Payload, std::string>, bool> memo_;
    int chained_fallbacks_ = 0;
};

struct RoundProcessConfig {
    int n = 0;
    int t = 0;
    BroadcastKind bcast = BroadcastKind::Trivial;
    ValidateKind val = ValidateKind::PerRound;
    int round_cap = 64;
    const ProtocolFunction* pf = nullptr;
};

// One processor of a fully symmetric round protocol.
class RoundProcess final : public Process {
public:
    RoundProcess(const RoundProcessConfig& cfg, ProcessorId self, int input_bit)
        : cfg_(cfg), self_(self), input_(input_bit),
          vs_(cfg.pf, cfg.n, cfg.t, cfg.val) {}

    void step(const std::optional<Message>& delivered, CoinSource& coins,
              std::vector<std::pair<ProcessorId, Message>>& sends) override;
    std::unique_ptr<Process> clone() const override {
        return std::make_unique<RoundProcess>(*this);
    }
    void append_state(std::string& out) const override;

    ProcessorId id() const { return self_; }
    int round() const { return round_; }
    Decision decision() const { return dec_; }
    int decide_round() const { return dec_round_; }
    bool reached_cap() const { return capped_; }
    bool has_accepted(ProcessorId origin, int round) const {
        return accepted_.count({origin, round}) > 0;
    }
    const ValidationState& validation() const { return vs_; }

private:
    void start(CoinSource& coins, std::vector<std::pair<ProcessorId, Message>>& sends);
    void on_message(const Message& m, std::vector<std::pair<ProcessorId, Message>>& sends);
    void on_accept(ProcessorId origin, int round, const Payload& payload);
    void maybe_advance(CoinSource& coins, std::vector<std::pair<ProcessorId, Message>>& sends);
    void broadcast(int round, const Payload& v,
                   std::vector<std::pair<ProcessorId, Message>>& sends);
    MessageMultiset protocol_input() const;

    RoundProcessConfig cfg_;
    ProcessorId self_ = 0;
    int input_ = 0;
    int round_ = 0;  // last round whose message was broadcast; 0 = not started
    Payload value_;
    Decision dec_ = Decision::Undecided;
    int dec_round_ = 0;
    bool capped_ = false;
    ValidationState vs_;
    std::set<std::pair<ProcessorId, int>> accepted_;  // broadcast instances accepted

    struct BrachaInstance {
        std::map<Payload, std::set<ProcessorId>> echoes, readies;
        bool sent_echo = false, sent_ready = false, accepted = false;
    };
    std::map<std::pair<ProcessorId, int>, BrachaInstance> bracha_;
};

// Applies to c a schedule under which processors accept (origin, round)'s
// broadcast exactly in order pi; returns the applied events. The broadcast
// must already be pending (origin has sent its round messages).
Schedule broadcast_schedule(Configuration& c, ProcessorId origin, int round,
                            BroadcastKind kind, const std::vector<ProcessorId>& pi,
                            CoinSource& coins);

// Standalone Validate entry points: feed an accepted set, return the marks.
std::vector<bool> validate_per_round(const std::vector<SenderMessage>& wplus,
                                     const ProtocolFunction& pf, int n, int t);
std::vector<bool> validate_chained(const std::vector<SenderMessage>& wplus,
                                   const ProtocolFunction& pf, int n, int t);

// Randomized property check: a policy must mark m_k whenever the honest
// history S+_k plus the sender's m_1..m_k is present. `mark` maps an accepted
// set to per-index marks.
bool good_message_completeness_check(
    const std::function<std::vector<bool>(const std::vector<SenderMessage>&)>& mark,
    const ProtocolFunction& pf, int n, int t, int trials, uint64_t seed);

}  // namespace lockstep
