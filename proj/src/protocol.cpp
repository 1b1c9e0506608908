#include "lockstep/protocol.hpp"

namespace lockstep {

ChoiceDistribution ProtocolFunction::next_checked(int k, const MessageMultiset& msgs) const {
    ChoiceDistribution d = next(k, msgs);
    if ((int)d.mass.size() > choice_bound())
        throw SupportTooLarge(name() + ".next returned support > R");
    d.r_bound = choice_bound();
    return d;
}

namespace {

constexpr const char* kZero = "0";
constexpr const char* kOne = "1";

// Highest round whose message count reaches quorum (a completed round).
int top_round(const MessageMultiset& msgs, int quorum) {
    int best = 0;
    int cur = -1, total = 0;
    for (auto& [rp, cnt] : msgs) {
        if (rp.round != cur) {
            if (cur > 0 && total >= quorum) best = cur;
            cur = rp.round;
            total = 0;
        }
        total += cnt;
    }
    if (cur > 0 && total >= quorum) best = cur;
    return best;
}

Decision unanimous_decide(const MessageMultiset& msgs, int n, int t) {
    int k = top_round(msgs, n - t);
    if (k < 2) return Decision::Undecided;
    auto counts = round_counts(msgs, k);
    if (counts.size() != 1) return Decision::Undecided;
    const Payload& p = counts.begin()->first;
    if (p == kZero) return Decision::Zero;
    if (p == kOne) return Decision::One;
    return Decision::Undecided;
}

// Ben-Or flavored member of the class: votes are bits; a bit held by more
// than half of all processors among the validated round-k set is adopted,
// otherwise a fair coin is tossed. Decide on a unanimous round (k >= 2).
class BenOrStyle final : public ProtocolFunction {
public:
    BenOrStyle(int n, int t) : n_(n), t_(t) {}
    std::string name() const override { return "benor-style"; }
    int choice_bound() const override { return 2; }
    bool max_round_only() const override { return true; }

    ChoiceDistribution init(int input_bit) const override {
        return ChoiceDistribution::point(input_bit ? kOne : kZero);
    }

    ChoiceDistribution next(int k, const MessageMultiset& msgs) const override {
        auto counts = round_counts(msgs, k);
        int c0 = 0, c1 = 0;
        if (auto it = counts.find(kZero); it != counts.end()) c0 = it->second;
        if (auto it = counts.find(kOne); it != counts.end()) c1 = it->second;
        if (2 * c1 > n_) return ChoiceDistribution::point(kOne);
        if (2 * c0 > n_) return ChoiceDistribution::point(kZero);
        return ChoiceDistribution::uniform({kZero, kOne});
    }

    Decision decide(const MessageMultiset& msgs) const override {
        return unanimous_decide(msgs, n_, t_);
    }

private:
    int n_, t_;
};

// Deterministic member: always the plurality payload of the round-k set
// (ties to the lex-smaller payload).
class PointMass final : public ProtocolFunction {
public:
    PointMass(int n, int t) : n_(n), t_(t) {}
    std::string name() const override { return "point-mass"; }
    int choice_bound() const override { return 1; }
    bool max_round_only() const override { return true; }

    ChoiceDistribution init(int input_bit) const override {
        return ChoiceDistribution::point(input_bit ? kOne : kZero);
    }

    ChoiceDistribution next(int k, const MessageMultiset& msgs) const override {
        auto counts = round_counts(msgs, k);
        Payload best;
        int bestCount = -1;
        for (auto& [p, c] : counts) {
            if (c > bestCount) {  // map order = canonical payload order
                best = p;
                bestCount = c;
            }
        }
        if (bestCount < 0) best = kZero;
        return ChoiceDistribution::point(best);
    }

    Decision decide(const MessageMultiset& msgs) const override {
        return unanimous_decide(msgs, n_, t_);
    }

private:
    int n_, t_;
};

}  // namespace

std::unique_ptr<ProtocolFunction> make_protocol(const std::string& name, int n, int t) {
    if (name == "benor-style") return std::make_unique<BenOrStyle>(n, t);
    if (name == "point-mass") return std::make_unique<PointMass>(n, t);
    throw PreconditionViolated("unknown protocol: " + name);
}

bool protocol_known(const std::string& name) {
    return name == "benor-style" || name == "point-mass";
}

}  // namespace lockstep
