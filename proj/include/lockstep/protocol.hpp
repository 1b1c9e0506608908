#pragma once

#include <memory>
#include <string>

#include "lockstep/dist.hpp"
#include "lockstep/payload.hpp"

namespace lockstep {

struct SupportTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Randomized protocol function N. Inputs are sender-free multisets of
// (round, payload) pairs, so permutation invariance is structural.
class ProtocolFunction {
public:
    virtual ~ProtocolFunction() = default;
    virtual std::string name() const = 0;
    virtual int choice_bound() const = 0;  // R

    // N(0, b): distribution of the round-1 message.
    virtual ChoiceDistribution init(int input_bit) const = 0;
    // N(k, S u S'): distribution of the round-(k+1) message. The round-k part
    // of msgs is the validated n-t set; earlier rounds carry everything
    // validated so far.
    virtual ChoiceDistribution next(int k, const MessageMultiset& msgs) const = 0;
    // Deterministic; applied at each round exit (round >= 2).
    virtual Decision decide(const MessageMultiset& msgs) const = 0;

    // True when next/decide consult only the highest fully-represented round;
    // enables a cheaper input construction in bulk class derivation.
    virtual bool max_round_only() const { return false; }

    // next() with the support-size guard (throws SupportTooLarge).
    ChoiceDistribution next_checked(int k, const MessageMultiset& msgs) const;
};

// Registry: "benor-style", "point-mass".
std::unique_ptr<ProtocolFunction> make_protocol(const std::string& name, int n, int t);
bool protocol_known(const std::string& name);

}  // namespace lockstep
