#pragma once

#include "lockstep/chain.hpp"

namespace lockstep {

struct ConfigInvalid : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deficit fill: the multiset bringing every payload count to exactly
// rho~_s * t, or nullopt (FAIL) when some good count overshoots.
std::optional<std::map<Payload, long long>> fill_faulty_choices(
    const std::map<Payload, long long>& good_choices, const AdjustedDistribution& dTilde,
    int ct);

// Same, against precomputed target counts.
std::optional<std::map<Payload, long long>> fill_from_counts(
    const std::map<Payload, long long>& good_choices,
    const std::map<Payload, long long>& target, int ct);

// Exact probability that goodCount iid draws from d leave every deficit
// against dTilde's counts nonnegative (multinomial sum over outcome vectors).
double fill_success_probability(const ChoiceDistribution& d,
                                const AdjustedDistribution& dTilde, int goodCount);
double fill_success_probability(const ChoiceDistribution& d,
                                const std::map<Payload, long long>& targetCounts,
                                int goodCount);

// What the adversary does once the execution escapes the class: keep
// scheduling for maximal vote mixing, or hand over to the benign scheduler.
enum class PostEscape : int8_t { Confusion = 0, Benign = 1 };

struct RunRecord {
    uint64_t seed = 0;
    std::string scheduler;
    int rounds_used = 0;            // max good decide round; cap K if any undecided
    std::vector<int> decided;       // [n+1]; 0/1, -1 = undecided
    std::vector<int> decide_round;  // [n+1]; 0 = none
    int in_class_through_round = 0;
    std::vector<std::string> per_round_group_success;  // [round-1] = e.g. "11011"
    bool all_decided = false;

    bool operator==(const RunRecord&) const = default;
};

std::string run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const std::string& line);

// Live attack: good processors draw their own randomness; the adversary
// controls delivery order (lockstep per the target's Z sets while the class
// holds) and the faulty processors' choices (deficit fills; balance-the-
// minority within the support after escape). The target must span the round
// cap (target.E >= K).
RunRecord attack_run(const LockstepClass& target, const GroupLayout& layout,
                     const ProtocolFunction& pf, uint64_t seed, int K,
                     PostEscape post_escape = PostEscape::Confusion);

// Comparison runs: benign-fair scheduler, honestly random faulty processors.
RunRecord baseline_run(const std::vector<int>& group_inputs, const GroupLayout& layout,
                       const ProtocolFunction& pf, uint64_t seed, int K);

}  // namespace lockstep
