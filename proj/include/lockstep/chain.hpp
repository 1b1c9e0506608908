#pragma once

#include <functional>
#include <optional>

#include "lockstep/runtime.hpp"

namespace lockstep {

struct MalformedZ : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct HorizonTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ReplayMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PropertyViolation : std::runtime_error {
    PropertyViolation(std::string property, long long class_index, int i, int j,
                      const std::string& detail)
        : std::runtime_error("property " + property + " violated at class " +
                             std::to_string(class_index) + " (i=" + std::to_string(i) +
                             ", j=" + std::to_string(j) + "): " + detail),
          property(std::move(property)),
          class_index(class_index),
          i(i),
          j(j) {}
    std::string property;
    long long class_index;
    int i, j;
};

// Partition of [n] into n/t groups of t consecutive processors. The last ct
// members of each group are the faulty ones, so good processors come first in
// every canonical ordering. Layouts where ct is not a positive integer (or
// c >= 1/3) still support chain derivation, just not live attacks.
struct GroupLayout {
    int n = 0, t = 0, groups = 0;
    Rational c;
    int faulty_per_group = 0;   // ct, or 0 when not a positive integer
    bool attack_capable = false;

    static GroupLayout make(int n, int t);

    int group_of(ProcessorId p) const { return (int)((p - 1) / t) + 1; }
    int member_index(ProcessorId p) const { return (int)((p - 1) % t); }  // 0-based
    std::vector<ProcessorId> members(int j) const;
    std::vector<ProcessorId> faulty(int j) const;
    bool is_faulty(ProcessorId p) const {
        return member_index(p) >= t - faulty_per_group;
    }
};

// z_i^j stored as the index of the excluded group; rows 1..E, cols 1..groups.
struct ZSpec {
    int E = 0, groups = 0;
    std::vector<std::vector<int>> excl;  // [E+1][groups+1], row/col 0 unused

    static ZSpec canonical(int E, int groups);  // exclude the last group everywhere
    int at(int i, int j) const { return excl[i][j]; }
    int& at(int i, int j) { return excl[i][j]; }
};

// Excluded-group form of a raw complement set; throws MalformedZ if the set is
// not the complement of exactly one group.
int excluded_group(const GroupLayout& layout, const std::vector<ProcessorId>& z);

// Z_i^j represented by the largest round per group: (p, k) is in Z_i^j iff
// k <= maxr[i][j][group(p)] (group closure and round-downward closure are
// structural consequences of the recurrence).
struct ZFamily {
    int E = 0, groups = 0;
    std::vector<std::vector<std::vector<int>>> maxr;  // [E+1][groups+1][groups+1]

    bool contains(int i, int j, int g, int k) const {
        return k >= 1 && i >= 1 && maxr[i][j][g] >= k;
    }
    // Minimal i with (group g, round k) in Z_i^j; 0 if never.
    int min_round(int j, int g, int k) const;
};

ZFamily derive_Z(const ZSpec& z);

// pi_{p,i}: groups ordered by minimal chain round covering (p, i), ties by
// group index, members in processor-index order.
std::vector<ProcessorId> schedule_permutation(const ZFamily& zf, const GroupLayout& layout,
                                              ProcessorId p, int round);

// One E-round lockstep execution class. counts[j][k] is the payload multiset
// group j broadcasts in round k (the D-tilde counts); S_i^j is derived from it
// plus the Z family.
struct LockstepClass {
    long long index = 0;
    int E = 0;
    std::vector<int> inputs;  // [groups+1]
    ZSpec z;
    std::vector<std::vector<std::map<Payload, long long>>> counts;  // [groups+1][E+1]

    // Round-k payload counts of S_i^j.
    std::map<Payload, long long> s_round_part(const ZFamily& zf, int i, int j, int k) const;
    // S_i^j as a (round, payload) multiset; max_round_only keeps just round i.
    MessageMultiset s_multiset(const ZFamily& zf, int i, int j, bool max_round_only) const;
};

// Builds counts round by round: counts[j][k] = adjust(N(k-1, S_{k-1}^j), t).
// Round 1 adjusts N(0, b_j). eps is passed through to adjust().
LockstepClass derive_class(const GroupLayout& layout, const ProtocolFunction& pf,
                           const std::vector<int>& inputs, const ZSpec& z,
                           const Rational& eps);

// First decision of group j's good processors when the class is executed
// (Undecided + round 0 if none through round E).
struct GroupOutcome {
    Decision decision = Decision::Undecided;
    int round = 0;
};
std::vector<GroupOutcome> class_outcomes(const GroupLayout& layout, const ProtocolFunction& pf,
                                         const LockstepClass& cls);

// Chain record I/O: one JSON object per class, one per line. The record
// stores, per (i, j), the round-i payload counts of S_i^j; lower rounds are
// reconstructible from z and the preceding cells. Parsing rederives the class
// and cross-checks the stored cells (throws MalformedZ / ReplayMismatch).
std::string class_to_json(const LockstepClass& cls, const ZFamily& zf);
LockstepClass class_from_json(const std::string& line, const GroupLayout& layout,
                              const ProtocolFunction& pf, const Rational& eps);

// The chain recursion, run iteratively off an explicit worklist. Emits C_0
// first; each advance() mutates one group's column and reports the class.
class ChainGenerator {
public:
    ChainGenerator(const GroupLayout& layout, const ProtocolFunction& pf, int E,
                   const Rational& eps);

    // Advances to the next class in the chain; false once the chain ended.
    bool advance();
    // Group whose sets changed in the step that produced the current class
    // (0 for C_0).
    int changed_group() const { return changed_; }
    long long index() const { return emitted_ - 1; }
    bool done() const { return done_; }
    uint64_t steps() const { return steps_; }

    const std::vector<int>& bits() const { return bits_; }
    const ZSpec& z() const { return z_; }
    const std::vector<std::vector<std::map<Payload, long long>>>& counts() const {
        return counts_;
    }
    const ZFamily& zfamily() const { return zf_; }
    // Per-group fingerprint of (input bit, z column, Z sets, S sets); property
    // 2 says exactly one of these changes between adjacent classes.
    uint64_t group_signature(int j) const;
    GroupOutcome outcome(int j) const;

    LockstepClass materialize() const;

    // Convenience: materialized stream.
    std::optional<LockstepClass> next();

private:
    void recompute_cell(int j, int k);
    void recompute_group(int j, int from_round);
    void recompute_zfamily(int from_round);
    const std::map<Payload, long long>& adjusted_counts(const ChoiceDistribution& d);
    ChoiceDistribution dist_for(int j, int k) const;
    std::map<Payload, long long> round_input(int j, int k) const;  // round-k part of S_k^j

    GroupLayout layout_;
    const ProtocolFunction* pf_;
    int E_;
    Rational eps_;
    bool maxRoundOnly_;

    std::vector<int> bits_;
    ZSpec z_;
    ZFamily zf_;
    std::vector<std::vector<std::map<Payload, long long>>> counts_;  // [j][k]
    std::vector<std::map<Payload, long long>> totals_;               // [k], over groups
    std::vector<std::vector<uint64_t>> cellPrefix_;  // [j][k]: hash of counts_[j][1..k]
    std::vector<std::pair<int, int>> list_;          // (group, round)
    bool started_ = false, done_ = false;
    int changed_ = 0;
    long long emitted_ = 0;
    uint64_t steps_ = 0;
    std::map<std::string, std::map<Payload, long long>> adjustCache_;
};

struct ChainReport {
    bool ok = true;
    long long classes = 0;
    std::string violation;  // empty when ok
    std::optional<long long> witness_index;
    std::optional<LockstepClass> witness;
    bool c0_decides_one = false;  // property 3 violation flags
    bool cl_decides_zero = false;
    uint64_t steps = 0;
    bool budget_exhausted = false;
};

struct VerifyOptions {
    uint64_t class_budget = 0;  // 0 = unlimited
    bool find_witness = false;  // scan per-class outcomes for an undecided group
    bool replay_endpoints = true;
    long long full_recheck_stride = 100003;  // from-scratch rederivation cadence
    std::function<void(const LockstepClass&)> sink;  // optional per-class consumer
};

// Runs the generator, checking properties 1-4 as it goes. Throws
// PropertyViolation on a hard property failure; returns a report otherwise
// (budget exhaustion is reported, not thrown).
ChainReport verify_chain(const GroupLayout& layout, const ProtocolFunction& pf, int E,
                         const Rational& eps, const VerifyOptions& opts = {});

// Engine replay of a class: drives every processor through E rounds so that
// group j validates exactly Z_i^j by the end of phase i, with coins scripted
// from counts (payloads sorted canonically, assigned in member order).
struct ReplayResult {
    std::vector<Decision> decisions;  // [n+1]
    std::vector<int> decide_rounds;   // [n+1]
    uint64_t events = 0;
};
ReplayResult replay_class(const GroupLayout& layout, const ProtocolFunction& pf,
                          const LockstepClass& cls,
                          BroadcastKind kind = BroadcastKind::Trivial);

}  // namespace lockstep
