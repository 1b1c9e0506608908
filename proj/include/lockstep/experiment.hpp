#pragma once

#include "lockstep/adversary.hpp"

namespace lockstep {

struct ExperimentConfig {
    int n = 25;
    int t = 5;
    int R = 2;
    std::optional<Rational> eps;  // default c/(4R^2), capped into the window
    std::string protocol = "benor-style";
    std::string scheduler = "adversary-lockstep";
    int rounds_cap = 64;   // K
    int chain_rounds = 0;  // E; 0 = double from 4 until a witness appears
    long long seeds = 100;
    uint64_t seed_base = 1;
    std::string out;  // empty = no files written
    std::string format = "json-lines";
    std::string post_escape = "confusion";

    Rational c() const { return Rational(t, n); }
    Rational effective_eps() const {
        return eps ? *eps : default_eps(Rational(t, n), R, t);
    }
};

struct ConfigViolation {
    bool hard = false;
    std::string message;
};

// All arithmetic constraints; hard ones make run_experiment throw
// ConfigInvalid, soft ones only flag the asymptotic bound as inapplicable.
std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg);

// Plain key=value lines, '#' comments; unknown keys throw ConfigInvalid.
void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig config_from_file(const std::string& path);

struct SummaryStats {
    std::map<std::string, std::map<int, long long>> rounds_hist;  // scheduler -> rounds -> n
    std::map<std::string, double> mean_rounds;
    std::map<std::string, double> undecided_fraction;
    std::map<int, long long> escape_hist;  // in_class_through_round -> count (attack runs)
    struct RoundGroupStat {
        long long successes = 0;
        long long trials = 0;  // attack runs still in class entering the round
        double oracle = 0.0;
    };
    std::map<std::pair<int, int>, RoundGroupStat> fill_stats;  // (round, group)
    long long runs = 0;
};

// Exact per-(round, group) fill success probabilities for a target class.
std::map<std::pair<int, int>, double> fill_oracle(const GroupLayout& layout,
                                                  const ProtocolFunction& pf,
                                                  const LockstepClass& target);

SummaryStats summarize(const std::vector<RunRecord>& records,
                       const std::map<std::pair<int, int>, double>* oracle = nullptr);
std::string summary_to_json(const SummaryStats& s);

// Raw record serialization, "json-lines" or "csv"; both round-trip losslessly.
std::string records_to_string(const std::vector<RunRecord>& records, const std::string& format);
std::vector<RunRecord> records_from_string(const std::string& text, const std::string& format);

// Extends a class to horizon K by repeating its last z row.
LockstepClass extend_class(const GroupLayout& layout, const ProtocolFunction& pf,
                           const LockstepClass& cls, int K, const Rational& eps);

// Scans the chain for the first class with a group still undecided at the
// horizon whose K-extension also stays undecided. E fixed, or doubling
// 4..16 when 0. class_budget caps the classes scanned per horizon.
struct WitnessSearch {
    std::optional<LockstepClass> witness;  // extended to horizon K
    int E = 0;                             // horizon the witness was found at
    long long index = -1;                  // chain index
    long long scanned = 0;
    bool budget_exhausted = false;
};
WitnessSearch find_witness(const GroupLayout& layout, const ProtocolFunction& pf,
                           const Rational& eps, int K, int E = 0,
                           uint64_t class_budget = 20000000);

struct ExperimentResult {
    SummaryStats stats;
    WitnessSearch witness;
    std::vector<RunRecord> records;
    std::vector<ConfigViolation> warnings;
};

// Orchestration: validation, witness search (attack scheduler only), seed
// batches, aggregation, and file emission (records at cfg.out, summary at
// cfg.out + ".summary.json"). Reruns with the same config are byte-identical.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace lockstep
