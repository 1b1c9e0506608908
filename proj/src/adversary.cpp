#include "lockstep/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace lockstep {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// fills and the exact oracle

std::optional<std::map<Payload, long long>> fill_from_counts(
    const std::map<Payload, long long>& good_choices,
    const std::map<Payload, long long>& target, int ct) {
    std::map<Payload, long long> fill;
    long long total = 0;
    for (auto& [p, want] : target) {
        auto it = good_choices.find(p);
        long long have = it == good_choices.end() ? 0 : it->second;
        if (have > want) return std::nullopt;
        if (want > have) {
            fill[p] = want - have;
            total += want - have;
        }
    }
    for (auto& [p, have] : good_choices)
        if (!target.count(p) && have > 0) return std::nullopt;
    if (total != ct) return std::nullopt;  // good set size off; callers pass (1-c)t draws
    return fill;
}

std::optional<std::map<Payload, long long>> fill_faulty_choices(
    const std::map<Payload, long long>& good_choices, const AdjustedDistribution& dTilde,
    int ct) {
    return fill_from_counts(good_choices, dTilde.counts(), ct);
}

double fill_success_probability(const ChoiceDistribution& d,
                                const std::map<Payload, long long>& targetCounts,
                                int goodCount) {
    std::vector<std::pair<double, long long>> slots;  // (p_s, cap)
    for (auto& [s, m] : d.mass) {
        auto it = targetCounts.find(s);
        slots.emplace_back(m.to_double(), it == targetCounts.end() ? 0 : it->second);
    }
    // sum of multinomial masses over draw vectors within the caps
    std::vector<long double> logfact(goodCount + 1, 0.0L);
    for (int i = 2; i <= goodCount; ++i) logfact[i] = logfact[i - 1] + std::log((long double)i);
    long double total = 0.0L;
    std::vector<int> cnt(slots.size(), 0);
    std::function<void(size_t, int)> rec = [&](size_t idx, int left) {
        if (idx + 1 == slots.size()) {
            if (left > slots[idx].second) return;
            cnt[idx] = left;
            long double lp = logfact[goodCount];
            for (size_t i = 0; i < slots.size(); ++i) {
                lp -= logfact[cnt[i]];
                if (cnt[i]) lp += cnt[i] * std::log((long double)slots[i].first);
            }
            total += std::exp(lp);
            return;
        }
        int hi = (int)std::min<long long>(left, slots[idx].second);
        for (int c = 0; c <= hi; ++c) {
            cnt[idx] = c;
            rec(idx + 1, left - c);
        }
    };
    if (slots.empty()) return goodCount == 0 ? 1.0 : 0.0;
    rec(0, goodCount);
    return (double)total;
}

double fill_success_probability(const ChoiceDistribution& d,
                                const AdjustedDistribution& dTilde, int goodCount) {
    return fill_success_probability(d, dTilde.counts(), goodCount);
}

// ---------------------------------------------------------------------------
// RunRecord I/O

std::string run_record_to_json(const RunRecord& r) {
    ordered_json rec;
    rec["seed"] = r.seed;
    rec["scheduler"] = r.scheduler;
    rec["rounds_used"] = r.rounds_used;
    ordered_json dec = ordered_json::object();
    for (size_t p = 1; p < r.decided.size(); ++p) {
        if (r.decided[p] < 0)
            dec[std::to_string(p)] = nullptr;
        else
            dec[std::to_string(p)] = r.decided[p];
    }
    rec["decided"] = dec;
    rec["decide_round"] = std::vector<int>(r.decide_round.begin() + 1, r.decide_round.end());
    rec["in_class_through_round"] = r.in_class_through_round;
    rec["per_round_group_success"] = r.per_round_group_success;
    return rec.dump();
}

RunRecord run_record_from_json(const std::string& line) {
    ordered_json rec = ordered_json::parse(line);
    RunRecord r;
    r.seed = rec.at("seed").get<uint64_t>();
    r.scheduler = rec.at("scheduler").get<std::string>();
    r.rounds_used = rec.at("rounds_used").get<int>();
    auto& dec = rec.at("decided");
    r.decided.assign(dec.size() + 1, -1);
    r.all_decided = true;
    for (auto& [k, v] : dec.items()) {
        int p = std::stoi(k);
        if (v.is_null())
            r.all_decided = false;
        else
            r.decided[p] = v.get<int>();
    }
    auto dr = rec.at("decide_round").get<std::vector<int>>();
    r.decide_round.assign(dr.size() + 1, 0);
    std::copy(dr.begin(), dr.end(), r.decide_round.begin() + 1);
    r.in_class_through_round = rec.at("in_class_through_round").get<int>();
    r.per_round_group_success =
        rec.at("per_round_group_success").get<std::vector<std::string>>();
    return r;
}

// ---------------------------------------------------------------------------
// the live adversary

namespace {

constexpr int kNeverEscaped = std::numeric_limits<int>::max();

// Coin source under attack: good processors get honest seeded draws, faulty
// ones the adversary's choice (deficit fill while the class holds, then the
// currently rarest payload in the support).
class AttackCoins : public CoinSource {
public:
    AttackCoins(const GroupLayout& layout, const LockstepClass& target, uint64_t seed,
                const Configuration* config = nullptr)
        : layout_(&layout), target_(&target), seed_(seed), config_(config) {}

    Payload draw(ProcessorId p, int round, const ChoiceDistribution& d) override {
        int g = layout_->group_of(p);
        if (!layout_->is_faulty(p)) {
            auto it = streams_.find(p);
            if (it == streams_.end())
                it = streams_.emplace(p, std::mt19937_64(mix_seed(seed_, (uint64_t)p))).first;
            Payload v = sample_distribution(d, it->second);
            goodCounts_[{g, round}][v] += 1;
            tally_[round][v] += 1;
            return v;
        }
        if (round <= escapeRound_ && round <= target_->E) {
            auto key = std::make_pair(g, round);
            auto fit = fills_.find(key);
            if (fit == fills_.end()) {
                auto fill = fill_from_counts(goodCounts_[key], target_->counts[g][round],
                                             layout_->faulty_per_group);
                Pending pend;
                if (fill) {
                    success_[key] = true;
                    for (auto& [payload, c] : *fill)
                        for (long long i = 0; i < c; ++i) pend.values.push_back(payload);
                } else {
                    success_[key] = false;
                    if (round < escapeRound_) escapeRound_ = round;
                }
                fit = fills_.emplace(key, std::move(pend)).first;
            }
            Pending& pend = fit->second;
            if (pend.next < pend.values.size()) {
                const Payload& v = pend.values[pend.next];
                if (d.contains(v)) {
                    ++pend.next;
                    tally_[round][v] += 1;
                    return v;
                }
                // the class assignment stopped matching the live execution
                if (round < escapeRound_) escapeRound_ = round;
            }
        }
        return balance(round, d);
    }

    int escape_round() const { return escapeRound_; }
    // Success of (round, group): explicit flag when a fill ran; otherwise the
    // group was deterministic (or drew nothing) and conformed iff still in
    // class.
    bool group_success(int round, int g) const {
        auto it = success_.find({g, round});
        if (it != success_.end()) return it->second;
        return round <= escapeRound_;
    }

private:
    Payload balance(int round, const ChoiceDistribution& d) {
        // full information: count the round's votes already broadcast (the
        // copies addressed to processor 1 are still pending mid-phase)
        std::map<Payload, long long> seen = tally_[round];
        if (config_) {
            seen.clear();
            for (ProcessorId p = 1; p <= config_->n(); ++p)
                if (auto id = config_->find_pending(1, p, p, round, MsgKind::Init))
                    seen[config_->entry(*id).msg.payload] += 1;
        }
        const Payload* best = nullptr;
        long long bestCount = 0;
        for (auto& [s, m] : d.mass) {
            auto it = seen.find(s);
            long long c = it == seen.end() ? 0 : it->second;
            if (!best || c < bestCount) {
                best = &s;
                bestCount = c;
            }
        }
        Payload v = *best;
        tally_[round][v] += 1;
        return v;
    }

    struct Pending {
        std::vector<Payload> values;
        size_t next = 0;
    };

    const GroupLayout* layout_;
    const LockstepClass* target_;
    uint64_t seed_;
    std::map<ProcessorId, std::mt19937_64> streams_;
    std::map<std::pair<int, int>, std::map<Payload, long long>> goodCounts_;  // (g, round)
    std::map<std::pair<int, int>, Pending> fills_;
    std::map<std::pair<int, int>, bool> success_;
    std::map<int, std::map<Payload, long long>> tally_;  // round -> payload draws
    int escapeRound_ = kNeverEscaped;
    const Configuration* config_;
};

const RoundProcess& proc(const Configuration& c, ProcessorId p) {
    return dynamic_cast<const RoundProcess&>(c.process(p));
}

bool settled(const Configuration& c) {
    for (ProcessorId p = 1; p <= c.n(); ++p) {
        auto& rp = proc(c, p);
        if (rp.decision() == Decision::Undecided && !rp.reached_cap()) return false;
    }
    return true;
}

void finish_record(const Configuration& c, int K, RunRecord& rec) {
    int n = c.n();
    rec.decided.assign(n + 1, -1);
    rec.decide_round.assign(n + 1, 0);
    rec.all_decided = true;
    int maxRound = 0;
    for (ProcessorId p = 1; p <= n; ++p) {
        auto& rp = proc(c, p);
        if (rp.decision() == Decision::Undecided) {
            rec.all_decided = false;
        } else {
            rec.decided[p] = rp.decision() == Decision::One ? 1 : 0;
            rec.decide_round[p] = rp.decide_round();
            maxRound = std::max(maxRound, rp.decide_round());
        }
    }
    rec.rounds_used = rec.all_decided ? maxRound : K;
}

void benign_tail(Configuration& c, CoinSource& coins, uint64_t seed) {
    BenignFairScheduler sch(mix_seed(seed, 0x7a11));
    uint64_t cap = (uint64_t)c.n() * c.n() * 4096 + 1000000;
    run_until(c, sch, coins, settled, cap, /*keep_trace=*/false);
}

}  // namespace

RunRecord attack_run(const LockstepClass& target, const GroupLayout& layout,
                     const ProtocolFunction& pf, uint64_t seed, int K,
                     PostEscape post_escape) {
    if (!layout.attack_capable)
        throw ConfigInvalid("layout is chain-only (ct not a positive integer or c >= 1/3)");
    if ((int)target.inputs.size() != layout.groups + 1 || target.z.groups != layout.groups)
        throw ConfigInvalid("layout/target mismatch");
    if (target.E < K)
        throw ConfigInvalid("target horizon " + std::to_string(target.E) +
                            " is shorter than the round cap " + std::to_string(K));

    ZFamily zf = derive_Z(target.z);
    Configuration c;
    RoundProcessConfig rcfg;
    rcfg.n = layout.n;
    rcfg.t = layout.t;
    rcfg.bcast = BroadcastKind::Trivial;
    rcfg.val = ValidateKind::PerRound;
    rcfg.round_cap = K;
    rcfg.pf = &pf;
    for (ProcessorId p = 1; p <= layout.n; ++p)
        c.add_processor(
            std::make_unique<RoundProcess>(rcfg, p, target.inputs[layout.group_of(p)]));

    AttackCoins coins(layout, target, seed, &c);
    auto apply = [&](const Event& e) { c.apply_event(e, &coins); };
    for (ProcessorId p = 1; p <= layout.n; ++p) apply(Event{p, std::nullopt, std::nullopt});

    bool stalled = false;
    for (int i = 1; i <= K && !settled(c); ++i) {
        if (i < coins.escape_round()) {
            // lockstep delivery per the target's Z sets
            for (ProcessorId q = 1; q <= layout.n; ++q) {
                int j = layout.group_of(q);
                std::vector<std::pair<int, int>> cells;
                for (int g = 1; g <= layout.groups; ++g)
                    for (int k = zf.maxr[i - 1][j][g] + 1; k <= zf.maxr[i][j][g]; ++k)
                        cells.emplace_back(k, g);
                std::sort(cells.begin(), cells.end());
                for (auto& [k, g] : cells)
                    for (ProcessorId p : layout.members(g))
                        if (auto id = c.find_pending(q, p, p, k, MsgKind::Init))
                            apply(Event{q, *id, std::nullopt});
            }
            continue;
        }
        if (post_escape == PostEscape::Benign) break;
        // confusion phase: show each group the complement that mixes the
        // round-i votes the most
        std::vector<std::optional<Payload>> vote(layout.n + 1);
        for (ProcessorId p = 1; p <= layout.n; ++p)
            if (auto id = c.find_pending(1, p, p, i, MsgKind::Init))
                vote[p] = c.entry(*id).msg.payload;
        std::vector<std::map<Payload, int>> gtally(layout.groups + 1);
        for (ProcessorId p = 1; p <= layout.n; ++p)
            if (vote[p]) gtally[layout.group_of(p)][*vote[p]] += 1;
        std::vector<int> exclusion(layout.groups + 1, 0);
        for (int j = 1; j <= layout.groups; ++j) {
            int bestE = 1, bestMix = -1;
            for (int e = 1; e <= layout.groups; ++e) {
                std::map<Payload, int> seen;
                int tot = 0;
                for (int g = 1; g <= layout.groups; ++g) {
                    if (g == e) continue;
                    for (auto& [pl, cnt] : gtally[g]) {
                        seen[pl] += cnt;
                        tot += cnt;
                    }
                }
                int top = 0;
                for (auto& [pl, cnt] : seen) top = std::max(top, cnt);
                if (tot - top > bestMix) {
                    bestMix = tot - top;
                    bestE = e;
                }
            }
            exclusion[j] = bestE;
        }
        // good receivers advance (and draw) before any faulty one, so the
        // fills see every good vote of the next round
        std::vector<ProcessorId> order;
        for (ProcessorId q = 1; q <= layout.n; ++q)
            if (!layout.is_faulty(q)) order.push_back(q);
        for (ProcessorId q = 1; q <= layout.n; ++q)
            if (layout.is_faulty(q)) order.push_back(q);
        for (ProcessorId q : order) {
            int e = exclusion[layout.group_of(q)];
            for (int g = 1; g <= layout.groups; ++g) {
                if (g == e) continue;
                for (ProcessorId p : layout.members(g))
                    if (auto id = c.find_pending(q, p, p, i, MsgKind::Init))
                        apply(Event{q, *id, std::nullopt});
            }
            auto advanced = [&] {
                auto& rp = proc(c, q);
                return rp.round() > i || rp.reached_cap() ||
                       rp.decision() != Decision::Undecided;
            };
            if (!advanced()) {  // widen the view until validation goes through
                for (ProcessorId p = 1; p <= layout.n && !advanced(); ++p)
                    if (auto id = c.find_pending(q, p, p, i, MsgKind::Init))
                        apply(Event{q, *id, std::nullopt});
                for (int k = 1; k <= std::min(i + 1, K) && !advanced(); ++k)
                    for (ProcessorId p = 1; p <= layout.n; ++p)
                        if (auto id = c.find_pending(q, p, p, k, MsgKind::Init))
                            apply(Event{q, *id, std::nullopt});
            }
            if (!advanced()) stalled = true;
        }
        if (stalled) break;
    }
    if (stalled || (post_escape == PostEscape::Benign && !settled(c)))
        benign_tail(c, coins, seed);

    RunRecord rec;
    rec.seed = seed;
    rec.scheduler = "adversary-lockstep";
    finish_record(c, K, rec);
    rec.in_class_through_round =
        coins.escape_round() == kNeverEscaped ? K : coins.escape_round() - 1;
    for (int r = 1; r <= K; ++r) {
        std::string bits;
        for (int g = 1; g <= layout.groups; ++g)
            bits.push_back(coins.group_success(r, g) ? '1' : '0');
        rec.per_round_group_success.push_back(bits);
    }
    return rec;
}

RunRecord baseline_run(const std::vector<int>& group_inputs, const GroupLayout& layout,
                       const ProtocolFunction& pf, uint64_t seed, int K) {
    if ((int)group_inputs.size() != layout.groups + 1)
        throw ConfigInvalid("inputs must be 1-based per group");
    Configuration c;
    RoundProcessConfig rcfg;
    rcfg.n = layout.n;
    rcfg.t = layout.t;
    rcfg.bcast = BroadcastKind::Trivial;
    rcfg.val = ValidateKind::PerRound;
    rcfg.round_cap = K;
    rcfg.pf = &pf;
    for (ProcessorId p = 1; p <= layout.n; ++p)
        c.add_processor(
            std::make_unique<RoundProcess>(rcfg, p, group_inputs[layout.group_of(p)]));
    SeededCoins coins(seed);
    BenignFairScheduler sch(mix_seed(seed, 0xbe9f));
    uint64_t cap = (uint64_t)layout.n * layout.n * 4096 + 1000000;
    run_until(c, sch, coins, settled, cap, /*keep_trace=*/false);
    RunRecord rec;
    rec.seed = seed;
    rec.scheduler = "benign-fair";
    finish_record(c, K, rec);
    return rec;
}

}  // namespace lockstep
