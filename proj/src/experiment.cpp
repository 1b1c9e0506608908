#include "lockstep/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lockstep {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config

std::vector<ConfigViolation> validate_config(const ExperimentConfig& cfg) {
    std::vector<ConfigViolation> out;
    auto hard = [&](const std::string& m) { out.push_back({true, m}); };
    auto soft = [&](const std::string& m) { out.push_back({false, m}); };

    if (cfg.n <= 0 || cfg.t <= 0) {
        hard("n and t must be positive");
        return out;
    }
    if (cfg.n % cfg.t != 0) hard("t does not divide n (n=" + std::to_string(cfg.n) +
                                 ", t=" + std::to_string(cfg.t) + ")");
    Rational c(cfg.t, cfg.n);
    long long ct2 = (long long)cfg.t * cfg.t;
    if (ct2 % cfg.n != 0 || ct2 / cfg.n < 1)
        hard("ct is not a positive integer (c*t = " + (c * Rational(cfg.t)).str() + ")");
    if (!(c < Rational(1, 3))) hard("c = " + c.str() + " is not < 1/3");
    if (cfg.R < 1) hard("R must be >= 1");
    if (cfg.t <= (long long)cfg.R * cfg.R)
        hard("t = " + std::to_string(cfg.t) + " is not > R^2 = " +
             std::to_string((long long)cfg.R * cfg.R));
    else if (cfg.eps) {
        Rational window = Rational(1, (long long)cfg.R * cfg.R) - Rational(1, cfg.t);
        if (!(Rational(0) < *cfg.eps && *cfg.eps < window))
            hard("eps = " + cfg.eps->str() + " outside (0, 1/R^2 - 1/t = " + window.str() + ")");
    }
    if (!protocol_known(cfg.protocol)) hard("unknown protocol: " + cfg.protocol);
    if (cfg.scheduler != "benign-fair" && cfg.scheduler != "adversary-lockstep")
        hard("unknown scheduler: " + cfg.scheduler);
    if (cfg.rounds_cap < 2) hard("rounds-cap must be >= 2");
    if (cfg.chain_rounds < 0 || (cfg.chain_rounds > 0 && cfg.chain_rounds > cfg.rounds_cap))
        hard("chain-rounds must be in [1, rounds-cap]");
    if (cfg.seeds < 1) hard("seeds must be >= 1");
    if (cfg.format != "json-lines" && cfg.format != "csv")
        hard("format must be json-lines or csv");
    if (cfg.post_escape != "confusion" && cfg.post_escape != "benign")
        hard("post-escape must be confusion or benign");

    // The tail-bound regime is soft: the attack runs regardless, only the
    // analytic bound stops applying.
    if (cfg.n % cfg.t == 0 && c < Rational(1, 3) && cfg.R >= 1) {
        Rational need = Rational(2) / c * Rational((long long)cfg.R * cfg.R);
        if (!(Rational(cfg.t) > need))
            soft("t = " + std::to_string(cfg.t) + " <= (2/c)R^2 = " + need.str() +
                 "; asymptotic tail bound not applicable at this scale");
    }
    return out;
}

void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "n")
            cfg.n = std::stoi(value);
        else if (key == "t")
            cfg.t = std::stoi(value);
        else if (key == "R")
            cfg.R = std::stoi(value);
        else if (key == "eps") {
            cfg.eps = Rational::parse(value);
            if (!cfg.eps) throw ConfigInvalid("bad value for eps: " + value);
        }
        else if (key == "protocol")
            cfg.protocol = value;
        else if (key == "scheduler")
            cfg.scheduler = value;
        else if (key == "rounds-cap")
            cfg.rounds_cap = std::stoi(value);
        else if (key == "chain-rounds")
            cfg.chain_rounds = std::stoi(value);
        else if (key == "seeds")
            cfg.seeds = std::stoll(value);
        else if (key == "seed-base")
            cfg.seed_base = std::stoull(value);
        else if (key == "out")
            cfg.out = value;
        else if (key == "format")
            cfg.format = value;
        else if (key == "post-escape")
            cfg.post_escape = value;
        else
            throw ConfigInvalid("unknown config key: " + key);
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigInvalid("bad value for " + key + ": " + value + " (" + e.what() + ")");
    }
}

ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto notspace = [](unsigned char ch) { return !std::isspace(ch); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid("config line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        value.erase(value.begin(), std::find_if(value.begin(), value.end(), notspace));
        apply_config_kv(cfg, key, value);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// record files

static std::string csv_escape_bitmap(const std::vector<std::string>& rows) {
    std::string out;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (i) out.push_back('|');
        out += rows[i];
    }
    return out;
}

std::string records_to_string(const std::vector<RunRecord>& records,
                              const std::string& format) {
    std::string out;
    if (format == "json-lines") {
        for (auto& r : records) {
            out += run_record_to_json(r);
            out.push_back('\n');
        }
        return out;
    }
    if (format != "csv") throw ConfigInvalid("format must be json-lines or csv");
    out = "seed,scheduler,rounds_used,decided,decide_rounds,in_class_through_round,"
          "per_round_group_success\n";
    for (auto& r : records) {
        std::string dec, rounds;
        for (size_t p = 1; p < r.decided.size(); ++p) {
            dec.push_back(r.decided[p] < 0 ? 'u' : (char)('0' + r.decided[p]));
            if (p > 1) rounds.push_back(';');
            rounds += std::to_string(r.decide_round[p]);
        }
        out += std::to_string(r.seed) + "," + r.scheduler + "," +
               std::to_string(r.rounds_used) + "," + dec + "," + rounds + "," +
               std::to_string(r.in_class_through_round) + "," +
               csv_escape_bitmap(r.per_round_group_success) + "\n";
    }
    return out;
}

static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<RunRecord> records_from_string(const std::string& text,
                                           const std::string& format) {
    std::vector<RunRecord> out;
    std::istringstream in(text);
    std::string line;
    if (format == "json-lines") {
        while (std::getline(in, line))
            if (!line.empty()) out.push_back(run_record_from_json(line));
        return out;
    }
    if (format != "csv") throw ConfigInvalid("format must be json-lines or csv");
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != 7) throw ConfigInvalid("bad csv record: " + line);
        RunRecord r;
        r.seed = std::stoull(f[0]);
        r.scheduler = f[1];
        r.rounds_used = std::stoi(f[2]);
        r.decided.assign(f[3].size() + 1, -1);
        r.all_decided = true;
        for (size_t p = 0; p < f[3].size(); ++p) {
            if (f[3][p] == 'u')
                r.all_decided = false;
            else
                r.decided[p + 1] = f[3][p] - '0';
        }
        r.decide_round.assign(1, 0);
        for (auto& x : split(f[4], ';')) r.decide_round.push_back(std::stoi(x));
        r.in_class_through_round = std::stoi(f[5]);
        if (!f[6].empty())
            for (auto& row : split(f[6], '|')) r.per_round_group_success.push_back(row);
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// statistics

std::map<std::pair<int, int>, double> fill_oracle(const GroupLayout& layout,
                                                  const ProtocolFunction& pf,
                                                  const LockstepClass& target) {
    ZFamily zf = derive_Z(target.z);
    std::map<std::pair<int, int>, double> out;
    int good = layout.t - layout.faulty_per_group;
    for (int r = 1; r <= target.E; ++r) {
        for (int g = 1; g <= layout.groups; ++g) {
            ChoiceDistribution d =
                r == 1 ? pf.init(target.inputs[g])
                       : pf.next_checked(r - 1,
                                         target.s_multiset(zf, r - 1, g, pf.max_round_only()));
            out[{r, g}] = fill_success_probability(d, target.counts[g][r], good);
        }
    }
    return out;
}

SummaryStats summarize(const std::vector<RunRecord>& records,
                       const std::map<std::pair<int, int>, double>* oracle) {
    SummaryStats s;
    s.runs = (long long)records.size();
    std::map<std::string, long long> count, undecided;
    for (auto& r : records) {
        s.rounds_hist[r.scheduler][r.rounds_used] += 1;
        count[r.scheduler] += 1;
        if (!r.all_decided) undecided[r.scheduler] += 1;
        s.mean_rounds[r.scheduler] += r.rounds_used;
        if (r.scheduler == "adversary-lockstep") {
            s.escape_hist[r.in_class_through_round] += 1;
            for (size_t i = 0; i < r.per_round_group_success.size(); ++i) {
                int round = (int)i + 1;
                if (r.in_class_through_round < round - 1) break;
                const std::string& bits = r.per_round_group_success[i];
                for (size_t g = 0; g < bits.size(); ++g) {
                    auto& st = s.fill_stats[{round, (int)g + 1}];
                    st.trials += 1;
                    st.successes += bits[g] == '1';
                }
            }
        }
    }
    for (auto& [sched, sum] : s.mean_rounds) sum /= (double)count[sched];
    for (auto& [sched, c] : count)
        s.undecided_fraction[sched] = (double)undecided[sched] / (double)c;
    if (oracle)
        for (auto& [key, st] : s.fill_stats) {
            auto it = oracle->find(key);
            if (it != oracle->end()) st.oracle = it->second;
        }
    return s;
}

std::string summary_to_json(const SummaryStats& s) {
    ordered_json j;
    j["runs"] = s.runs;
    for (auto& [sched, hist] : s.rounds_hist) {
        ordered_json h = ordered_json::object();
        for (auto& [rounds, c] : hist) h[std::to_string(rounds)] = c;
        j["rounds_hist"][sched] = h;
    }
    j["mean_rounds"] = s.mean_rounds;
    j["undecided_fraction"] = s.undecided_fraction;
    ordered_json esc = ordered_json::object();
    for (auto& [r, c] : s.escape_hist) esc[std::to_string(r)] = c;
    j["escape_hist"] = esc;
    ordered_json fills = ordered_json::array();
    for (auto& [key, st] : s.fill_stats) {
        if (st.trials == 0) continue;
        fills.push_back(ordered_json{{"round", key.first},
                                     {"group", key.second},
                                     {"successes", st.successes},
                                     {"trials", st.trials},
                                     {"oracle", st.oracle}});
    }
    j["fill_stats"] = fills;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// witness search

LockstepClass extend_class(const GroupLayout& layout, const ProtocolFunction& pf,
                           const LockstepClass& cls, int K, const Rational& eps) {
    if (K <= cls.E) return cls;
    ZSpec z = cls.z;
    z.E = K;
    z.excl.resize(K + 1, cls.z.excl[cls.E]);
    LockstepClass ext = derive_class(layout, pf, cls.inputs, z, eps);
    ext.index = cls.index;
    return ext;
}

WitnessSearch find_witness(const GroupLayout& layout, const ProtocolFunction& pf,
                           const Rational& eps, int K, int E, uint64_t class_budget) {
    WitnessSearch res;
    std::vector<int> horizons;
    if (E > 0)
        horizons.push_back(E);
    else
        for (int h = 4; h <= K; h *= 2) horizons.push_back(h);
    for (int h : horizons) {
        ChainGenerator gen(layout, pf, h, eps);
        uint64_t scanned = 0;
        while (gen.advance()) {
            if (++scanned > class_budget) {
                res.budget_exhausted = true;
                break;
            }
            bool undecided = false;
            for (int j = 1; j <= layout.groups && !undecided; ++j)
                undecided = gen.outcome(j).decision == Decision::Undecided;
            if (!undecided) continue;
            LockstepClass ext = extend_class(layout, pf, gen.materialize(), K, eps);
            auto outs = class_outcomes(layout, pf, ext);
            bool still = false;
            for (int j = 1; j <= layout.groups; ++j)
                still |= outs[j].decision == Decision::Undecided;
            if (still) {
                res.witness = std::move(ext);
                res.E = h;
                res.index = gen.index();
                res.scanned += scanned;
                return res;
            }
        }
        res.scanned += scanned;
    }
    return res;
}

// ---------------------------------------------------------------------------
// orchestration

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult result;
    for (auto& v : validate_config(cfg)) {
        if (v.hard) throw ConfigInvalid(v.message);
        result.warnings.push_back(v);
    }
    GroupLayout layout = GroupLayout::make(cfg.n, cfg.t);
    auto pf = make_protocol(cfg.protocol, cfg.n, cfg.t);
    Rational eps = cfg.effective_eps();
    int K = cfg.rounds_cap;

    std::map<std::pair<int, int>, double> oracle;
    if (cfg.scheduler == "adversary-lockstep") {
        result.witness = find_witness(layout, *pf, eps, K, cfg.chain_rounds);
        if (!result.witness.witness)
            throw PropertyViolation("witness", -1, 0, 0,
                                    "no class stays undecided at the horizon; the attack "
                                    "target does not exist at this scale");
        oracle = fill_oracle(layout, *pf, *result.witness.witness);
        PostEscape pe =
            cfg.post_escape == "benign" ? PostEscape::Benign : PostEscape::Confusion;
        for (long long s = 0; s < cfg.seeds; ++s)
            result.records.push_back(
                attack_run(*result.witness.witness, layout, *pf, cfg.seed_base + (uint64_t)s,
                           K, pe));
        for (long long s = 0; s < cfg.seeds; ++s)
            result.records.push_back(baseline_run(result.witness.witness->inputs, layout, *pf,
                                                  cfg.seed_base + (uint64_t)s, K));
    } else {
        // benign-only runs get mixed inputs: odd groups 1, even groups 0
        std::vector<int> inputs(layout.groups + 1, 0);
        for (int j = 1; j <= layout.groups; j += 2) inputs[j] = 1;
        for (long long s = 0; s < cfg.seeds; ++s)
            result.records.push_back(
                baseline_run(inputs, layout, *pf, cfg.seed_base + (uint64_t)s, K));
    }
    result.stats = summarize(result.records, oracle.empty() ? nullptr : &oracle);

    if (!cfg.out.empty()) {
        std::ofstream raw(cfg.out, std::ios::binary);
        if (!raw) throw ConfigInvalid("cannot write output file: " + cfg.out);
        raw << records_to_string(result.records, cfg.format);
        std::ofstream sum(cfg.out + ".summary.json", std::ios::binary);
        sum << summary_to_json(result.stats);
    }
    return result;
}

}  // namespace lockstep
