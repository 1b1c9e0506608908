// lockstep: asynchronous agreement simulator and adversary harness.
//
// Subcommands:
//   run     batched attack/baseline experiment, raw records + summary
//   chain   lockstep chain generation and verification
//   dist    distribution adjustment + tail comparison
//   verify  re-check emitted chain or record files
//
// Exit codes: 0 ok, 2 bad configuration, 3 property violation.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lockstep/experiment.hpp"

using namespace lockstep;
using ordered_json = nlohmann::ordered_json;

namespace {

Rational parse_rational_arg(const std::string& text, const std::string& flag) {
    auto r = Rational::parse(text);
    if (!r) throw ConfigInvalid("cannot parse " + flag + ": " + text);
    return *r;
}

// Flags override the config file, so every option is collected as a string
// and funneled through the same key=value setter the file parser uses.
struct RunArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_cfg_option(CLI::App* cmd, RunArgs& args, const std::string& flag,
                    const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); },
        help);
}

int cmd_run(const RunArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = config_from_file(args.config_path);
    for (auto& [key, value] : args.overrides) apply_config_kv(cfg, key, value);

    ExperimentResult res = run_experiment(cfg);
    for (auto& w : res.warnings) std::cerr << "warning: " << w.message << "\n";
    if (res.witness.witness)
        std::cerr << "witness: chain index " << res.witness.index << " at horizon E="
                  << res.witness.E << " (" << res.witness.scanned << " classes scanned)\n";
    std::cout << summary_to_json(res.stats);
    if (!cfg.out.empty())
        std::cerr << "wrote " << cfg.out << " and " << cfg.out << ".summary.json\n";
    return 0;
}

struct ChainArgs {
    int groups = 0, n = 0, t = 5, rounds = 4;
    std::string protocol = "benor-style";
    std::string eps;
    std::string out;
    bool verify = false;
    bool find_witness = false;
    uint64_t limit = 0;
};

GroupLayout layout_from(int n, int groups, int t) {
    if (n == 0 && groups == 0) throw ConfigInvalid("need --n or --groups");
    if (n == 0) n = groups * t;
    if (t <= 0 || n % t != 0) throw ConfigInvalid("t must divide n");
    return GroupLayout::make(n, t);
}

Rational eps_from(const std::string& text, const GroupLayout& layout,
                  const ProtocolFunction& pf) {
    if (!text.empty()) return parse_rational_arg(text, "--eps");
    return default_eps(layout.c, pf.choice_bound(), layout.t);
}

int cmd_chain(const ChainArgs& args) {
    GroupLayout layout = layout_from(args.n, args.groups, args.t);
    auto pf = make_protocol(args.protocol, layout.n, layout.t);
    if (!pf) throw ConfigInvalid("unknown protocol: " + args.protocol);
    Rational eps = eps_from(args.eps, layout, *pf);

    std::ofstream out;
    if (!args.out.empty()) {
        out.open(args.out, std::ios::binary);
        if (!out) throw ConfigInvalid("cannot write " + args.out);
    }

    ordered_json report;
    if (args.verify) {
        VerifyOptions opts;
        opts.class_budget = args.limit;
        opts.find_witness = args.find_witness;
        if (out.is_open())
            opts.sink = [&](const LockstepClass& cls) {
                out << class_to_json(cls, derive_Z(cls.z)) << "\n";
            };
        ChainReport rep = verify_chain(layout, *pf, args.rounds, eps, opts);
        report["ok"] = rep.ok;
        report["classes"] = rep.classes;
        report["steps"] = rep.steps;
        report["budget_exhausted"] = rep.budget_exhausted;
        if (rep.witness_index) report["witness_index"] = *rep.witness_index;
    } else {
        ChainGenerator gen(layout, *pf, args.rounds, eps);
        long long classes = 0;
        while (gen.advance()) {
            ++classes;
            if (out.is_open()) out << class_to_json(gen.materialize(), gen.zfamily()) << "\n";
            if (args.limit && (uint64_t)classes >= args.limit) break;
        }
        report["ok"] = true;
        report["classes"] = classes;
        report["steps"] = gen.steps();
        report["budget_exhausted"] = args.limit && !gen.done();
    }
    report["groups"] = layout.groups;
    report["rounds"] = args.rounds;
    report["eps"] = eps.str();
    std::cout << report.dump(2) << "\n";
    return 0;
}

struct DistArgs {
    std::string probs;
    long long t = 0;
    std::string eps;
    std::string c;
    long long trials = 0;
    uint64_t seed = 1;
    int R = 0;
};

ChoiceDistribution parse_probs(const std::string& csv, int r_bound) {
    std::vector<std::pair<Payload, Rational>> mass;
    std::stringstream in(csv);
    std::string item;
    int idx = 0;
    while (std::getline(in, item, ',')) {
        auto eq = item.find('=');
        Payload name = eq == std::string::npos ? "v" + std::to_string(idx)
                                               : item.substr(0, eq);
        std::string value = eq == std::string::npos ? item : item.substr(eq + 1);
        mass.emplace_back(name, parse_rational_arg(value, "--probs"));
        ++idx;
    }
    return ChoiceDistribution::from_rationals(std::move(mass), r_bound);
}

int cmd_dist(const DistArgs& args) {
    if (args.t <= 0) throw ConfigInvalid("--t is required and must be positive");
    ChoiceDistribution d = parse_probs(args.probs, args.R);
    Rational eps = args.eps.empty()
                       ? default_eps(args.c.empty() ? Rational(1, 5)
                                                    : parse_rational_arg(args.c, "--c"),
                                     d.R(), args.t)
                       : parse_rational_arg(args.eps, "--eps");

    AdjustedDistribution dt;
    try {
        dt = adjust(d, args.t, eps);
    } catch (const PreconditionViolated& e) {
        throw ConfigInvalid(e.what());
    }

    ordered_json out;
    out["t"] = args.t;
    out["eps"] = eps.str();
    out["star"] = dt.star;
    ordered_json masses = ordered_json::array();
    auto counts = dt.counts();
    for (auto& [s, m] : dt.mass)
        masses.push_back(ordered_json{{"payload", s},
                                      {"original", d.mass_of(s).str()},
                                      {"adjusted", m.str()},
                                      {"count", counts.at(s)}});
    out["mass"] = masses;

    if (args.trials > 0) {
        if (args.c.empty()) throw ConfigInvalid("tail comparison needs --c");
        Rational c = parse_rational_arg(args.c, "--c");
        auto emp = empirical_tail(d, dt, c, args.trials, args.seed);
        Rational goodR = (Rational(1) - c) * Rational(args.t);
        long long good = goodR.num / goodR.den;
        ordered_json tails = ordered_json::array();
        for (auto& [s, rho] : d.mass)
            tails.push_back(ordered_json{
                {"payload", s},
                {"empirical", emp.at(s)},
                {"exact", binomial_tail(good, rho.to_double(), counts.at(s))}});
        out["tail"] = tails;

        TailBoundParams params;
        params.c = c;
        params.t = args.t;
        params.R = d.R();
        params.eps = eps;
        Rational nR = Rational(args.t) / c;
        if (nR.den == 1) {
            params.n = nR.num;
            try {
                params.validate();
                out["analytic_bound"] = tail_bound(params);
            } catch (const PreconditionViolated& e) {
                out["analytic_bound"] = nullptr;
                out["analytic_bound_inapplicable"] = e.what();
            }
        }
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct VerifyArgs {
    std::string path;
    std::string kind = "chain";
    int groups = 0, n = 0, t = 5;
    std::string protocol = "benor-style";
    std::string eps;
    std::string format = "json-lines";
};

int cmd_verify(const VerifyArgs& args) {
    std::ifstream in(args.path, std::ios::binary);
    if (!in) throw ConfigInvalid("cannot open " + args.path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    ordered_json report;
    report["file"] = args.path;
    report["kind"] = args.kind;
    if (args.kind == "chain") {
        GroupLayout layout = layout_from(args.n, args.groups, args.t);
        auto pf = make_protocol(args.protocol, layout.n, layout.t);
        if (!pf) throw ConfigInvalid("unknown protocol: " + args.protocol);
        Rational eps = eps_from(args.eps, layout, *pf);
        long long classes = 0;
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            class_from_json(line, layout, *pf, eps);  // rederives and cross-checks
            ++classes;
        }
        report["classes"] = classes;
    } else if (args.kind == "records") {
        auto records = records_from_string(text, args.format);
        std::string again = records_to_string(records, args.format);
        if (again != text)
            throw PropertyViolation("round-trip", -1, 0, 0,
                                    "record file does not round-trip losslessly");
        report["records"] = (long long)records.size();
        std::ifstream sumIn(args.path + ".summary.json", std::ios::binary);
        if (sumIn) {
            std::stringstream sb;
            sb << sumIn.rdbuf();
            SummaryStats stats = summarize(records);
            // The emitted summary carries exact oracle columns the raw records
            // cannot reproduce, so compare everything except those.
            ordered_json want = ordered_json::parse(sb.str());
            ordered_json got = ordered_json::parse(summary_to_json(stats));
            for (auto* j : {&want, &got})
                if (j->contains("fill_stats"))
                    for (auto& f : (*j)["fill_stats"]) f.erase("oracle");
            if (want != got)
                throw PropertyViolation("summary", -1, 0, 0,
                                        "summary does not match the raw records");
            report["summary_checked"] = true;
        }
    } else {
        throw ConfigInvalid("--kind must be chain or records");
    }
    report["ok"] = true;
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asynchronous agreement simulator and adversary harness"};
    app.require_subcommand(1);

    RunArgs runArgs;
    auto* run = app.add_subcommand("run", "batched attack/baseline experiment");
    run->add_option("--config", runArgs.config_path, "key=value config file");
    add_cfg_option(run, runArgs, "--n", "n", "processor count");
    add_cfg_option(run, runArgs, "--t", "t", "faults tolerated (group size)");
    add_cfg_option(run, runArgs, "--R", "R", "protocol choice bound");
    add_cfg_option(run, runArgs, "--eps", "eps", "adjustment epsilon (rational)");
    add_cfg_option(run, runArgs, "--protocol", "protocol", "benor-style | point-mass");
    add_cfg_option(run, runArgs, "--scheduler", "scheduler",
                   "adversary-lockstep | benign-fair");
    add_cfg_option(run, runArgs, "--rounds-cap", "rounds-cap", "round cap K");
    add_cfg_option(run, runArgs, "--chain-rounds", "chain-rounds",
                   "witness horizon E (0 = double from 4)");
    add_cfg_option(run, runArgs, "--seeds", "seeds", "seed count");
    add_cfg_option(run, runArgs, "--seed-base", "seed-base", "first seed");
    add_cfg_option(run, runArgs, "--out", "out", "raw record output path");
    add_cfg_option(run, runArgs, "--format", "format", "json-lines | csv");
    add_cfg_option(run, runArgs, "--post-escape", "post-escape", "confusion | benign");

    ChainArgs chainArgs;
    auto* chain = app.add_subcommand("chain", "lockstep chain generation");
    chain->add_option("--groups", chainArgs.groups, "group count (n = groups*t)");
    chain->add_option("--n", chainArgs.n, "processor count (alternative to --groups)");
    chain->add_option("--t", chainArgs.t, "group size");
    chain->add_option("--rounds", chainArgs.rounds, "chain horizon E");
    chain->add_option("--protocol", chainArgs.protocol, "protocol name");
    chain->add_option("--eps", chainArgs.eps, "adjustment epsilon (rational)");
    chain->add_option("--out", chainArgs.out, "class record output path");
    chain->add_flag("--verify", chainArgs.verify, "check chain properties while generating");
    chain->add_flag("--find-witness", chainArgs.find_witness,
                    "report the first class with an undecided group");
    chain->add_option("--limit", chainArgs.limit, "class budget (0 = unlimited)");

    DistArgs distArgs;
    auto* dist = app.add_subcommand("dist", "distribution adjustment");
    dist->add_option("--probs", distArgs.probs,
                     "masses, e.g. 0.72,0.28 or m0=18/25,m1=7/25")
        ->required();
    dist->add_option("--t", distArgs.t, "group size")->required();
    dist->add_option("--eps", distArgs.eps, "adjustment epsilon (rational)");
    dist->add_option("--c", distArgs.c, "corruption fraction (for tails)");
    dist->add_option("--R", distArgs.R, "declared choice bound (default |support|)");
    dist->add_option("--trials", distArgs.trials, "Monte Carlo trials for the tail");
    dist->add_option("--seed", distArgs.seed, "Monte Carlo seed");

    VerifyArgs verifyArgs;
    auto* verify = app.add_subcommand("verify", "re-check an emitted file");
    verify->add_option("path", verifyArgs.path, "file to verify")->required();
    verify->add_option("--kind", verifyArgs.kind, "chain | records");
    verify->add_option("--groups", verifyArgs.groups, "group count");
    verify->add_option("--n", verifyArgs.n, "processor count");
    verify->add_option("--t", verifyArgs.t, "group size");
    verify->add_option("--protocol", verifyArgs.protocol, "protocol name");
    verify->add_option("--eps", verifyArgs.eps, "adjustment epsilon (rational)");
    verify->add_option("--format", verifyArgs.format, "record format");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(runArgs);
        if (chain->parsed()) return cmd_chain(chainArgs);
        if (dist->parsed()) return cmd_dist(distArgs);
        if (verify->parsed()) return cmd_verify(verifyArgs);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const PropertyViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ReplayMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const MalformedZ& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionViolated& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
