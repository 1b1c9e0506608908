#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lockstep/experiment.hpp"

using namespace lockstep;

namespace {

ExperimentConfig base_config() {
    ExperimentConfig cfg;
    cfg.n = 25;
    cfg.t = 5;
    cfg.R = 2;
    return cfg;
}

bool has_hard(const std::vector<ConfigViolation>& vs) {
    for (auto& v : vs)
        if (v.hard) return true;
    return false;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("config validation: hard and soft violations") {
    ExperimentConfig cfg = base_config();
    cfg.eps = Rational(1, 80);  // 0.0125
    auto vs = validate_config(cfg);
    REQUIRE(vs.size() == 1);
    CHECK(!vs[0].hard);  // t=5 <= (2/c)R^2 = 40: bound inapplicable, attack fine

    cfg = base_config();
    cfg.n = 4;
    cfg.t = 1;
    vs = validate_config(cfg);
    REQUIRE(has_hard(vs));
    bool namesCt = false;
    for (auto& v : vs) namesCt |= v.hard && v.message.find("ct") != std::string::npos;
    CHECK(namesCt);

    cfg = base_config();
    cfg.n = 24;
    CHECK(has_hard(validate_config(cfg)));  // t does not divide n

    cfg = base_config();
    cfg.n = 300;
    cfg.t = 100;
    CHECK(has_hard(validate_config(cfg)));  // c = 1/3 boundary

    cfg = base_config();
    cfg.t = 5;
    cfg.R = 3;  // t <= R^2
    CHECK(has_hard(validate_config(cfg)));

    cfg = base_config();
    cfg.eps = Rational(1, 4);  // outside (0, 1/R^2 - 1/t)
    CHECK(has_hard(validate_config(cfg)));

    cfg = base_config();
    cfg.protocol = "nope";
    CHECK(has_hard(validate_config(cfg)));
}

TEST_CASE("config files and flag overrides") {
    std::string path = "test_experiment_cfg.tmp";
    {
        std::ofstream out(path);
        out << "# comment\n"
            << "n = 25\n"
            << "t = 5\n"
            << "seeds = 4   # trailing comment\n"
            << "eps = 0.0125\n";
    }
    ExperimentConfig cfg = config_from_file(path);
    CHECK(cfg.n == 25);
    CHECK(cfg.seeds == 4);
    CHECK(*cfg.eps == Rational(1, 80));
    apply_config_kv(cfg, "seeds", "9");  // flags override the file
    CHECK(cfg.seeds == 9);
    CHECK_THROWS_AS(apply_config_kv(cfg, "bogus", "1"), ConfigInvalid);
    CHECK_THROWS_AS(apply_config_kv(cfg, "n", "abc"), ConfigInvalid);
    std::remove(path.c_str());
}

TEST_CASE("record files round-trip losslessly in both formats") {
    std::vector<RunRecord> records(2);
    records[0].seed = 1;
    records[0].scheduler = "adversary-lockstep";
    records[0].rounds_used = 12;
    records[0].decided = {-1, 1, 1, -1};
    records[0].decide_round = {0, 4, 6, 0};
    records[0].in_class_through_round = 3;
    records[0].per_round_group_success = {"111", "110", "011"};
    records[1].seed = 2;
    records[1].scheduler = "benign-fair";
    records[1].rounds_used = 5;
    records[1].decided = {-1, 0, 0, 0};
    records[1].decide_round = {0, 3, 3, 5};
    records[1].all_decided = true;

    for (std::string format : {"json-lines", "csv"}) {
        std::string text = records_to_string(records, format);
        auto back = records_from_string(text, format);
        REQUIRE(back.size() == records.size());
        CHECK(back[0] == records[0]);
        CHECK(back[1] == records[1]);
        CHECK(records_to_string(back, format) == text);
    }
}

TEST_CASE("summaries recompute from raw records") {
    std::vector<RunRecord> records(3);
    for (int i = 0; i < 3; ++i) {
        records[i].seed = i;
        records[i].scheduler = i < 2 ? "adversary-lockstep" : "benign-fair";
        records[i].rounds_used = 4 + i;
        records[i].decided = {-1, 1};
        records[i].decide_round = {0, 4 + i};
        records[i].all_decided = i != 1;
    }
    records[0].in_class_through_round = 2;
    records[0].per_round_group_success = {"11", "11", "01"};
    records[1].in_class_through_round = 0;
    records[1].per_round_group_success = {"10"};

    SummaryStats s = summarize(records);
    CHECK(s.runs == 3);
    long long total = 0;
    for (auto& [sched, hist] : s.rounds_hist)
        for (auto& [rounds, c] : hist) total += c;
    CHECK(total == s.runs);
    CHECK(s.mean_rounds["adversary-lockstep"] == doctest::Approx(4.5));
    CHECK(s.mean_rounds["benign-fair"] == doctest::Approx(6.0));
    CHECK(s.undecided_fraction["adversary-lockstep"] == doctest::Approx(0.5));
    // fill trials are conditional on still being in class entering the round
    CHECK(s.fill_stats.at({1, 1}).trials == 2);
    CHECK(s.fill_stats.at({1, 1}).successes == 2);
    CHECK(s.fill_stats.at({1, 2}).successes == 1);
    CHECK(s.fill_stats.at({3, 2}).trials == 1);
    CHECK(s.escape_hist.at(2) == 1);
    CHECK(s.escape_hist.at(0) == 1);
}

TEST_CASE("extend_class repeats the last exclusion row") {
    GroupLayout lay = GroupLayout::make(15, 5);
    auto pf = make_protocol("benor-style", 15, 5);
    Rational eps = default_eps(lay.c, 2, 5);
    ChainGenerator gen(lay, *pf, 4, eps);
    REQUIRE(gen.advance());
    LockstepClass c0 = gen.materialize();
    LockstepClass ext = extend_class(lay, *pf, c0, 8, eps);
    CHECK(ext.E == 8);
    CHECK(ext.z.excl[8] == c0.z.excl[4]);
    for (int k = 1; k <= 4; ++k)
        for (int j = 1; j <= lay.groups; ++j) CHECK(ext.counts[j][k] == c0.counts[j][k]);
    // all-zero inputs still decide zero after extension
    auto outs = class_outcomes(lay, *pf, ext);
    for (int j = 1; j <= lay.groups; ++j) CHECK(outs[j].decision == Decision::Zero);
}

TEST_CASE("run_experiment end to end is deterministic") {
    ExperimentConfig cfg = base_config();
    cfg.seeds = 3;
    cfg.rounds_cap = 16;
    cfg.out = "test_experiment_records.tmp";

    ExperimentResult res = run_experiment(cfg);
    CHECK(res.witness.witness);
    CHECK(res.records.size() == 6);  // attack + baseline per seed
    std::string raw1 = slurp(cfg.out);
    std::string sum1 = slurp(cfg.out + ".summary.json");
    CHECK(!raw1.empty());
    CHECK(!sum1.empty());

    // raw file round-trips and the summary matches a recompute
    auto back = records_from_string(raw1, cfg.format);
    CHECK(back.size() == res.records.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == res.records[i]);

    run_experiment(cfg);
    CHECK(slurp(cfg.out) == raw1);
    CHECK(slurp(cfg.out + ".summary.json") == sum1);

    // oracle columns are attached for every in-class (round, group) cell
    for (auto& [key, st] : res.stats.fill_stats)
        if (st.trials > 0) CHECK(st.oracle > 0.0);

    std::remove(cfg.out.c_str());
    std::remove((cfg.out + ".summary.json").c_str());
}

TEST_CASE("benign-only experiments skip the witness search") {
    ExperimentConfig cfg = base_config();
    cfg.scheduler = "benign-fair";
    cfg.seeds = 2;
    cfg.rounds_cap = 16;
    ExperimentResult res = run_experiment(cfg);
    CHECK(!res.witness.witness);
    CHECK(res.records.size() == 2);
    for (auto& r : res.records) CHECK(r.scheduler == "benign-fair");
}

TEST_CASE("hard config violations throw ConfigInvalid") {
    ExperimentConfig cfg = base_config();
    cfg.n = 24;
    CHECK_THROWS_AS(run_experiment(cfg), ConfigInvalid);
}
