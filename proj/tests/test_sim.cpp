#include "doctest.h"
#include "lockstep/runtime.hpp"

using namespace lockstep;

namespace {

// Broadcasts one round-1 message to everyone on its kick, lying about the
// transport sender; used to check the engine stamps it.
struct Liar final : Process {
    ProcessorId self = 0;
    int n = 0;
    bool sent = false;

    Liar(ProcessorId s, int n) : self(s), n(n) {}
    void step(const std::optional<Message>&, CoinSource&,
              std::vector<std::pair<ProcessorId, Message>>& sends) override {
        if (sent) return;
        sent = true;
        for (ProcessorId p = 1; p <= n; ++p) {
            Message m;
            m.sender = 999;  // forged; the engine must overwrite this
            m.origin = self;
            m.round = 1;
            m.payload = "x";
            sends.emplace_back(p, m);
        }
    }
    std::unique_ptr<Process> clone() const override { return std::make_unique<Liar>(*this); }
    void append_state(std::string& out) const override { out += sent ? "1" : "0"; }
};

struct Fixture {
    Configuration config;
    std::unique_ptr<ProtocolFunction> pf;
    int n = 4, t = 1;

    explicit Fixture(const std::vector<int>& inputs, int cap = 8) {
        pf = make_protocol("benor-style", n, t);
        RoundProcessConfig rc;
        rc.n = n;
        rc.t = t;
        rc.round_cap = cap;
        rc.pf = pf.get();
        for (int p = 1; p <= n; ++p)
            config.add_processor(std::make_unique<RoundProcess>(rc, p, inputs[p - 1]));
    }

    bool settled() const {
        for (int p = 1; p <= n; ++p) {
            auto& rp = dynamic_cast<const RoundProcess&>(config.process(p));
            if (rp.decision() == Decision::Undecided && !rp.reached_cap()) return false;
        }
        return true;
    }
};

RunResult benign_run(Fixture& f, uint64_t seed) {
    BenignFairScheduler sched(seed);
    SeededCoins coins(seed);
    return run_until(
        f.config, sched, coins,
        [&](const Configuration&) { return f.settled(); }, 1000000);
}

}  // namespace

TEST_CASE("fixed seed fixes the entire trace") {
    std::string first;
    for (int rep = 0; rep < 100; ++rep) {
        Fixture f({0, 1, 0, 1});
        RunResult r = benign_run(f, 7);
        std::string nd = trace_to_ndjson(r.trace);
        if (rep == 0) {
            first = nd;
            CHECK(!first.empty());
        } else {
            REQUIRE(nd == first);
        }
    }
}

TEST_CASE("different seeds give different traces") {
    Fixture a({0, 1, 0, 1}), b({0, 1, 0, 1});
    CHECK(trace_to_ndjson(benign_run(a, 7).trace) != trace_to_ndjson(benign_run(b, 8).trace));
}

TEST_CASE("engine stamps the transport sender") {
    Configuration c;
    for (int p = 1; p <= 3; ++p) c.add_processor(std::make_unique<Liar>(p, 3));
    SeededCoins coins(1);
    c.apply_event({2, std::nullopt, std::nullopt}, &coins);
    REQUIRE(c.messages_created() == 3);
    for (uint64_t id = 1; id <= 3; ++id) {
        CHECK(c.entry(id).msg.sender == 2);
        CHECK(c.entry(id).msg.origin == 2);
    }
}

TEST_CASE("double delivery and foreign delivery are not applicable") {
    Configuration c;
    for (int p = 1; p <= 3; ++p) c.add_processor(std::make_unique<Liar>(p, 3));
    SeededCoins coins(1);
    c.apply_event({1, std::nullopt, std::nullopt}, &coins);
    REQUIRE(c.pending_count() == 3);
    uint64_t id = c.oldest_pending(1)[0];
    ProcessorId to = c.entry(id).to;
    c.apply_event({to, id, std::nullopt}, &coins);
    CHECK_THROWS_AS(c.apply_event({to, id, std::nullopt}, &coins), NotApplicable);
    uint64_t other = c.oldest_pending(1)[0];
    ProcessorId wrong = c.entry(other).to % 3 + 1;
    CHECK_THROWS_AS(c.apply_event({wrong, other, std::nullopt}, &coins), NotApplicable);
}

TEST_CASE("copied configurations evolve independently") {
    Fixture f({0, 1, 0, 1});
    SeededCoins coins(3);
    f.config.apply_event({1, std::nullopt, std::nullopt}, &coins);
    Configuration snapshot = f.config;
    uint64_t before = snapshot.state_hash();
    f.config.apply_event({2, std::nullopt, std::nullopt}, &coins);
    CHECK(snapshot.state_hash() == before);
    CHECK(f.config.state_hash() != before);
}

TEST_CASE("scripted randomness replays to the same state") {
    Fixture live({1, 0, 1, 0});
    RunResult r = benign_run(live, 11);
    REQUIRE(r.reason == StopReason::ConditionMet);

    Schedule script;
    for (auto& e : r.trace)
        script.push_back({e.processor, e.message_id, e.randomness});
    Fixture replay({1, 0, 1, 0});
    RunResult r2 = run_schedule(replay.config, script, nullptr);
    CHECK(r2.events == r.events);
    CHECK(replay.config.state_hash() == live.config.state_hash());
}

TEST_CASE("trace export shape") {
    Fixture f({0, 1, 0, 1});
    RunResult r = benign_run(f, 5);
    std::string nd = trace_to_ndjson(r.trace);
    CHECK(nd.find("\"step_index\":0") != std::string::npos);
    CHECK(nd.find("\"processor\":") != std::string::npos);
    CHECK(nd.find("\"delivered_message_id\":null") != std::string::npos);
    CHECK(nd.find("\"randomness_outcome\":") != std::string::npos);
    size_t lines = (size_t)std::count(nd.begin(), nd.end(), '\n');
    CHECK(lines == r.trace.size());
}

TEST_CASE("event cap raises with the partial trace") {
    Fixture f({0, 1, 0, 1});
    BenignFairScheduler sched(9);
    SeededCoins coins(9);
    try {
        run_until(
            f.config, sched, coins, [](const Configuration&) { return false; }, 10);
        FAIL("expected CapExceeded");
    } catch (const CapExceeded& e) {
        CHECK(e.partial.size() == 10);
    }
}
