#include <random>

#include "doctest.h"
#include "lockstep/dist.hpp"

using namespace lockstep;

TEST_CASE("rational arithmetic and parsing") {
    CHECK(Rational(1, 2) + Rational(1, 3) == Rational(5, 6));
    CHECK(Rational(3, 6) == Rational(1, 2));
    CHECK(Rational(1, 4) - Rational(1, 5) == Rational(1, 20));
    CHECK(Rational(-2, -4) == Rational(1, 2));
    CHECK(Rational(2, -4) == Rational(-1, 2));
    CHECK(*Rational::parse("0.0125") == Rational(1, 80));
    CHECK(*Rational::parse("7/25") == Rational(7, 25));
    CHECK(*Rational::parse("3") == Rational(3));
    CHECK(!Rational::parse("1/0"));
    CHECK(!Rational::parse("abc"));
    CHECK(least_positive_multiple_count(Rational(7, 25), 10) == 3);  // 3/10 >= 0.28
    CHECK(least_positive_multiple_count(Rational(3, 10), 10) == 3);  // exact multiple
    CHECK(least_positive_multiple_count(Rational(0), 10) == 1);      // stays positive
}

TEST_CASE("distribution validity checks") {
    CHECK_THROWS_AS(ChoiceDistribution::from_rationals({{"a", Rational(1, 2)}}),
                    PreconditionViolated);
    CHECK_THROWS_AS(ChoiceDistribution::from_rationals(
                        {{"a", Rational(1, 2)}, {"a", Rational(1, 2)}}),
                    PreconditionViolated);
    CHECK_THROWS_AS(ChoiceDistribution::from_rationals(
                        {{"a", Rational(1)}, {"b", Rational(0)}}),
                    PreconditionViolated);
    auto d = ChoiceDistribution::uniform({"b", "a"});
    CHECK(d.mass[0].first == "a");  // canonical order
    CHECK(d.mass_of("b") == Rational(1, 2));
}

TEST_CASE("adjust: frozen two-payload example") {
    // rho = (0.72, 0.28), t = 10, eps = 1/100. The non-star payload rounds up
    // to 3/10 and the star absorbs the slack: counts (7, 3).
    auto d = ChoiceDistribution::from_rationals(
        {{"m0", Rational(18, 25)}, {"m1", Rational(7, 25)}});
    auto dt = adjust(d, 10, Rational(1, 100));
    CHECK(dt.star == "m0");
    CHECK(dt.mass_of("m0") == Rational(7, 10));
    CHECK(dt.mass_of("m1") == Rational(3, 10));
    auto counts = dt.counts();
    CHECK(counts.at("m0") == 7);
    CHECK(counts.at("m1") == 3);
}

TEST_CASE("adjust: small masses are pulled up to eps") {
    // rho = (0.98, 0.02), t = 20, eps = 1/10: target for m1 is eps, so 2/20.
    auto d = ChoiceDistribution::from_rationals(
        {{"m0", Rational(49, 50)}, {"m1", Rational(1, 50)}});
    auto dt = adjust(d, 20, Rational(1, 10));
    CHECK(dt.mass_of("m1") == Rational(1, 10));
    CHECK(dt.mass_of("m0") == Rational(9, 10));
}

TEST_CASE("adjust: precondition violations") {
    auto d = ChoiceDistribution::uniform({"0", "1"});
    CHECK_THROWS_AS(adjust(d, 4, Rational(1, 100)), PreconditionViolated);  // t <= R^2
    CHECK_THROWS_AS(adjust(d, 10, Rational(0)), PreconditionViolated);
    CHECK_THROWS_AS(adjust(d, 10, Rational(1, 4)), PreconditionViolated);  // eps >= window
}

TEST_CASE("adjust: randomized closeness and exactness") {
    std::mt19937_64 rng(12345);
    for (int it = 0; it < 300; ++it) {
        int R = 2 + (int)(rng() % 3);
        long long t = R * R + 1 + (long long)(rng() % 120);
        // random positive masses, exact denominators
        std::vector<std::pair<Payload, Rational>> mass;
        long long den = 1000;
        std::vector<long long> parts;
        long long left = den;
        for (int s = 0; s < R - 1; ++s) {
            long long cut = 1 + (long long)(rng() % (left - (R - 1 - s)));
            parts.push_back(cut);
            left -= cut;
        }
        parts.push_back(left);
        for (int s = 0; s < R; ++s)
            mass.emplace_back("m" + std::to_string(s), Rational(parts[s], den));
        auto d = ChoiceDistribution::from_rationals(std::move(mass));
        Rational window = Rational(1, (long long)R * R) - Rational(1, t);
        Rational eps = window * Rational(1 + (long long)(rng() % 9), 10);
        if (!(Rational(0) < eps && eps < window)) continue;

        auto dt = adjust(d, t, eps);
        Rational sum(0);
        for (auto& [s, m] : dt.mass) {
            CHECK(m > Rational(0));
            CHECK(t % m.den == 0);  // positive integer count
            sum = sum + m;
        }
        CHECK(sum == Rational(1));
        for (auto& [s, m] : dt.mass) {
            Rational rho = d.mass_of(s);
            if (s == dt.star) {
                // rho*_star > rho_star - R(eps + 1/t)
                CHECK(m > rho - Rational(R) * (eps + Rational(1, t)));
            } else {
                // rho~_s < max{rho_s, eps} + 1/t, strict
                CHECK(m < (rho > eps ? rho : eps) + Rational(1, t));
            }
        }
    }
}

TEST_CASE("default_eps caps at half the window") {
    CHECK(default_eps(Rational(1, 5), 2, 5) == Rational(1, 80));
    // c = 1, R = 2, t = 10: base 1/16 < (1/4 - 1/10)/2 = 3/40, so base wins
    CHECK(default_eps(Rational(1), 2, 10) == Rational(1, 16));
    // c = 1, R = 2, t = 5: window 1/20, base 1/16 > 1/40, capped
    CHECK(default_eps(Rational(1), 2, 5) == Rational(1, 40));
    CHECK_THROWS_AS(default_eps(Rational(1, 5), 2, 4), PreconditionViolated);
}

TEST_CASE("binomial tail: frozen values") {
    CHECK(binomial_tail(8, 0.5, 3) == doctest::Approx(219.0 / 256.0));
    CHECK(binomial_tail(8, 0.5, 0) == 1.0);
    CHECK(binomial_tail(8, 0.5, 9) == 0.0);
    CHECK(binomial_tail(4, 0.25, 4) == doctest::Approx(1.0 / 256.0));
}

TEST_CASE("empirical tail matches the exact binomial within 3 SE") {
    auto d = ChoiceDistribution::uniform({"0", "1"});
    Rational c(1, 5);
    auto dt = adjust(d, 10, Rational(1, 100));
    long long trials = 20000;
    auto emp = empirical_tail(d, dt, c, trials, 7);
    auto counts = dt.counts();
    long long good = 8;  // (1 - c) * t
    for (auto& [s, rho] : d.mass) {
        double p = binomial_tail(good, rho.to_double(), counts.at(s));
        double se = std::sqrt(p * (1 - p) / (double)trials);
        CHECK(std::abs(emp.at(s) - p) <= 3 * se + 1e-12);
    }
}

TEST_CASE("analytic tail bound: frozen value and preconditions") {
    TailBoundParams params;
    params.n = 1000;
    params.t = 200;
    params.c = Rational(1, 5);
    params.R = 2;
    params.eps = Rational(1, 100);
    params.validate();
    // delta = min(1/100, 1/8) = 1/100; delta' = 0.01 * c^3 / (3(1-c))
    double dp = 0.01 * 0.008 / (3.0 * 0.8);
    CHECK(tail_bound(params) == doctest::Approx(std::exp(-dp * 1000)));

    params.t = 30;  // t <= (2/c)R^2 = 40
    params.n = 150;
    CHECK_THROWS_AS(params.validate(), PreconditionViolated);
}
