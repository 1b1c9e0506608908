#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lockstep/payload.hpp"
#include "lockstep/rational.hpp"

namespace lockstep {

struct PreconditionViolated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Probability distribution over at most R payloads, exact masses.
struct ChoiceDistribution {
    // Sorted by payload (canonical order), strictly positive masses.
    std::vector<std::pair<Payload, Rational>> mass;
    int r_bound = 0;  // declared R; 0 means |support|

    int R() const { return r_bound > 0 ? r_bound : (int)mass.size(); }
    size_t size() const { return mass.size(); }

    bool contains(const Payload& p) const {
        for (auto& [s, m] : mass)
            if (s == p) return true;
        return false;
    }
    Rational mass_of(const Payload& p) const {
        for (auto& [s, m] : mass)
            if (s == p) return m;
        return Rational(0);
    }

    void check_valid() const;

    static ChoiceDistribution point(const Payload& p);
    static ChoiceDistribution uniform(std::vector<Payload> support);
    static ChoiceDistribution from_rationals(std::vector<std::pair<Payload, Rational>> m,
                                             int r_bound = 0);
    // Rounds each mass to denominator 1e9 and renormalizes the residue onto
    // the maximal element, so downstream arithmetic is exact.
    static ChoiceDistribution from_doubles(const std::vector<std::pair<Payload, double>>& m,
                                           int r_bound = 0);
};

// D-tilde: every mass is a positive multiple of 1/t.
struct AdjustedDistribution {
    std::vector<std::pair<Payload, Rational>> mass;  // sorted by payload
    Payload star;
    long long t = 0;
    int R = 0;
    Rational eps;

    // Exact per-payload counts rho_s * t (sum to t).
    std::map<Payload, long long> counts() const {
        std::map<Payload, long long> out;
        for (auto& [s, m] : mass) out[s] = m.num * (t / m.den);
        return out;
    }
    Rational mass_of(const Payload& p) const {
        for (auto& [s, m] : mass)
            if (s == p) return m;
        return Rational(0);
    }
};

// Element of maximal mass, ties to the lexicographically smaller payload.
Payload choose_star(const ChoiceDistribution& d);

// Grid rounding with closeness guarantees. Requires t > R^2 and
// 0 < eps < 1/R^2 - 1/t.
AdjustedDistribution adjust(const ChoiceDistribution& d, long long t, const Rational& eps);

// Default epsilon c/(4R^2), capped at half the adjustment window 1/R^2 - 1/t
// so it stays usable at large c.
Rational default_eps(const Rational& c, int R, long long t);

struct TailBoundParams {
    long long n = 0;
    long long t = 0;  // t = c*n
    Rational c;
    int R = 0;
    Rational eps;

    Rational delta() const {
        Rational quarter(1, 4LL * R);
        return eps < quarter ? eps : quarter;
    }
    double delta_prime() const {
        double cd = c.to_double();
        return delta().to_double() * cd * cd * cd / (3.0 * (1.0 - cd));
    }
    // Throws PreconditionViolated naming the violated inequality.
    void validate() const;
};

// e^{-delta' n}
double tail_bound(const TailBoundParams& params);

// Monte Carlo estimate of P[sum of (1-c)t Bernoulli(rho_s) >= rho~_s t].
std::map<Payload, double> empirical_tail(const ChoiceDistribution& d,
                                         const AdjustedDistribution& dTilde,
                                         const Rational& c, long long trials,
                                         uint64_t seed);

// Exact binomial upper tail P[Bin(nTrials, p) >= threshold].
double binomial_tail(long long nTrials, double p, long long threshold);

}  // namespace lockstep
