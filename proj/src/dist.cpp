#include "lockstep/dist.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lockstep {

void ChoiceDistribution::check_valid() const {
    if (mass.empty()) throw PreconditionViolated("distribution has empty support");
    Rational sum(0);
    Payload prev;
    bool first = true;
    for (auto& [s, m] : mass) {
        if (s.size() > kMaxPayloadBytes)
            throw PreconditionViolated("payload exceeds size limit");
        if (!first && !(prev < s))
            throw PreconditionViolated("support not sorted/unique");
        prev = s;
        first = false;
        if (m <= Rational(0)) throw PreconditionViolated("non-positive mass");
        sum = sum + m;
    }
    if (sum != Rational(1)) throw PreconditionViolated("masses do not sum to 1");
    if ((int)mass.size() > R())
        throw PreconditionViolated("support larger than declared R");
}

ChoiceDistribution ChoiceDistribution::point(const Payload& p) {
    ChoiceDistribution d;
    d.mass.emplace_back(p, Rational(1));
    return d;
}

ChoiceDistribution ChoiceDistribution::uniform(std::vector<Payload> support) {
    std::sort(support.begin(), support.end());
    ChoiceDistribution d;
    for (auto& p : support)
        d.mass.emplace_back(p, Rational(1, (long long)support.size()));
    return d;
}

ChoiceDistribution ChoiceDistribution::from_rationals(
    std::vector<std::pair<Payload, Rational>> m, int r_bound) {
    std::sort(m.begin(), m.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    ChoiceDistribution d;
    d.mass = std::move(m);
    d.r_bound = r_bound;
    d.check_valid();
    return d;
}

ChoiceDistribution ChoiceDistribution::from_doubles(
    const std::vector<std::pair<Payload, double>>& m, int r_bound) {
    if (m.empty()) throw PreconditionViolated("distribution has empty support");
    // Largest mass (ties to lex-smaller payload) absorbs the rounding residue.
    size_t star = 0;
    for (size_t i = 1; i < m.size(); ++i) {
        if (m[i].second > m[star].second ||
            (m[i].second == m[star].second && m[i].first < m[star].first))
            star = i;
    }
    std::vector<std::pair<Payload, Rational>> out;
    Rational rest(0);
    for (size_t i = 0; i < m.size(); ++i) {
        if (i == star) continue;
        Rational r = Rational::from_double(m[i].second);
        if (r <= Rational(0))
            throw PreconditionViolated("non-positive mass after rounding");
        rest = rest + r;
        out.emplace_back(m[i].first, r);
    }
    Rational starMass = Rational(1) - rest;
    if (starMass <= Rational(0))
        throw PreconditionViolated("masses do not normalize");
    out.emplace_back(m[star].first, starMass);
    return from_rationals(std::move(out), r_bound);
}

Payload choose_star(const ChoiceDistribution& d) {
    d.check_valid();
    size_t best = 0;
    for (size_t i = 1; i < d.mass.size(); ++i)
        if (d.mass[i].second > d.mass[best].second) best = i;
    // support is payload-sorted, so the first maximal element is lex-smallest
    return d.mass[best].first;
}

AdjustedDistribution adjust(const ChoiceDistribution& d, long long t, const Rational& eps) {
    d.check_valid();
    const int R = d.R();
    if (!(t > (long long)R * R))
        throw PreconditionViolated("adjust requires t > R^2 (t=" + std::to_string(t) +
                                   ", R=" + std::to_string(R) + ")");
    Rational window = Rational(1, (long long)R * R) - Rational(1, t);
    if (!(Rational(0) < eps))
        throw PreconditionViolated("adjust requires eps > 0 (eps=" + eps.str() + ")");
    if (!(eps < window))
        throw PreconditionViolated("adjust requires eps < 1/R^2 - 1/t (eps=" + eps.str() +
                                   ", window=" + window.str() + ")");

    AdjustedDistribution out;
    out.star = choose_star(d);
    out.t = t;
    out.R = R;
    out.eps = eps;

    Rational rest(0);
    for (auto& [s, rho] : d.mass) {
        if (s == out.star) continue;
        Rational target = rho > eps ? rho : eps;
        long long k = least_positive_multiple_count(target, t);
        Rational adj(k, t);
        rest = rest + adj;
        out.mass.emplace_back(s, adj);
    }
    Rational starMass = Rational(1) - rest;
    if (starMass <= Rational(0))
        throw PreconditionViolated("adjusted star mass not positive");
    out.mass.emplace_back(out.star, starMass);
    std::sort(out.mass.begin(), out.mass.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    for (auto& [s, m] : out.mass) {
        if (t % m.den != 0)
            throw PreconditionViolated("adjusted mass not a multiple of 1/t");
    }
    return out;
}

Rational default_eps(const Rational& c, int R, long long t) {
    Rational window = Rational(1, (long long)R * R) - Rational(1, t);
    if (window <= Rational(0))
        throw PreconditionViolated("no usable epsilon: t <= R^2");
    Rational base = c / Rational(4LL * R * R);
    Rational cap = window / Rational(2);
    return base < cap ? base : cap;
}

void TailBoundParams::validate() const {
    if (!(Rational(0) < c && c < Rational(1, 3)))
        throw PreconditionViolated("requires 0 < c < 1/3 (c=" + c.str() + ")");
    if (Rational(t) != c * Rational(n))
        throw PreconditionViolated("requires t = c*n");
    Rational bound = Rational(2) / c * Rational((long long)R * R);
    if (!(Rational(t) > bound))
        throw PreconditionViolated("requires t > (2/c)R^2 (t=" + std::to_string(t) +
                                   ", (2/c)R^2=" + bound.str() + ")");
    Rational window = c / Rational(2LL * R * R) - Rational(1, t);
    if (!(Rational(0) < eps && eps < window))
        throw PreconditionViolated("requires 0 < eps < c/(2R^2) - 1/t (eps=" + eps.str() +
                                   ", window=" + window.str() + ")");
}

double tail_bound(const TailBoundParams& params) {
    params.validate();
    return std::exp(-params.delta_prime() * (double)params.n);
}

std::map<Payload, double> empirical_tail(const ChoiceDistribution& d,
                                         const AdjustedDistribution& dTilde,
                                         const Rational& c, long long trials,
                                         uint64_t seed) {
    Rational goodR = (Rational(1) - c) * Rational(dTilde.t);
    if (goodR.den != 1)
        throw PreconditionViolated("(1-c)t is not an integer");
    long long good = goodR.num;
    auto targets = dTilde.counts();

    std::map<Payload, double> out;
    size_t idx = 0;
    for (auto& [s, rho] : d.mass) {
        double p = rho.to_double();
        long long target = targets.at(s);
        std::mt19937_64 rng(mix_seed(seed, idx++));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        long long hits = 0;
        for (long long tr = 0; tr < trials; ++tr) {
            long long sum = 0;
            for (long long i = 0; i < good; ++i)
                if (uni(rng) < p) ++sum;
            if (sum >= target) ++hits;
        }
        out[s] = (double)hits / (double)trials;
    }
    return out;
}

double binomial_tail(long long nTrials, double p, long long threshold) {
    if (threshold <= 0) return 1.0;
    if (threshold > nTrials) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double sum = 0.0;
    for (long long k = threshold; k <= nTrials; ++k) {
        double logTerm = std::lgamma((double)nTrials + 1) - std::lgamma((double)k + 1) -
                         std::lgamma((double)(nTrials - k) + 1) +
                         (double)k * std::log(p) +
                         (double)(nTrials - k) * std::log1p(-p);
        sum += std::exp(logTerm);
    }
    return std::min(sum, 1.0);
}

}  // namespace lockstep
