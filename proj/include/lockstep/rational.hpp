#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

namespace lockstep {

// Exact rational on int64 with int128 intermediates. Denominators in this
// project stay small (<= 1e9 from decimal input, or the group size t), so
// overflow after reduction indicates a usage bug and throws.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n) : num(n), den(1) {}
    Rational(long long n, long long d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw std::invalid_argument("Rational: zero denominator");
        if (den < 0) { num = -num; den = -den; }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
        if (num == 0) den = 1;
    }

    static Rational make128(__int128 n, __int128 d) {
        if (d == 0) throw std::invalid_argument("Rational: zero denominator");
        if (d < 0) { n = -n; d = -d; }
        __int128 a = n < 0 ? -n : n;
        __int128 b = d;
        while (b) { __int128 r = a % b; a = b; b = r; }
        if (a > 1) { n /= a; d /= a; }
        const __int128 lim = (__int128)INT64_MAX;
        if (n > lim || n < -lim || d > lim)
            throw std::overflow_error("Rational overflow");
        Rational out;
        out.num = (long long)n;
        out.den = (long long)d;
        return out;
    }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return make128((__int128)a.num * b.den + (__int128)b.num * a.den,
                       (__int128)a.den * b.den);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return make128((__int128)a.num * b.den - (__int128)b.num * a.den,
                       (__int128)a.den * b.den);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return make128((__int128)a.num * b.num, (__int128)a.den * b.den);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num == 0) throw std::invalid_argument("Rational: divide by zero");
        return make128((__int128)a.num * b.den, (__int128)a.den * b.num);
    }
    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num == b.num && a.den == b.den;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return (__int128)a.num * b.den < (__int128)b.num * a.den;
    }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

    double to_double() const { return (double)num / (double)den; }

    std::string str() const {
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }

    // Round to the nearest multiple of 1/10^9; used to bring double-valued
    // probability masses into exact arithmetic.
    static Rational from_double(double x) {
        const long long D = 1000000000LL;
        double scaled = x * (double)D;
        long long n = (long long)(scaled >= 0 ? scaled + 0.5 : scaled - 0.5);
        return Rational(n, D);
    }

    // Accepts "a/b", an integer, or a decimal like "0.0125".
    static std::optional<Rational> parse(const std::string& s) {
        if (s.empty()) return std::nullopt;
        auto slash = s.find('/');
        try {
            if (slash != std::string::npos) {
                long long n = std::stoll(s.substr(0, slash));
                long long d = std::stoll(s.substr(slash + 1));
                if (d == 0) return std::nullopt;
                return Rational(n, d);
            }
            auto dot = s.find('.');
            if (dot == std::string::npos) return Rational(std::stoll(s));
            std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
            if (fp.size() > 18) fp = fp.substr(0, 18);
            long long den = 1;
            for (size_t i = 0; i < fp.size(); ++i) den *= 10;
            bool neg = !ip.empty() && ip[0] == '-';
            long long whole = ip.empty() || ip == "-" ? 0 : std::stoll(ip);
            long long frac = fp.empty() ? 0 : std::stoll(fp);
            __int128 n = (__int128)(neg ? -whole : whole) * den + frac;
            if (neg) n = -n;
            return make128(n, den);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
};

// Smallest positive integer k with k/t >= x.
inline long long least_positive_multiple_count(const Rational& x, long long t) {
    if (x.num <= 0) return 1;
    __int128 n = (__int128)x.num * t;
    __int128 k = n / x.den;
    if (k * x.den < n) ++k;
    if (k < 1) k = 1;
    return (long long)k;
}

}  // namespace lockstep
