#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dizi {

// Exact rational arithmetic for note durations, measured in quarter lengths.
// Always kept normalized: den > 0, gcd(num, den) == 1.
struct Rational {
    long long num = 0;
    long long den = 1;

    constexpr Rational() = default;
    constexpr Rational(long long n) : num(n), den(1) {}
    Rational(long long n, long long d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0)
            throw std::invalid_argument("rational with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
        if (num == 0)
            den = 1;
    }

    bool is_integer() const { return den == 1; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    Rational operator+(const Rational& o) const { return Rational(num * o.den + o.num * den, den * o.den); }
    Rational operator-(const Rational& o) const { return Rational(num * o.den - o.num * den, den * o.den); }
    Rational operator*(const Rational& o) const { return Rational(num * o.num, den * o.den); }
    Rational operator/(const Rational& o) const {
        if (o.num == 0)
            throw std::invalid_argument("rational division by zero");
        return Rational(num * o.den, den * o.num);
    }
    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }

    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const { return num * o.den < o.num * den; }
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator<=(const Rational& o) const { return !(o < *this); }
    bool operator>=(const Rational& o) const { return !(*this < o); }

    // "3/2", integers without the denominator: "2"
    std::string str() const {
        if (den == 1)
            return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

inline long long lcm_ll(long long a, long long b) { return a / std::gcd(a, b) * b; }

} // namespace dizi
