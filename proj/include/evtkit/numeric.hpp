#pragma once

#include <gmpxx.h>

#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace evtkit {

/// Arbitrary-precision rational, always kept canonical (gcd-reduced, positive denominator).
using Rational = mpq_class;

using StateId = std::size_t;
inline constexpr StateId kNoState = std::numeric_limits<StateId>::max();

template <typename V>
inline constexpr bool kIsRational = std::is_same_v<V, Rational>;

template <typename V>
concept Value = std::is_same_v<V, double> || std::is_same_v<V, Rational>;

/// Error criterion for stopping rules and certificates.
enum class Criterion { kAbsolute, kRelative };

std::string_view to_string(Criterion criterion);
Criterion parse_criterion(std::string_view text);

template <Value V>
struct NumberTraits;

template <>
struct NumberTraits<double> {
    static double zero() { return 0.0; }
    static double one() { return 1.0; }
    static bool is_zero(double x) { return x == 0.0; }
    static double abs(double x) { return std::fabs(x); }
    static double to_double(double x) { return x; }
    static double from_double(double x) { return x; }
    static double from_int(long x) { return static_cast<double>(x); }
    static constexpr const char* name = "float";
};

template <>
struct NumberTraits<Rational> {
    static Rational zero() { return Rational(0); }
    static Rational one() { return Rational(1); }
    static bool is_zero(const Rational& x) { return sgn(x) == 0; }
    static Rational abs(const Rational& x) { return ::abs(x); }
    static double to_double(const Rational& x) { return x.get_d(); }
    static Rational from_double(double x) { return Rational(x); }
    static Rational from_int(long x) { return Rational(x); }
    static constexpr const char* name = "rational";
};

/// Parses a decimal literal (optionally with exponent) or a `num/den` fraction.
/// Rationals are exact; doubles are correctly rounded for decimals. Throws
/// std::invalid_argument on malformed input.
template <Value V>
V parse_number(std::string_view text);
template <>
double parse_number<double>(std::string_view text);
template <>
Rational parse_number<Rational>(std::string_view text);

Rational parse_rational(std::string_view text);

/// "num/den" (or "num" for integers) for rationals, shortest round-trip form for doubles.
std::string format_number(const Rational& x);
std::string format_number(double x);

/// Nearest-rounded conversion from an exact value.
template <Value V>
V convert_value(const Rational& x);
template <>
double convert_value<double>(const Rational& x);
template <>
Rational convert_value<Rational>(const Rational& x);

/// A non-negative quantity that may be +infinity (recurrent-state EVTs, a/0 differences).
template <Value V>
class Extended {
public:
    Extended() : value_(NumberTraits<V>::zero()) {}
    Extended(V value) : value_(std::move(value)) {}  // NOLINT(google-explicit-constructor)

    static Extended infinity() {
        Extended e;
        e.infinite_ = true;
        return e;
    }

    bool is_infinite() const { return infinite_; }
    bool is_finite() const { return !infinite_; }
    /// Value of a finite quantity; unspecified for infinity.
    const V& value() const { return value_; }

    double to_double() const {
        return infinite_ ? std::numeric_limits<double>::infinity() : NumberTraits<V>::to_double(value_);
    }

    bool operator==(const Extended& other) const {
        return infinite_ == other.infinite_ && (infinite_ || value_ == other.value_);
    }
    bool operator<=(const V& bound) const { return !infinite_ && value_ <= bound; }

private:
    V value_;
    bool infinite_ = false;
};

template <Value V>
std::string format_extended(const Extended<V>& x) {
    return x.is_infinite() ? std::string("inf") : format_number(x.value());
}

/// Below this magnitude a float numerator over an underflowed divisor counts as 0/0.
inline constexpr double kRelativeUnderflowGuard = 1e-300;

/// Distance between two vectors. Absolute: max |x-y|; relative: max |(x-y)/y| with
/// 0/0 = 0 and a/0 = infinity. Throws std::invalid_argument on length mismatch.
template <Value V>
Extended<V> diff(Criterion criterion, std::span<const V> x, std::span<const V> y);

template <Value V>
Extended<V> diff(Criterion criterion, const std::vector<V>& x, const std::vector<V>& y) {
    return diff<V>(criterion, std::span<const V>(x), std::span<const V>(y));
}

/// Largest delta (within the backend's resolution, never larger than exact) with
/// (1+delta)^k <= 1+eps. Used to split a relative error budget over k compositions.
template <Value V>
V relative_budget_root(const V& eps, unsigned k);
template <>
double relative_budget_root<double>(const double& eps, unsigned k);
template <>
Rational relative_budget_root<Rational>(const Rational& eps, unsigned k);

}  // namespace evtkit
