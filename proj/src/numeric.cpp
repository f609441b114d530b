#include "evtkit/numeric.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace evtkit {

std::string_view to_string(Criterion criterion) {
    return criterion == Criterion::kAbsolute ? "abs" : "rel";
}

Criterion parse_criterion(std::string_view text) {
    if (text == "abs" || text == "absolute") return Criterion::kAbsolute;
    if (text == "rel" || text == "relative") return Criterion::kRelative;
    throw std::invalid_argument("unknown criterion '" + std::string(text) + "' (expected abs or rel)");
}

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

[[noreturn]] void malformed(std::string_view text) {
    throw std::invalid_argument("malformed number '" + std::string(text) + "'");
}

mpz_class parse_integer(std::string_view text) {
    std::string_view digits = text;
    bool negative = false;
    if (!digits.empty() && (digits.front() == '-' || digits.front() == '+')) {
        negative = digits.front() == '-';
        digits.remove_prefix(1);
    }
    if (!all_digits(digits)) malformed(text);
    mpz_class z(std::string(digits), 10);
    return negative ? mpz_class(-z) : z;
}

// Exact value of a decimal literal: [sign] digits [. digits] [(e|E) [sign] digits].
Rational parse_decimal(std::string_view text) {
    std::string_view rest = text;
    bool negative = false;
    if (!rest.empty() && (rest.front() == '-' || rest.front() == '+')) {
        negative = rest.front() == '-';
        rest.remove_prefix(1);
    }
    long exponent = 0;
    if (auto e = rest.find_first_of("eE"); e != std::string_view::npos) {
        std::string_view exp_text = rest.substr(e + 1);
        rest = rest.substr(0, e);
        std::string_view exp_digits = exp_text;
        if (!exp_digits.empty() && (exp_digits.front() == '-' || exp_digits.front() == '+')) {
            exp_digits.remove_prefix(1);
        }
        if (!all_digits(exp_digits) || exp_digits.size() > 6) malformed(text);
        exponent = std::stol(std::string(exp_text));
    }
    std::string_view int_part = rest;
    std::string_view frac_part;
    if (auto dot = rest.find('.'); dot != std::string_view::npos) {
        int_part = rest.substr(0, dot);
        frac_part = rest.substr(dot + 1);
    }
    if (int_part.empty() && frac_part.empty()) malformed(text);
    if ((!int_part.empty() && !all_digits(int_part)) || (!frac_part.empty() && !all_digits(frac_part))) {
        malformed(text);
    }
    std::string digits(int_part);
    digits += frac_part;
    exponent -= static_cast<long>(frac_part.size());
    mpz_class mantissa(digits.empty() ? std::string("0") : digits, 10);
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(exponent)));
    Rational value = exponent >= 0 ? Rational(mantissa * scale) : Rational(mantissa, scale);
    value.canonicalize();
    return negative ? Rational(-value) : value;
}

constexpr double kTwo53 = 9007199254740992.0;

}  // namespace

Rational parse_rational(std::string_view text) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        mpz_class num = parse_integer(text.substr(0, slash));
        std::string_view den_text = text.substr(slash + 1);
        if (!all_digits(den_text)) malformed(text);
        mpz_class den(std::string(den_text), 10);
        if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
        Rational q(num, den);
        q.canonicalize();
        return q;
    }
    return parse_decimal(text);
}

template <>
Rational parse_number<Rational>(std::string_view text) {
    return parse_rational(text);
}

template <>
double parse_number<double>(std::string_view text) {
    if (text.find('/') != std::string_view::npos) {
        Rational q = parse_rational(text);
        double num = q.get_num().get_d();
        double den = q.get_den().get_d();
        // One IEEE division is correctly rounded when both operands are exact.
        if (std::fabs(num) <= kTwo53 && den <= kTwo53) return num / den;
        return convert_value<double>(q);
    }
    parse_decimal(text);  // validates the syntax strtod would be lenient about
    std::string buffer(text);
    return std::strtod(buffer.c_str(), nullptr);
}

std::string format_number(const Rational& x) {
    return x.get_str(10);
}

std::string format_number(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), x);
    if (ec != std::errc()) throw std::runtime_error("cannot format number");
    return std::string(buffer, end);
}

template <>
Rational convert_value<Rational>(const Rational& x) {
    return x;
}

template <>
double convert_value<double>(const Rational& x) {
    // get_d truncates; pick the nearer of the truncated value and its outward neighbour.
    double d = x.get_d();
    if (std::isinf(d)) return d;
    double outward = std::nextafter(d, sgn(x) < 0 ? -INFINITY : INFINITY);
    if (std::isinf(outward)) return d;
    Rational err_d = abs(Rational(d) - x);
    Rational err_o = abs(Rational(outward) - x);
    return err_o < err_d ? outward : d;
}

template <Value V>
Extended<V> diff(Criterion criterion, std::span<const V> x, std::span<const V> y) {
    if (x.size() != y.size()) throw std::invalid_argument("diff: vectors of different length");
    V best = NumberTraits<V>::zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        V num = NumberTraits<V>::abs(x[i] - y[i]);
        if (criterion == Criterion::kAbsolute) {
            if (best < num) best = num;
            continue;
        }
        if (NumberTraits<V>::is_zero(y[i])) {
            if (NumberTraits<V>::is_zero(num)) continue;
            if constexpr (std::is_same_v<V, double>) {
                if (num < kRelativeUnderflowGuard) continue;
            }
            return Extended<V>::infinity();
        }
        V rel = num / NumberTraits<V>::abs(y[i]);
        if (best < rel) best = rel;
    }
    return Extended<V>(best);
}

template Extended<double> diff<double>(Criterion, std::span<const double>, std::span<const double>);
template Extended<Rational> diff<Rational>(Criterion, std::span<const Rational>, std::span<const Rational>);

template <>
double relative_budget_root<double>(const double& eps, unsigned k) {
    if (k == 0) throw std::invalid_argument("relative_budget_root: k must be positive");
    if (eps <= 0.0) return 0.0;
    if (k == 1) return eps;
    // Shave a few ulps so rounding in the composition cannot overshoot the budget.
    return std::expm1(std::log1p(eps) / k) * (1.0 - 1e-12);
}

template <>
Rational relative_budget_root<Rational>(const Rational& eps, unsigned k) {
    if (k == 0) throw std::invalid_argument("relative_budget_root: k must be positive");
    if (sgn(eps) <= 0) return Rational(0);
    if (k == 1) return eps;
    Rational bound = 1 + eps;
    auto fits = [&](const Rational& delta) {
        Rational base = 1 + delta;
        mpz_class num, den;
        mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), k);
        mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), k);
        return Rational(num, den) <= bound;
    };
    // Dyadic approximation of the float root, checked exactly.
    double approx = std::expm1(std::log1p(eps.get_d()) / k);
    if (approx > 0.0 && std::isfinite(approx)) {
        int exp2 = 0;
        std::frexp(approx, &exp2);
        mpz_class den;
        mpz_ui_pow_ui(den.get_mpz_t(), 2, static_cast<unsigned long>(std::max(0, 48 - exp2)));
        mpz_class num(std::floor(std::ldexp(approx, std::max(0, 48 - exp2)) * (1.0 - 1e-9)));
        if (num > 0) {
            Rational candidate(num, den);
            candidate.canonicalize();
            if (fits(candidate)) return candidate;
        }
    }
    // (1 + eps/(k(1+eps)))^k <= exp(eps/(1+eps)) <= 1 + eps.
    Rational fallback = eps / (Rational(k) * bound);
    fallback.canonicalize();
    return fallback;
}

}  // namespace evtkit
