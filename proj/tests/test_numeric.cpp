#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "evtkit/numeric.hpp"
#include "support.hpp"

using namespace evtkit;
using evtkit::testing::q;

TEST(ParseNumber, RationalDecimalsAreExact) {
    EXPECT_EQ(parse_number<Rational>("0.1"), q(1, 10));
    EXPECT_EQ(parse_number<Rational>("1/2"), q(1, 2));
    EXPECT_EQ(parse_number<Rational>("2/4"), q(1, 2));
    EXPECT_EQ(parse_number<Rational>("1e-3"), q(1, 1000));
    EXPECT_EQ(parse_number<Rational>("2.5E2"), q(250));
    EXPECT_EQ(parse_number<Rational>("7"), q(7));
    EXPECT_EQ(parse_number<Rational>(".25"), q(1, 4));
}

TEST(ParseNumber, FloatsRoundToNearest) {
    EXPECT_EQ(parse_number<double>("0.1"), 0.1);
    EXPECT_EQ(parse_number<double>("1/3"), 1.0 / 3.0);
    EXPECT_EQ(parse_number<double>("99/100"), 0.99);
}

TEST(ParseNumber, RejectsGarbage) {
    for (const char* bad : {"", "abc", "1/0", "1/", "/2", "0.1.2", "1e", "--1"}) {
        EXPECT_ANY_THROW(parse_number<Rational>(bad)) << bad;
        EXPECT_ANY_THROW(parse_number<double>(bad)) << bad;
    }
}

TEST(FormatNumber, RationalAndFloat) {
    EXPECT_EQ(format_number(q(41, 25)), "41/25");
    EXPECT_EQ(format_number(q(5)), "5");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_extended(Extended<Rational>::infinity()), "inf");
    EXPECT_EQ(parse_number<double>(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(ConvertValue, NearestDouble) {
    EXPECT_EQ(convert_value<double>(q(1, 3)), 1.0 / 3.0);
    EXPECT_EQ(convert_value<double>(q(1, 10)), 0.1);
    EXPECT_EQ(convert_value<Rational>(q(2, 7)), q(2, 7));
}

TEST(Extended, Comparisons) {
    const Extended<double> inf = Extended<double>::infinity();
    EXPECT_FALSE(inf <= 1e300);
    EXPECT_TRUE(Extended<double>(0.5) <= 0.5);
    EXPECT_EQ(inf, Extended<double>::infinity());
    EXPECT_NE(inf, Extended<double>(1.0));
    EXPECT_TRUE(std::isinf(inf.to_double()));
}

TEST(Diff, AbsoluteIsMaxNorm) {
    const std::vector<double> x = {1.0, 2.0, 3.0};
    const std::vector<double> y = {1.5, 2.0, 2.0};
    EXPECT_EQ(diff<double>(Criterion::kAbsolute, x, y).value(), 1.0);
}

TEST(Diff, RelativeConventions) {
    // Divides by the second argument; 0/0 = 0 and a/0 = infinity.
    const std::vector<Rational> x = {q(0), q(3), q(1)};
    const std::vector<Rational> y = {q(0), q(2), q(1)};
    EXPECT_EQ(diff<Rational>(Criterion::kRelative, x, y).value(), q(1, 2));
    const std::vector<Rational> a = {q(1)};
    const std::vector<Rational> zero = {q(0)};
    EXPECT_TRUE(diff<Rational>(Criterion::kRelative, a, zero).is_infinite());
    EXPECT_EQ(diff<Rational>(Criterion::kRelative, zero, a).value(), q(1));
}

TEST(Diff, FloatUnderflowGuard) {
    const std::vector<double> tiny = {1e-310};
    const std::vector<double> zero = {0.0};
    EXPECT_EQ(diff<double>(Criterion::kRelative, tiny, zero).value(), 0.0);
    const std::vector<double> big = {1e-200};
    EXPECT_TRUE(diff<double>(Criterion::kRelative, big, zero).is_infinite());
}

TEST(Diff, EmptyAndMismatched) {
    const std::vector<double> empty;
    EXPECT_EQ(diff<double>(Criterion::kAbsolute, empty, empty).value(), 0.0);
    const std::vector<double> one = {1.0};
    EXPECT_THROW(diff<double>(Criterion::kAbsolute, one, empty), std::invalid_argument);
}

TEST(Criterion, ParseRoundTrip) {
    EXPECT_EQ(parse_criterion("abs"), Criterion::kAbsolute);
    EXPECT_EQ(parse_criterion("rel"), Criterion::kRelative);
    EXPECT_EQ(to_string(Criterion::kRelative), "rel");
    EXPECT_ANY_THROW(parse_criterion("relative-ish"));
}

TEST(RelativeBudgetRoot, SingleLevelIsIdentity) {
    EXPECT_EQ(relative_budget_root(1e-3, 1), 1e-3);
    EXPECT_EQ(relative_budget_root(q(1, 1000), 1), q(1, 1000));
}

TEST(RelativeBudgetRoot, ComposesWithinBudget) {
    for (unsigned k : {2u, 3u, 7u, 16u, 100u}) {
        const Rational eps = q(1, 1000);
        const Rational delta = relative_budget_root(eps, k);
        Rational power = 1;
        for (unsigned i = 0; i < k; ++i) power *= 1 + delta;
        EXPECT_LE(power, 1 + eps) << k;
        EXPECT_GT(delta, eps / (2 * k)) << k;

        const double d = relative_budget_root(1e-3, k);
        Rational exact_power = 1;
        for (unsigned i = 0; i < k; ++i) exact_power *= 1 + Rational(d);
        EXPECT_LE(exact_power, 1 + Rational(1e-3)) << k;
        EXPECT_GT(d, 0.99 * (std::pow(1 + 1e-3, 1.0 / k) - 1)) << k;
    }
}

TEST(RelativeBudgetRoot, Degenerate) {
    EXPECT_EQ(relative_budget_root(0.0, 3), 0.0);
    EXPECT_EQ(relative_budget_root(q(0), 3), q(0));
    EXPECT_THROW(relative_budget_root(0.1, 0), std::invalid_argument);
}
