#include <gtest/gtest.h>

#include <string>

#include "evtkit/errors.hpp"
#include "evtkit/graph.hpp"
#include "evtkit/model.hpp"
#include "evtkit/oracle.hpp"
#include "support.hpp"

using namespace evtkit;
using evtkit::testing::load_fixture;
using evtkit::testing::q;
using evtkit::testing::read_fixture;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_model<Rational>(text);
    } catch (const ModelError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(ParseModel, RunningExample) {
    const auto chain = load_fixture<Rational>("running_example.mc");
    ASSERT_EQ(chain.size(), 7u);
    EXPECT_FALSE(chain.is_continuous_time());
    EXPECT_EQ(chain.initial()[*chain.find_state("s1")], q(2, 5));
    EXPECT_EQ(chain.initial()[*chain.find_state("s3")], q(3, 5));
    EXPECT_EQ(chain.transitions().at(3, 3), q(4, 5));
    EXPECT_EQ(chain.name(6), "s7");
}

TEST(ParseModel, FloatBackendMatches) {
    const auto exact = load_fixture<Rational>("running_example.mc");
    const auto approx = load_fixture<double>("running_example.mc");
    EXPECT_EQ(convert_chain<double>(exact), approx);
}

TEST(ParseModel, SmallestChain) {
    const auto chain = parse_model<Rational>("@type dtmc\n@initial\nx 1\n@transitions\nx x 1\n");
    EXPECT_EQ(chain.size(), 1u);
    EXPECT_EQ(chain.transitions().at(0, 0), q(1));
}

TEST(ParseModel, ImplicitDeclarationOrder) {
    const auto chain = parse_model<Rational>("@type dtmc\n@initial\nb 1\n@transitions\nb a 1\na a 1\n");
    EXPECT_EQ(chain.name(0), "b");
    EXPECT_EQ(chain.name(1), "a");
}

TEST(ParseModel, RowSumErrorNamesState) {
    std::string text = read_fixture("running_example.mc");
    const auto pos = text.find("s4 s5 0.1");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 9, "s4 s5 0.2");
    const std::string message = error_of(text);
    EXPECT_NE(message.find("s4"), std::string::npos) << message;
    EXPECT_NE(message.find("sum"), std::string::npos) << message;
}

TEST(ParseModel, Errors) {
    const std::string head = "@type dtmc\n@initial\na 1\n@transitions\n";
    EXPECT_NE(error_of(head + "a a 1\na a 1\n").find("duplicate transition"), std::string::npos);
    EXPECT_NE(error_of(head + "a b 1.5\nb b 1\n").find("out of range"), std::string::npos);
    EXPECT_NE(error_of(head + "a b -0.5\na a 1.5\nb b 1\n").find("line"), std::string::npos);
    EXPECT_NE(error_of(head + "a a 1\n@rates\na 2\n").find("rates declared for a dtmc"), std::string::npos);
    EXPECT_NE(error_of(head + "a a x\n").find("line 5"), std::string::npos);
    EXPECT_NE(error_of("@type dtmc\n@bogus\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("@type ctmc\n@initial\na 1\n@transitions\na a 1\n").find("rate"), std::string::npos);
    EXPECT_FALSE(error_of("@type dtmc\n@initial\na 1/2\n@transitions\na a 1\n").empty());
}

TEST(ParseModel, FloatRowsRenormalizeWithinTolerance) {
    const auto chain = parse_model<double>(
        "@type dtmc\n@initial\na 1\n@transitions\na a 0.1\na b 0.2\na c 0.7\nb b 1\nc c 1\n");
    double sum = 0;
    for (const auto& e : chain.transitions().row(0)) sum += e.value;
    EXPECT_NEAR(sum, 1.0, 1e-15);
    EXPECT_THROW(parse_model<double>("@type dtmc\n@initial\na 1\n@transitions\na a 0.9999\n"), ModelError);
}

TEST(ParseModel, RewardsAndRates) {
    const auto chain = load_fixture<Rational>("ctmc.mc");
    ASSERT_TRUE(chain.is_continuous_time());
    EXPECT_EQ((*chain.rates())[0], q(2));
    EXPECT_EQ((*chain.rates())[1], q(5));
    const auto rewarded = load_fixture<Rational>("condrew.mc");
    EXPECT_EQ(rewarded.reward("steps")[*rewarded.find_state("left")], q(1));
    EXPECT_EQ(rewarded.reward("steps")[*rewarded.find_state("win")], q(0));
    EXPECT_THROW(rewarded.reward("missing"), ModelError);
}

TEST(SerializeModel, RoundTripIsExact) {
    for (const char* name : {"running_example.mc", "ctmc.mc", "condrew.mc", "vi_trap.mc"}) {
        const auto chain = load_fixture<Rational>(name);
        EXPECT_EQ(parse_model<Rational>(serialize_model(chain)), chain) << name;
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        oracle::RandomChainOptions options;
        options.states = 3 + seed % 12;
        options.bscc_count = 1 + seed % 3;
        options.continuous_time = seed % 2 == 0;
        options.with_reward = true;
        const auto chain = oracle::generate_random_chain(seed, options);
        EXPECT_EQ(parse_model<Rational>(serialize_model(chain)), chain) << seed;
    }
}

TEST(SerializeModel, FloatRoundTrip) {
    const auto chain = load_fixture<double>("running_example.mc");
    EXPECT_EQ(parse_model<double>(serialize_model(chain)), chain);
}

TEST(Embed, StripsRatesOnly) {
    const auto chain = load_fixture<Rational>("ctmc.mc");
    const auto emb = embed(chain);
    EXPECT_FALSE(emb.is_continuous_time());
    EXPECT_EQ(emb.transitions(), chain.transitions());
    EXPECT_EQ(emb.initial(), chain.initial());
    EXPECT_EQ(emb.rewards(), chain.rewards());
    EXPECT_THROW(embed(emb), ModelError);
}

TEST(MarkovChain, ConstructorValidates) {
    auto m = SparseMatrix<Rational>::from_triplets(1, 1, {{0, 0, q(1)}});
    EXPECT_THROW(MarkovChain<Rational>({"a"}, m, {q(1, 2)}), ModelError);
    EXPECT_THROW(MarkovChain<Rational>({"a"}, m, {q(1)}, std::vector<Rational>{q(0)}), ModelError);
    std::map<std::string, std::vector<Rational>> rewards{{"r", {q(-1)}}};
    EXPECT_THROW(MarkovChain<Rational>({"a"}, m, {q(1)}, std::nullopt, rewards), ModelError);
    EXPECT_NO_THROW(MarkovChain<Rational>({"a"}, m, {q(1)}));
}

TEST(TransientSubmatrix, RunningExample) {
    const auto chain = load_fixture<Rational>("running_example.mc");
    const SccDecomposition scc(chain);
    const auto part = transient_submatrix(chain, scc);
    ASSERT_EQ(part.transient, (std::vector<StateId>{0, 1, 2, 3}));
    EXPECT_EQ(part.q.at(3, 3), q(4, 5));
    EXPECT_EQ(part.r.at(3, part.local[4]), q(1, 10));
    EXPECT_EQ(part.r.at(3, part.local[6]), q(1, 10));
    EXPECT_EQ(part.tau, (std::vector<Rational>{q(2, 5), q(0), q(3, 5), q(0)}));
    for (std::size_t i = 0; i < part.transient.size(); ++i) {
        Rational sum = 0;
        for (const auto& e : part.q.row(i)) sum += e.value;
        for (const auto& e : part.r.row(i)) sum += e.value;
        EXPECT_EQ(sum, 1);
    }
}

TEST(TransientSubmatrix, EmptyCases) {
    const auto absorbing = parse_model<Rational>("@type dtmc\n@initial\na 1\n@transitions\na a 1\nb b 1\n");
    const auto part = transient_submatrix(absorbing, SccDecomposition(absorbing));
    EXPECT_TRUE(part.transient.empty());
    EXPECT_EQ(part.q.rows(), 0u);
    const auto cycle = parse_model<Rational>("@type dtmc\n@initial\na 1\n@transitions\na b 1\nb a 1\n");
    EXPECT_TRUE(transient_submatrix(cycle, SccDecomposition(cycle)).transient.empty());
}
