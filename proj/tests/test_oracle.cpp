#include <gtest/gtest.h>

#include "evtkit/graph.hpp"
#include "evtkit/oracle.hpp"
#include "support.hpp"

using namespace evtkit;
using evtkit::testing::load_fixture;
using evtkit::testing::q;

TEST(Oracle, RunningExample) {
    const auto chain = load_fixture<Rational>("running_example.mc");
    const auto evts = oracle::oracle_evts(chain);
    EXPECT_EQ(evts[0].value(), q(41, 25));
    EXPECT_EQ(evts[3].value(), q(5));
    EXPECT_TRUE(evts[4].is_infinite());
    EXPECT_EQ(oracle::oracle_stationary(chain),
              (std::vector<Rational>{0, 0, 0, 0, q(5, 16), q(3, 16), q(1, 2)}));
    EXPECT_EQ(oracle::oracle_reach(chain, 5), q(1, 2));
    EXPECT_EQ(oracle::oracle_return_probability(chain, 3), q(4, 5));
    EXPECT_EQ(oracle::oracle_return_probability(chain, 2), 0);
    const auto n = oracle::fundamental_matrix(chain);
    ASSERT_EQ(n.transient.size(), 4u);
}

TEST(Oracle, ContinuousTime) {
    const auto chain = load_fixture<Rational>("ctmc.mc");
    EXPECT_EQ(oracle::oracle_evts(chain)[0].value(), q(1, 2));
}

TEST(Oracle, UnreachableConditioning) {
    const auto chain = parse_model<Rational>("@type dtmc\n@initial\na 1\n@transitions\na a 1\nb b 1\n");
    EXPECT_THROW(oracle::oracle_condrew(chain, {q(1), q(1)}, 1), std::domain_error);
}

TEST(GenerateFdr, Structure) {
    const auto one = oracle::generate_fdr(1);
    ASSERT_EQ(one.size(), 2u);
    EXPECT_EQ(one.name(0), "v1_c0");
    EXPECT_EQ(one.name(1), "f1");
    EXPECT_EQ(one.transitions().at(0, 1), 1);

    for (unsigned n : {2u, 3u, 6u, 7u, 12u, 33u}) {
        const auto chain = oracle::generate_fdr(n);
        const SccDecomposition scc(chain);
        EXPECT_EQ(scc.bottom_sccs().size(), n);
        for (unsigned f = 1; f <= n; ++f) {
            const StateId face = *chain.find_state("f" + std::to_string(f));
            EXPECT_EQ(chain.transitions().at(face, face), 1);
            EXPECT_EQ(oracle::oracle_reach(chain, face), Rational(1, n)) << n;
        }
        for (StateId s = 0; s < chain.size(); ++s) {
            for (const auto& e : chain.transitions().row(s)) {
                if (chain.name(s)[0] == 'v') EXPECT_TRUE(e.value == q(1, 2) || e.value == 1);
            }
        }
    }
    EXPECT_EQ(oracle::generate_fdr(6).size(), 13u);
    EXPECT_THROW(oracle::generate_fdr(0), std::invalid_argument);
}

TEST(GenerateRandom, Deterministic) {
    oracle::RandomChainOptions o;
    o.states = 12;
    o.bscc_count = 2;
    o.with_reward = true;
    EXPECT_EQ(oracle::generate_random_chain(42, o), oracle::generate_random_chain(42, o));
    EXPECT_NE(oracle::generate_random_chain(42, o), oracle::generate_random_chain(43, o));
}

TEST(GenerateRandom, HonoursStructure) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        oracle::RandomChainOptions o;
        o.states = 4 + seed % 20;
        o.bscc_count = 2 + seed % 3;
        o.max_bscc_size = 1 + seed % 3;
        o.continuous_time = seed % 2;
        o.with_reward = true;
        const auto chain = oracle::generate_random_chain(seed, o);
        ASSERT_EQ(chain.size(), o.states);
        EXPECT_EQ(chain.is_continuous_time(), o.continuous_time);
        const SccDecomposition scc(chain);
        EXPECT_GE(scc.bottom_sccs().size(), o.bscc_count) << seed;
        for (SccId b : scc.bottom_sccs()) EXPECT_LE(scc.members(b).size(), o.max_bscc_size);
        for (StateId s = 0; s < chain.size(); ++s) {
            EXPECT_LE(chain.transitions().row(s).size(), 64u);
            if (!scc.is_transient(s)) EXPECT_EQ(chain.reward("r")[s], 0);
        }
    }
}

TEST(GenerateRandom, RejectsInfeasibleParameters) {
    oracle::RandomChainOptions o;
    o.states = 0;
    EXPECT_THROW(oracle::generate_random_chain(1, o), std::invalid_argument);
    o.states = 3;
    o.bscc_count = 4;
    EXPECT_THROW(oracle::generate_random_chain(1, o), std::invalid_argument);
    o.bscc_count = 1;
    o.density = 0.0;
    EXPECT_THROW(oracle::generate_random_chain(1, o), std::invalid_argument);
    o.density = 1.5;
    EXPECT_THROW(oracle::generate_random_chain(1, o), std::invalid_argument);
    o.density = 1.0;
    o.states = 65;
    EXPECT_THROW(oracle::generate_random_chain(1, o), std::invalid_argument);
}
