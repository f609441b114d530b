#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"

// Naive exact reference computations. Dense O(n^3) Gauss-Jordan over rationals and plain
// graph searches only; nothing here shares code with the production solvers.
namespace evtkit::oracle {

inline constexpr std::size_t kMaxStates = 2000;

/// Dense (I - Q)^{-1} over the states outside bottom SCCs; `transient[i]` is the state of
/// row/column i.
struct FundamentalMatrix {
    std::vector<StateId> transient;
    std::vector<std::vector<Rational>> n;
};

/// Throws std::length_error above kMaxStates.
FundamentalMatrix fundamental_matrix(const MarkovChain<Rational>& chain);

/// EVTs: N^T iota on transient states, infinity on reachable recurrent states, 0 otherwise.
std::vector<Extended<Rational>> oracle_evts(const MarkovChain<Rational>& chain);

/// Stationary distribution via per-BSCC eigenvector solves and absorption probabilities.
std::vector<Rational> oracle_stationary(const MarkovChain<Rational>& chain);

/// Probability of ever entering bottom SCC-containing state r's BSCC, from the initial distribution.
Rational oracle_reach(const MarkovChain<Rational>& chain, StateId r);

/// E[total reward | reach the BSCC of r] by conditioning the chain directly: h(s) = Pr_s(reach),
/// then the reward system on the h-transformed chain. Infinity when the BSCC carries positive
/// reward. Throws std::domain_error for unreachable targets.
Extended<Rational> oracle_condrew(const MarkovChain<Rational>& chain, const std::vector<Rational>& reward,
                                  StateId r);

/// Expected total reward without conditioning (finite only when no reachable BSCC carries reward).
Extended<Rational> oracle_total_reward(const MarkovChain<Rational>& chain, const std::vector<Rational>& reward);

/// Probability that a run from s ever returns to s (s transient).
Rational oracle_return_probability(const MarkovChain<Rational>& chain, StateId s);

/// Lumbroso's Fast Dice Roller for a fair N-sided die as a DTMC over reachable (v, c) loop
/// states plus absorbing faces "f1".."fN". Throws std::invalid_argument for N = 0.
MarkovChain<Rational> generate_fdr(unsigned n);

struct RandomChainOptions {
    std::size_t states = 10;
    double density = 0.3;            // in (0, 1]
    std::size_t bscc_count = 1;      // at least this many BSCCs
    std::size_t max_bscc_size = 3;   // 1 yields an absorbing chain
    bool continuous_time = false;
    bool with_reward = false;        // adds reward structure "r" on transient states
};

/// Deterministic (platform-independent) random chain with probabilities of denominator <= 64.
/// bscc_count <= 1 draws an unstructured graph (density 1 gives the complete graph); larger
/// counts lay out transient states ahead of the requested number of BSCCs.
/// Throws std::invalid_argument on infeasible parameters.
MarkovChain<Rational> generate_random_chain(std::uint64_t seed, const RandomChainOptions& options);

}  // namespace evtkit::oracle
