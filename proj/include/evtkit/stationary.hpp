#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "evtkit/evt.hpp"
#include "evtkit/graph.hpp"
#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/solve.hpp"

namespace evtkit {

enum class Strategy { kClassic, kEvtReach, kEvtFull };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

template <Value V>
struct StationaryRequest {
    Strategy strategy = Strategy::kEvtFull;
    Method method = Method::kIntervalIteration;
    V epsilon = parse_number<V>("1/1000");  // relative
    IterationOptions iteration;
};

template <Value V>
struct StationaryResult {
    std::vector<V> values;           // per state; 0 on transient states
    std::vector<SccId> bsccs;        // bottom SCC ids, ascending by smallest member
    std::vector<V> bscc_reach;       // Pr(reach B) parallel to bsccs
    Strategy strategy = Strategy::kEvtFull;
    Method method = Method::kIntervalIteration;
    V epsilon;
    std::optional<V> certified_rel_error;
    std::size_t iterations = 0;
};

/// Pr(reach B) = sum over s in B of iota(s) + sum_{s' transient} P(s', s) * EVT(s'), for every
/// bottom SCC in the order of `bsccs`. `evts` must be finite on reachable transient states.
template <Value V>
std::vector<V> bscc_reach_probabilities(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                        const std::vector<SccId>& bsccs, std::span<const Extended<V>> evts);

/// The sub-chain on one bottom SCC (state order = members order), started in its first member.
template <Value V>
MarkovChain<V> bscc_chain(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId c);

/// Anchor for redirection: most incoming intra-chain transitions, ties to the lowest index.
template <Value V>
StateId choose_anchor(const MarkovChain<V>& irreducible);

/// Appends an absorbing copy v^ of v (named name(v) + "^"), reroutes every transition into v
/// to it and starts in v. Throws std::invalid_argument if the input is not irreducible.
template <Value V>
MarkovChain<V> redirect(const MarkovChain<V>& irreducible, StateId v);

template <Value V>
struct IrreducibleStationary {
    std::vector<V> distribution;
    std::vector<V> redirected_evts;  // EVTs of the original states in the redirected chain
    StateId anchor = 0;
    std::optional<V> certified_rel_error;  // 2 eps / (1 - eps) for certified inner solves
    std::size_t iterations = 0;
};

/// Normalized EVTs of the redirected chain. `anchor` defaults to choose_anchor.
template <Value V>
IrreducibleStationary<V> stationary_irreducible(const MarkovChain<V>& irreducible, Method method, const V& epsilon,
                                                std::optional<StateId> anchor = std::nullopt,
                                                const IterationOptions& options = {});

/// Solves pi P = pi, sum pi = 1 directly (one balance equation replaced by normalization).
template <Value V>
std::vector<V> stationary_classic_bscc(const MarkovChain<V>& irreducible);

/// Pr(reach B) from the initial distribution via the standard per-BSCC linear system
/// x(s) = P(s,B) + sum_t P(s,t) x(t) over the transient states that can reach B.
template <Value V>
struct ClassicReach {
    V probability;
    std::size_t iterations = 0;
};

template <Value V>
ClassicReach<V> classic_reach_probability(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId bottom,
                                          Method method, const V& epsilon, const IterationOptions& options = {});

template <Value V>
StationaryResult<V> stationary_distribution(const MarkovChain<V>& chain, const StationaryRequest<V>& request);

}  // namespace evtkit
