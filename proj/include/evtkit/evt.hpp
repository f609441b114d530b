#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "evtkit/bounds.hpp"
#include "evtkit/graph.hpp"
#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/solve.hpp"

namespace evtkit {

/// Per-SCC absolute threshold used by the topological absolute driver.
///
/// kLinear: sigma = eps / (1 + (1/q) * sum_{i=1..L} T^i).
/// kCompounded: sigma = eps / sum_{i=0..L} (T/q)^i, the bound obtained when the 1/q factor
/// is carried through every level of the error recursion. It is never larger than kLinear.
enum class AbsoluteBudget { kLinear, kCompounded };

template <Value V>
struct EvtRequest {
    Method method = Method::kIntervalIteration;
    Criterion criterion = Criterion::kRelative;
    V epsilon = parse_number<V>("1/1000");
    bool topological = false;
    AbsoluteBudget absolute_budget = AbsoluteBudget::kLinear;
    IterationOptions iteration;
    /// Gauss-Seidel sweeps visit the SCCs of the system topologically instead of by index.
    bool topological_sweep = false;
};

template <Value V>
struct AnalysisResult {
    /// Per state: the EVT (CTMC: expected residence time); 0 if unreachable, infinity if
    /// reachable and recurrent.
    std::vector<Extended<V>> values;
    Method method = Method::kIntervalIteration;
    Criterion criterion = Criterion::kRelative;
    V epsilon;
    bool topological = false;
    /// Guaranteed distance to the exact EVTs under `criterion`; absent for unsound runs.
    std::optional<V> certified_bound;
    /// Per-state brackets (indexed by state, recurrent entries are 0) when the solver
    /// produced them.
    std::optional<Bounds<V>> bounds;
    std::size_t iterations = 0;
    /// Per-SCC precision used by the topological drivers (delta or sigma).
    std::optional<V> inner_epsilon;

    bool certified() const { return certified_bound.has_value(); }
};

/// Checks the request invariants; throws ConfigError.
template <Value V>
void validate_request(const EvtRequest<V>& request);

/// EVTs of every state. CTMC values are the embedded EVTs divided by the exit rate (the
/// absolute threshold is tightened by min(1, min rate) so the bound survives the division).
template <Value V>
AnalysisResult<V> compute_evts(const MarkovChain<V>& chain, const EvtRequest<V>& request);

template <Value V>
AnalysisResult<V> compute_evts(const MarkovChain<V>& chain, const SccDecomposition& scc,
                               const EvtRequest<V>& request);

/// SCC-by-SCC computation with per-SCC relative precision (1+eps)^(1/(L+1)) - 1; eps in [0, 1).
/// DTMC only.
template <Value V>
AnalysisResult<V> topological_evts_relative(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                            const EvtRequest<V>& request);

/// SCC-by-SCC computation with per-SCC absolute precision sigma (see AbsoluteBudget).
/// DTMC only. Throws SolverError if sigma underflows to zero.
template <Value V>
AnalysisResult<V> topological_evts_absolute(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                            const EvtRequest<V>& request);

/// min over reachable transient states of escape_lower_bound (1 when there are none).
template <Value V>
V global_escape_bound(const MarkovChain<V>& chain, const SccDecomposition& scc);

template <Value V>
V absolute_sigma(const V& eps, const V& q, std::size_t t, std::size_t l, AbsoluteBudget budget);

/// Whole-chain EVT system over the reachable transient states (local order = `states`).
template <Value V>
struct ChainSystem {
    std::vector<StateId> states;
    EvtSystem<V> system;
    Bounds<V> initial_bounds;  // l = 0, u = 1/q
    SweepOrder topological_order;
};

template <Value V>
ChainSystem<V> whole_chain_system(const MarkovChain<V>& chain, const SccDecomposition& scc);

}  // namespace evtkit
