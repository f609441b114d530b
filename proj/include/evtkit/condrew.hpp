#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "evtkit/bounds.hpp"
#include "evtkit/evt.hpp"
#include "evtkit/graph.hpp"
#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/solve.hpp"

namespace evtkit {

/// A chain whose bottom SCCs are replaced by single absorbing states. Transient states keep
/// their names and relative order; a collapsed BSCC sits at the position of its first member
/// and is named after it ("{a,b}" for several members).
template <Value V>
struct CollapsedChain {
    MarkovChain<V> chain;                     // discrete-time
    std::vector<V> reward;                    // per collapsed state; 0 on absorbing states
    std::vector<StateId> image;               // original state -> collapsed state
    std::vector<std::vector<StateId>> origin; // collapsed state -> original states
    std::vector<StateId> targets;             // absorbing collapsed states, ascending
    std::vector<bool> infinite;               // per collapsed state: reachable BSCC with positive reward
};

/// Collapses the BSCCs of `chain` for reward structure `reward_name`. CTMCs are reduced to the
/// embedded chain with rewards divided by the exit rates. Throws ModelError for unknown rewards.
template <Value V>
CollapsedChain<V> collapse_bsccs(const MarkovChain<V>& chain, const std::string& reward_name);

/// Solution of (I - Q^T) y = rew * EVT over the collapsed chain's transient states, indexed by
/// collapsed state (0 elsewhere). `bounds` brackets y when the EVT input came with bounds.
template <Value V>
struct YSolution {
    std::vector<V> values;
    std::optional<Bounds<V>> bounds;
    std::size_t iterations = 0;
};

/// One auxiliary solve serving every target. `evts` must come from compute_evts on
/// `collapsed.chain`; `criterion`/`epsilon` drive the iterative methods.
template <Value V>
YSolution<V> solve_y(const CollapsedChain<V>& collapsed, const SccDecomposition& scc, const AnalysisResult<V>& evts,
                     Method method, Criterion criterion, const V& epsilon, const IterationOptions& options = {});

/// Number of solve_y calls made by this process (instrumentation for tests).
std::size_t auxiliary_solve_count();

/// E[total reward | reach r] = sum_t P(t,r) y(t) / (iota(r) + sum_t P(t,r) EVT(t)).
/// Infinity for flagged targets; throws QueryError when r is unreachable.
template <Value V>
Extended<V> conditional_expected_reward(const CollapsedChain<V>& collapsed, std::span<const V> evts,
                                        std::span<const V> y, StateId r);

/// Interval form: [R^T y_l / (iota + R^T u), R^T y_u / (iota + R^T l)] for l <= EVT <= u; the
/// upper end is infinity while iota + R^T l is still zero. Throws QueryError when r is unreachable.
template <Value V>
std::pair<Extended<V>, Extended<V>> conditional_reward_interval(const CollapsedChain<V>& collapsed,
                                                               const Bounds<V>& evts, const Bounds<V>& y,
                                                               StateId r);

template <Value V>
struct CondRewRequest {
    std::string reward;
    Method method = Method::kIntervalIteration;
    Criterion criterion = Criterion::kRelative;
    V epsilon = parse_number<V>("1/1000");
    /// Original state names; each selects the BSCC containing it. Empty = every target.
    std::vector<std::string> targets;
    IterationOptions iteration;
};

template <Value V>
struct ConditionalReward {
    std::string name;                       // collapsed state name
    V reach_probability;                    // point estimate
    std::optional<Extended<V>> value;       // absent when the target is unreachable
    std::optional<Extended<V>> lower;
    std::optional<Extended<V>> upper;
};

template <Value V>
struct CondRewResult {
    std::vector<ConditionalReward<V>> targets;
    Method method = Method::kIntervalIteration;
    Criterion criterion = Criterion::kRelative;
    V epsilon;
    /// True when [lower, upper] is guaranteed to contain the exact value.
    bool certified = false;
    std::size_t iterations = 0;
    std::size_t auxiliary_solves = 0;
};

/// Throws QueryError when an explicitly requested target is unreachable or names a transient
/// state, and ModelError for an unknown state or reward name.
template <Value V>
CondRewResult<V> conditional_expected_rewards(const MarkovChain<V>& chain, const CondRewRequest<V>& request);

}  // namespace evtkit
