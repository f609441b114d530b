#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evtkit/bounds.hpp"
#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/sparse_matrix.hpp"

namespace evtkit {

using SccId = std::size_t;

/// Strongly connected components of a chain's transition graph plus the graph statistics
/// the error budgets need. Immutable after construction.
class SccDecomposition {
public:
    template <Value V>
    explicit SccDecomposition(const MarkovChain<V>& chain);

    std::size_t scc_count() const { return members_.size(); }
    SccId scc_of(StateId s) const { return scc_of_[s]; }
    /// Position of s within members(scc_of(s)).
    std::size_t local_index(StateId s) const { return local_index_[s]; }
    /// Members of an SCC in ascending state order.
    const std::vector<StateId>& members(SccId c) const { return members_[c]; }
    bool is_bottom(SccId c) const { return is_bottom_[c]; }
    bool is_transient(StateId s) const { return !is_bottom_[scc_of_[s]]; }
    bool is_reachable(StateId s) const { return reachable_[s]; }
    bool is_reachable_scc(SccId c) const { return reachable_[members_[c].front()]; }

    /// All SCC ids such that C_i -> C_j implies i appears before j.
    const std::vector<SccId>& topo_order() const { return topo_order_; }
    /// Non-bottom SCC ids in topological order.
    const std::vector<SccId>& transient_order() const { return transient_order_; }
    std::vector<SccId> bottom_sccs() const;

    /// Length of the longest chain of non-bottom SCCs ending in c (0 for bottom SCCs).
    std::size_t depth(SccId c) const { return depth_[c]; }
    /// Longest chain length over non-bottom SCCs.
    std::size_t longest_chain() const { return longest_chain_; }
    /// Number of transitions (s,t), s outside c, t in c.
    std::size_t incoming_transitions(SccId c) const { return incoming_[c]; }
    /// Maximum of incoming_transitions over non-bottom SCCs.
    std::size_t max_incoming() const { return max_incoming_; }

    /// Non-bottom SCCs grouped by depth; SCCs within a level are pairwise incomparable.
    const std::vector<std::vector<SccId>>& levels() const { return levels_; }

private:
    std::vector<SccId> scc_of_;
    std::vector<std::size_t> local_index_;
    std::vector<std::vector<StateId>> members_;
    std::vector<bool> is_bottom_;
    std::vector<bool> reachable_;
    std::vector<SccId> topo_order_;
    std::vector<SccId> transient_order_;
    std::vector<std::size_t> depth_;
    std::vector<std::size_t> incoming_;
    std::vector<std::vector<SccId>> levels_;
    std::size_t longest_chain_ = 0;
    std::size_t max_incoming_ = 0;
};

/// The chain restricted to one non-bottom SCC, with inflow from earlier SCCs folded into
/// non-negative initial values (their sum may exceed 1). Local index i is members(scc)[i].
template <Value V>
struct SccRestriction {
    SccId scc = 0;
    std::vector<StateId> states;
    SparseMatrix<V> transitions;   // local x local; the remaining row mass leaves the SCC
    std::vector<V> exit_mass;      // per local state, probability of leaving the SCC in one step
    std::vector<V> initial_values;
    V mass;
};

/// Initial values iota(s) + sum over s' outside C of P(s',s) * x(s'). x is indexed by state
/// and must be non-negative on every predecessor of C. `incoming` is the transposed transition
/// matrix (computed on demand when null). Throws std::invalid_argument on a bottom SCC or a
/// negative parameter.
template <Value V>
SccRestriction<V> build_restriction(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId c,
                                    std::span<const V> x, const SparseMatrix<V>* incoming = nullptr);

/// Per local state, a value q(s) in (0, 1] with q(s) <= probability of never returning to s.
///
/// A singleton without self-loop never returns, so q = 1. Otherwise a backward BFS inside C
/// from the states with an exit edge assigns each state a shortest path to an exit; q(s) is
/// the product of the probabilities along that path including the exit edge. At exit states
/// the largest single exit edge is taken; among successors in the previous BFS layer the one
/// maximizing P(s,t) * q(t) is taken. Leaving C forbids returning to it, and the path is
/// simple, so following it is a never-return event.
template <Value V>
std::vector<V> escape_lower_bound(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId c);

/// l0 = 0 and u0(s) = mass / q(s), which bounds the EVT of s from above because the EVT
/// equals Pr(reach s) / (1 - Pr_s(return to s)) and Pr(reach s) <= mass.
template <Value V>
Bounds<V> initial_ii_bounds(std::span<const V> escape, const V& mass);

}  // namespace evtkit
