#include "evtkit/graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "evtkit/detail/tarjan.hpp"

namespace evtkit {

template <Value V>
SccDecomposition::SccDecomposition(const MarkovChain<V>& chain) {
    const std::size_t n = chain.size();
    const auto& p = chain.transitions();
    members_ = detail::strongly_connected_components(n, [&](std::size_t v, auto&& emit) {
        for (const auto& e : p.row(v)) emit(e.column);
    });
    const std::size_t k = members_.size();
    scc_of_.assign(n, 0);
    local_index_.assign(n, 0);
    for (SccId c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < members_[c].size(); ++i) {
            scc_of_[members_[c][i]] = c;
            local_index_[members_[c][i]] = i;
        }
    }

    is_bottom_.assign(k, true);
    incoming_.assign(k, 0);
    for (StateId s = 0; s < n; ++s) {
        for (const auto& e : p.row(s)) {
            if (scc_of_[e.column] != scc_of_[s]) {
                is_bottom_[scc_of_[s]] = false;
                ++incoming_[scc_of_[e.column]];
            }
        }
    }

    topo_order_.resize(k);
    for (SccId c = 0; c < k; ++c) topo_order_[c] = c;
    for (SccId c : topo_order_) {
        if (!is_bottom_[c]) transient_order_.push_back(c);
    }

    // Longest chain of non-bottom SCCs, counted in edges. Predecessors precede c in topo order.
    depth_.assign(k, 0);
    for (SccId c : transient_order_) {
        for (StateId s : members_[c]) {
            for (const auto& e : p.row(s)) {
                SccId d = scc_of_[e.column];
                if (d != c && !is_bottom_[d]) depth_[d] = std::max(depth_[d], depth_[c] + 1);
            }
        }
    }
    for (SccId c : transient_order_) {
        longest_chain_ = std::max(longest_chain_, depth_[c]);
        max_incoming_ = std::max(max_incoming_, incoming_[c]);
        if (levels_.size() <= depth_[c]) levels_.resize(depth_[c] + 1);
        levels_[depth_[c]].push_back(c);
    }

    reachable_.assign(n, false);
    std::deque<StateId> queue;
    for (StateId s = 0; s < n; ++s) {
        if (!NumberTraits<V>::is_zero(chain.initial()[s])) {
            reachable_[s] = true;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        for (const auto& e : p.row(s)) {
            if (!reachable_[e.column]) {
                reachable_[e.column] = true;
                queue.push_back(e.column);
            }
        }
    }
}

std::vector<SccId> SccDecomposition::bottom_sccs() const {
    std::vector<SccId> out;
    for (SccId c = 0; c < scc_count(); ++c) {
        if (is_bottom_[c]) out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [&](SccId a, SccId b) { return members_[a].front() < members_[b].front(); });
    return out;
}

template <Value V>
TransientPartition<V> transient_submatrix(const MarkovChain<V>& chain, const SccDecomposition& scc) {
    TransientPartition<V> part;
    const std::size_t n = chain.size();
    part.local.assign(n, 0);
    for (StateId s = 0; s < n; ++s) {
        auto& group = scc.is_transient(s) ? part.transient : part.recurrent;
        part.local[s] = group.size();
        group.push_back(s);
    }
    std::vector<std::tuple<std::size_t, std::size_t, V>> q, r;
    for (StateId s : part.transient) {
        for (const auto& e : chain.transitions().row(s)) {
            auto& target = scc.is_transient(e.column) ? q : r;
            target.emplace_back(part.local[s], part.local[e.column], e.value);
        }
        part.tau.push_back(chain.initial()[s]);
    }
    part.q = SparseMatrix<V>::from_triplets(part.transient.size(), part.transient.size(), std::move(q));
    part.r = SparseMatrix<V>::from_triplets(part.transient.size(), part.recurrent.size(), std::move(r));
    return part;
}

template <Value V>
SccRestriction<V> build_restriction(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId c,
                                    std::span<const V> x, const SparseMatrix<V>* incoming) {
    if (scc.is_bottom(c)) throw std::invalid_argument("build_restriction: SCC is bottom");
    if (x.size() != chain.size()) throw std::invalid_argument("build_restriction: parameter vector has wrong length");
    SparseMatrix<V> own;
    if (incoming == nullptr) {
        own = chain.transitions().transposed();
        incoming = &own;
    }
    SccRestriction<V> res;
    res.scc = c;
    res.states = scc.members(c);
    const std::size_t k = res.states.size();
    std::vector<std::tuple<std::size_t, std::size_t, V>> local;
    res.exit_mass.assign(k, NumberTraits<V>::zero());
    res.initial_values.assign(k, NumberTraits<V>::zero());
    res.mass = NumberTraits<V>::zero();
    for (std::size_t i = 0; i < k; ++i) {
        StateId s = res.states[i];
        for (const auto& e : chain.transitions().row(s)) {
            if (scc.scc_of(e.column) == c) {
                local.emplace_back(i, scc.local_index(e.column), e.value);
            } else {
                res.exit_mass[i] += e.value;
            }
        }
        V value = chain.initial()[s];
        for (const auto& e : incoming->row(s)) {
            if (scc.scc_of(e.column) == c) continue;
            if (x[e.column] < 0) throw std::invalid_argument("build_restriction: negative parameter value");
            value += e.value * x[e.column];
        }
        res.mass += value;
        res.initial_values[i] = std::move(value);
    }
    res.transitions = SparseMatrix<V>::from_triplets(k, k, std::move(local));
    return res;
}

template <Value V>
std::vector<V> escape_lower_bound(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId c) {
    if (scc.is_bottom(c)) throw std::invalid_argument("escape_lower_bound: SCC is bottom");
    const auto& states = scc.members(c);
    const std::size_t k = states.size();
    const auto& p = chain.transitions();
    if (k == 1 && NumberTraits<V>::is_zero(p.at(states[0], states[0]))) return {NumberTraits<V>::one()};

    constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
    std::vector<V> q(k, NumberTraits<V>::zero());
    std::vector<std::size_t> level(k, kUnset);
    std::vector<std::vector<std::size_t>> predecessors(k);
    std::vector<std::size_t> frontier;
    for (std::size_t i = 0; i < k; ++i) {
        bool exits = false;
        for (const auto& e : p.row(states[i])) {
            if (scc.scc_of(e.column) == c) {
                predecessors[scc.local_index(e.column)].push_back(i);
            } else if (!exits || q[i] < e.value) {
                q[i] = e.value;
                exits = true;
            }
        }
        if (exits) {
            level[i] = 0;
            frontier.push_back(i);
        }
    }
    if (frontier.empty()) throw std::logic_error("escape_lower_bound: non-bottom SCC without exit edge");

    for (std::size_t d = 0; !frontier.empty(); ++d) {
        std::vector<std::size_t> next;
        for (std::size_t u : frontier) {
            for (std::size_t v : predecessors[u]) {
                if (level[v] == kUnset) {
                    level[v] = d + 1;
                    next.push_back(v);
                }
            }
        }
        for (std::size_t v : next) {
            for (const auto& e : p.row(states[v])) {
                if (scc.scc_of(e.column) != c) continue;
                std::size_t t = scc.local_index(e.column);
                if (level[t] != d) continue;
                V candidate = e.value * q[t];
                if (q[v] < candidate) q[v] = std::move(candidate);
            }
        }
        frontier = std::move(next);
    }
    return q;
}

template <Value V>
Bounds<V> initial_ii_bounds(std::span<const V> escape, const V& mass) {
    Bounds<V> b;
    b.lower.assign(escape.size(), NumberTraits<V>::zero());
    b.upper.reserve(escape.size());
    for (const auto& q : escape) {
        if (!(q > 0)) throw std::invalid_argument("initial_ii_bounds: escape bound must be positive");
        b.upper.push_back(mass / q);
    }
    return b;
}

#define EVTKIT_INSTANTIATE(V)                                                                                   \
    template SccDecomposition::SccDecomposition(const MarkovChain<V>&);                                        \
    template TransientPartition<V> transient_submatrix<V>(const MarkovChain<V>&, const SccDecomposition&);     \
    template SccRestriction<V> build_restriction<V>(const MarkovChain<V>&, const SccDecomposition&, SccId,     \
                                                    std::span<const V>, const SparseMatrix<V>*);               \
    template std::vector<V> escape_lower_bound<V>(const MarkovChain<V>&, const SccDecomposition&, SccId);      \
    template Bounds<V> initial_ii_bounds<V>(std::span<const V>, const V&);

EVTKIT_INSTANTIATE(double)
EVTKIT_INSTANTIATE(Rational)

#undef EVTKIT_INSTANTIATE

}  // namespace evtkit
