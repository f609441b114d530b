#include "evtkit/stationary.hpp"

#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include "evtkit/errors.hpp"

namespace evtkit {

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::kClassic: return "classic";
        case Strategy::kEvtReach: return "evt-reach";
        case Strategy::kEvtFull: return "evt-full";
    }
    return "?";
}

Strategy parse_strategy(std::string_view text) {
    for (Strategy s : {Strategy::kClassic, Strategy::kEvtReach, Strategy::kEvtFull}) {
        if (to_string(s) == text) return s;
    }
    throw ConfigError("unknown strategy '" + std::string(text) + "' (expected classic, evt-reach or evt-full)");
}

namespace {

template <Value V>
bool exact_method(Method method) {
    return method == Method::kLuExact || (method == Method::kLu && kIsRational<V>);
}

template <Value V>
void check_epsilon(Method method, const V& eps) {
    if constexpr (!kIsRational<V>) {
        if (method == Method::kLuExact) throw ConfigError("lu-exact requires the rational backend");
    }
    if (eps < 0) throw ConfigError("epsilon must be non-negative");
    if (exact_method<V>(method)) return;
    if (NumberTraits<V>::is_zero(eps)) throw ConfigError("\xce\xb5=0 requires an exact method");
    if (!(eps < 1)) throw ConfigError("relative precision for stationary analysis requires epsilon < 1");
}

// Combined relative error of a product whose factors carry relative errors a and b.
template <Value V>
V compose(const V& a, const V& b) {
    return a + b + a * b;
}

}  // namespace

template <Value V>
std::vector<V> bscc_reach_probabilities(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                        const std::vector<SccId>& bsccs, std::span<const Extended<V>> evts) {
    if (evts.size() != chain.size()) throw std::invalid_argument("bscc_reach_probabilities: EVT vector has wrong length");
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> slot(scc.scc_count(), kNone);
    for (std::size_t i = 0; i < bsccs.size(); ++i) {
        if (!scc.is_bottom(bsccs[i])) throw std::invalid_argument("bscc_reach_probabilities: SCC is not bottom");
        slot[bsccs[i]] = i;
    }
    std::vector<V> reach(bsccs.size(), NumberTraits<V>::zero());
    for (StateId s = 0; s < chain.size(); ++s) {
        if (!scc.is_transient(s)) {
            if (slot[scc.scc_of(s)] != kNone) reach[slot[scc.scc_of(s)]] += chain.initial()[s];
            continue;
        }
        if (evts[s].is_infinite()) throw std::invalid_argument("bscc_reach_probabilities: missing EVT for " + chain.name(s));
        if (NumberTraits<V>::is_zero(evts[s].value())) continue;
        for (const auto& e : chain.transitions().row(s)) {
            std::size_t k = slot[scc.scc_of(e.column)];
            if (k != kNone && !scc.is_transient(e.column)) reach[k] += e.value * evts[s].value();
        }
    }
    return reach;
}

template <Value V>
MarkovChain<V> bscc_chain(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId c) {
    if (!scc.is_bottom(c)) throw std::invalid_argument("bscc_chain: SCC is not bottom");
    const auto& members = scc.members(c);
    std::vector<std::string> names;
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    for (std::size_t i = 0; i < members.size(); ++i) {
        names.push_back(chain.name(members[i]));
        for (const auto& e : chain.transitions().row(members[i])) {
            triplets.emplace_back(i, scc.local_index(e.column), e.value);
        }
    }
    std::vector<V> initial(members.size(), NumberTraits<V>::zero());
    initial[0] = NumberTraits<V>::one();
    return MarkovChain<V>(std::move(names), SparseMatrix<V>::from_triplets(members.size(), members.size(),
                                                                          std::move(triplets)),
                          std::move(initial));
}

template <Value V>
StateId choose_anchor(const MarkovChain<V>& irreducible) {
    std::vector<std::size_t> in_degree(irreducible.size(), 0);
    for (StateId s = 0; s < irreducible.size(); ++s) {
        for (const auto& e : irreducible.transitions().row(s)) {
            if (e.column != s) ++in_degree[e.column];
        }
    }
    StateId best = 0;
    for (StateId s = 1; s < irreducible.size(); ++s) {
        if (in_degree[s] > in_degree[best]) best = s;
    }
    return best;
}

template <Value V>
MarkovChain<V> redirect(const MarkovChain<V>& irreducible, StateId v) {
    const std::size_t n = irreducible.size();
    if (v >= n) throw std::invalid_argument("redirect: anchor out of range");
    if (SccDecomposition(irreducible).scc_count() != 1) throw std::invalid_argument("redirect: chain is not irreducible");
    std::vector<std::string> names = irreducible.names();
    std::string copy = names[v] + "^";
    while (irreducible.find_state(copy)) copy += "^";
    names.push_back(copy);
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    for (StateId s = 0; s < n; ++s) {
        for (const auto& e : irreducible.transitions().row(s)) {
            triplets.emplace_back(s, e.column == v ? n : e.column, e.value);
        }
    }
    triplets.emplace_back(n, n, NumberTraits<V>::one());
    std::vector<V> initial(n + 1, NumberTraits<V>::zero());
    initial[v] = NumberTraits<V>::one();
    return MarkovChain<V>(std::move(names), SparseMatrix<V>::from_triplets(n + 1, n + 1, std::move(triplets)),
                          std::move(initial));
}

template <Value V>
IrreducibleStationary<V> stationary_irreducible(const MarkovChain<V>& irreducible, Method method, const V& epsilon,
                                                std::optional<StateId> anchor, const IterationOptions& options) {
    check_epsilon(method, epsilon);
    IrreducibleStationary<V> out;
    out.anchor = anchor.value_or(choose_anchor(irreducible));
    const std::size_t n = irreducible.size();
    MarkovChain<V> redirected = redirect(irreducible, out.anchor);
    EvtRequest<V> request;
    request.method = method;
    request.criterion = Criterion::kRelative;
    request.epsilon = epsilon;
    request.iteration = options;
    AnalysisResult<V> evts = compute_evts(redirected, request);
    V total = NumberTraits<V>::zero();
    for (StateId s = 0; s < n; ++s) {
        out.redirected_evts.push_back(evts.values[s].value());
        total += evts.values[s].value();
    }
    for (StateId s = 0; s < n; ++s) out.distribution.push_back(out.redirected_evts[s] / total);
    out.iterations = evts.iterations;
    if (evts.certified_bound) {
        const V& e = *evts.certified_bound;
        out.certified_rel_error = NumberTraits<V>::is_zero(e) ? e : V(2 * e / (1 - e));
    }
    return out;
}

template <Value V>
std::vector<V> stationary_classic_bscc(const MarkovChain<V>& irreducible) {
    const std::size_t n = irreducible.size();
    if (n == 1) return {NumberTraits<V>::one()};
    // Rows 0..n-2: (P^T - I) pi = 0; row n-1: sum pi = 1.
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    std::map<std::pair<std::size_t, std::size_t>, V> entries;
    for (StateId s = 0; s < n; ++s) {
        for (const auto& e : irreducible.transitions().row(s)) {
            if (e.column + 1 < n) entries[{e.column, s}] += e.value;
        }
    }
    for (StateId s = 0; s + 1 < n; ++s) entries[{s, s}] -= NumberTraits<V>::one();
    for (auto& [key, value] : entries) triplets.emplace_back(key.first, key.second, std::move(value));
    for (StateId s = 0; s < n; ++s) triplets.emplace_back(n - 1, s, NumberTraits<V>::one());
    std::vector<V> rhs(n, NumberTraits<V>::zero());
    rhs[n - 1] = NumberTraits<V>::one();
    return solve_linear<V>(SparseMatrix<V>::from_triplets(n, n, std::move(triplets)), std::move(rhs));
}

template <Value V>
ClassicReach<V> classic_reach_probability(const MarkovChain<V>& chain, const SccDecomposition& scc, SccId bottom,
                                          Method method, const V& epsilon, const IterationOptions& options) {
    if (!scc.is_bottom(bottom)) throw std::invalid_argument("classic_reach_probability: SCC is not bottom");
    const std::size_t n = chain.size();
    ClassicReach<V> out{NumberTraits<V>::zero(), 0};
    for (StateId s : scc.members(bottom)) out.probability += chain.initial()[s];

    // Reachable transient states with a path into the target; everything else has probability 0.
    const SparseMatrix<V> incoming = chain.transitions().transposed();
    std::vector<bool> relevant(n, false);
    std::deque<StateId> queue(scc.members(bottom).begin(), scc.members(bottom).end());
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        for (const auto& e : incoming.row(s)) {
            StateId t = e.column;
            if (!relevant[t] && scc.is_transient(t) && scc.is_reachable(t)) {
                relevant[t] = true;
                queue.push_back(t);
            }
        }
    }
    std::vector<StateId> states;
    constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> position(n, kAbsent);
    for (StateId s = 0; s < n; ++s) {
        if (relevant[s]) {
            position[s] = states.size();
            states.push_back(s);
        }
    }
    if (states.empty()) return out;
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    std::vector<V> offset(states.size(), NumberTraits<V>::zero());
    for (std::size_t i = 0; i < states.size(); ++i) {
        for (const auto& e : chain.transitions().row(states[i])) {
            if (position[e.column] != kAbsent) {
                triplets.emplace_back(i, position[e.column], e.value);
            } else if (scc.scc_of(e.column) == bottom) {
                offset[i] += e.value;
            }
        }
    }
    EvtSystem<V> sys{SparseMatrix<V>::from_triplets(states.size(), states.size(), std::move(triplets)),
                     std::move(offset)};
    Bounds<V> initial{std::vector<V>(states.size(), NumberTraits<V>::zero()),
                      std::vector<V>(states.size(), NumberTraits<V>::one())};
    SystemSolution<V> sol = solve_system<V>(sys, method, Criterion::kRelative, epsilon, &initial, options);
    for (std::size_t i = 0; i < states.size(); ++i) out.probability += chain.initial()[states[i]] * sol.values[i];
    out.iterations = sol.iterations;
    return out;
}

template <Value V>
StationaryResult<V> stationary_distribution(const MarkovChain<V>& chain, const StationaryRequest<V>& request) {
    if (chain.is_continuous_time()) {
        throw ConfigError("stationary analysis is implemented for discrete-time chains");
    }
    check_epsilon(request.method, request.epsilon);
    const SccDecomposition scc(chain);
    StationaryResult<V> out;
    out.strategy = request.strategy;
    out.method = request.method;
    out.epsilon = request.epsilon;
    out.values.assign(chain.size(), NumberTraits<V>::zero());
    out.bsccs = scc.bottom_sccs();

    const bool exact = exact_method<V>(request.method);
    const bool full = request.strategy == Strategy::kEvtFull;
    // evt-full splits the budget between reachability and the inner solve; the other strategies
    // solve the inner problem directly and give the whole budget to reachability.
    V eps_reach = request.epsilon;
    V eps_inner = request.epsilon;
    if (full && !exact) {
        eps_reach = relative_budget_root<V>(request.epsilon, 2);
        eps_inner = eps_reach / (2 + eps_reach);
    }

    std::optional<V> reach_error;
    if (request.strategy == Strategy::kClassic) {
        for (SccId b : out.bsccs) {
            ClassicReach<V> r = classic_reach_probability(chain, scc, b, request.method, eps_reach, request.iteration);
            out.bscc_reach.push_back(std::move(r.probability));
            out.iterations += r.iterations;
        }
        if (exact) {
            reach_error = NumberTraits<V>::zero();
        } else if (is_certifying(request.method, kIsRational<V>)) {
            reach_error = eps_reach;
        }
    } else {
        EvtRequest<V> evt_request;
        evt_request.method = request.method;
        evt_request.criterion = Criterion::kRelative;
        evt_request.epsilon = eps_reach;
        evt_request.iteration = request.iteration;
        AnalysisResult<V> evts = compute_evts(chain, scc, evt_request);
        out.bscc_reach = bscc_reach_probabilities<V>(chain, scc, out.bsccs, evts.values);
        out.iterations += evts.iterations;
        reach_error = evts.certified_bound;
    }

    bool inner_certified = true;
    V inner_error = NumberTraits<V>::zero();
    for (std::size_t i = 0; i < out.bsccs.size(); ++i) {
        if (NumberTraits<V>::is_zero(out.bscc_reach[i])) continue;
        const auto& members = scc.members(out.bsccs[i]);
        std::vector<V> d;
        if (members.size() == 1) {
            d = {NumberTraits<V>::one()};
        } else if (full) {
            IrreducibleStationary<V> r = stationary_irreducible(bscc_chain(chain, scc, out.bsccs[i]), request.method,
                                                                eps_inner, std::nullopt, request.iteration);
            d = std::move(r.distribution);
            out.iterations += r.iterations;
            if (!r.certified_rel_error) {
                inner_certified = false;
            } else if (inner_error < *r.certified_rel_error) {
                inner_error = *r.certified_rel_error;
            }
        } else {
            d = stationary_classic_bscc(bscc_chain(chain, scc, out.bsccs[i]));
            if constexpr (!kIsRational<V>) inner_certified = false;
        }
        for (std::size_t k = 0; k < members.size(); ++k) out.values[members[k]] = out.bscc_reach[i] * d[k];
    }
    if (reach_error && inner_certified) out.certified_rel_error = compose(*reach_error, inner_error);
    return out;
}

#define EVTKIT_INSTANTIATE(V)                                                                                      \
    template std::vector<V> bscc_reach_probabilities<V>(const MarkovChain<V>&, const SccDecomposition&,          \
                                                        const std::vector<SccId>&, std::span<const Extended<V>>); \
    template MarkovChain<V> bscc_chain<V>(const MarkovChain<V>&, const SccDecomposition&, SccId);                \
    template StateId choose_anchor<V>(const MarkovChain<V>&);                                                    \
    template MarkovChain<V> redirect<V>(const MarkovChain<V>&, StateId);                                         \
    template IrreducibleStationary<V> stationary_irreducible<V>(const MarkovChain<V>&, Method, const V&,         \
                                                                std::optional<StateId>, const IterationOptions&); \
    template std::vector<V> stationary_classic_bscc<V>(const MarkovChain<V>&);                                   \
    template ClassicReach<V> classic_reach_probability<V>(const MarkovChain<V>&, const SccDecomposition&, SccId, \
                                                          Method, const V&, const IterationOptions&);            \
    template StationaryResult<V> stationary_distribution<V>(const MarkovChain<V>&, const StationaryRequest<V>&);

EVTKIT_INSTANTIATE(double)
EVTKIT_INSTANTIATE(Rational)

#undef EVTKIT_INSTANTIATE

}  // namespace evtkit
