#include "evtkit/evt.hpp"

#include <algorithm>
#include <exception>
#include <numeric>

#include "evtkit/errors.hpp"
#include "evtkit/kernels.hpp"

namespace evtkit {

namespace {

template <Value V>
bool exact_method(Method method) {
    return method == Method::kLuExact || (method == Method::kLu && kIsRational<V>);
}

template <Value V>
AnalysisResult<V> skeleton(const MarkovChain<V>& chain, const SccDecomposition& scc, const EvtRequest<V>& request) {
    AnalysisResult<V> r;
    r.method = request.method;
    r.criterion = request.criterion;
    r.epsilon = request.epsilon;
    r.topological = request.topological;
    r.values.resize(chain.size());
    for (StateId s = 0; s < chain.size(); ++s) {
        if (scc.is_reachable(s) && !scc.is_transient(s)) r.values[s] = Extended<V>::infinity();
    }
    return r;
}

// Solves one non-trivial SCC restriction; returns the local solution.
template <Value V>
SystemSolution<V> solve_restriction(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                    const SccRestriction<V>& restriction, Method method, Criterion criterion,
                                    const V& eps, const EvtRequest<V>& request) {
    EvtSystem<V> sys{restriction.transitions.transposed(), restriction.initial_values};
    std::vector<V> escape = escape_lower_bound(chain, scc, restriction.scc);
    Bounds<V> initial = initial_ii_bounds<V>(escape, restriction.mass);
    SweepOrder order = request.topological_sweep ? topological_sweep_order(sys) : SweepOrder{};
    return solve_system<V>(sys, method, criterion, eps, &initial, request.iteration, order);
}

// Shared SCC-by-SCC driver: SCCs of one depth level are independent and run concurrently.
template <Value V>
std::size_t run_topological(const MarkovChain<V>& chain, const SccDecomposition& scc, const EvtRequest<V>& request,
                            Criterion inner_criterion, const V& inner_eps, std::vector<V>& x) {
    const SparseMatrix<V> incoming = chain.transitions().transposed();
    std::size_t iterations = 0;
    for (const auto& level : scc.levels()) {
        const auto count = static_cast<std::ptrdiff_t>(level.size());
        std::vector<std::exception_ptr> errors(level.size());
        std::vector<std::size_t> level_iterations(level.size(), 0);
        const int threads = count > 1 ? kernels::parallel::max_threads() : 1;
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads) if (threads > 1)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const SccId c = level[static_cast<std::size_t>(i)];
            if (!scc.is_reachable_scc(c)) continue;
            try {
                SccRestriction<V> res = build_restriction<V>(chain, scc, c, x, &incoming);
                const bool trivial =
                    res.states.size() == 1 && NumberTraits<V>::is_zero(chain.transitions().at(res.states[0], res.states[0]));
                if (trivial) {
                    x[res.states[0]] = res.initial_values[0];
                    continue;
                }
                SystemSolution<V> sol =
                    solve_restriction(chain, scc, res, request.method, inner_criterion, inner_eps, request);
                for (std::size_t k = 0; k < res.states.size(); ++k) x[res.states[k]] = std::move(sol.values[k]);
                level_iterations[static_cast<std::size_t>(i)] = sol.iterations;
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        iterations += std::accumulate(level_iterations.begin(), level_iterations.end(), std::size_t{0});
    }
    return iterations;
}

template <Value V>
AnalysisResult<V> finish_topological(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                     const EvtRequest<V>& request, Criterion inner_criterion, const V& inner_eps) {
    AnalysisResult<V> result = skeleton(chain, scc, request);
    std::vector<V> x(chain.size(), NumberTraits<V>::zero());
    result.iterations = run_topological(chain, scc, request, inner_criterion, inner_eps, x);
    for (StateId s = 0; s < chain.size(); ++s) {
        if (scc.is_transient(s)) result.values[s] = Extended<V>(x[s]);
    }
    result.inner_epsilon = inner_eps;
    if (exact_method<V>(request.method)) {
        result.certified_bound = NumberTraits<V>::zero();
    } else if (is_certifying(request.method, kIsRational<V>)) {
        result.certified_bound = request.epsilon;
    }
    return result;
}

template <Value V>
AnalysisResult<V> compute_dtmc(const MarkovChain<V>& chain, const SccDecomposition& scc, const EvtRequest<V>& request) {
    if (request.topological) {
        return request.criterion == Criterion::kRelative ? topological_evts_relative(chain, scc, request)
                                                         : topological_evts_absolute(chain, scc, request);
    }
    AnalysisResult<V> result = skeleton(chain, scc, request);
    ChainSystem<V> cs = whole_chain_system(chain, scc);
    const SweepOrder& order = request.topological_sweep ? cs.topological_order : SweepOrder{};
    SystemSolution<V> sol = solve_system<V>(cs.system, request.method, request.criterion, request.epsilon,
                                            &cs.initial_bounds, request.iteration, order);
    for (std::size_t i = 0; i < cs.states.size(); ++i) result.values[cs.states[i]] = Extended<V>(sol.values[i]);
    if (sol.bounds) {
        Bounds<V> full{std::vector<V>(chain.size(), NumberTraits<V>::zero()),
                       std::vector<V>(chain.size(), NumberTraits<V>::zero())};
        for (std::size_t i = 0; i < cs.states.size(); ++i) {
            full.lower[cs.states[i]] = sol.bounds->lower[i];
            full.upper[cs.states[i]] = sol.bounds->upper[i];
        }
        result.bounds = std::move(full);
    }
    result.certified_bound = sol.certified_bound;
    result.iterations = sol.iterations;
    return result;
}

}  // namespace

template <Value V>
void validate_request(const EvtRequest<V>& request) {
    if constexpr (!kIsRational<V>) {
        if (request.method == Method::kLuExact) throw ConfigError("lu-exact requires the rational backend");
    }
    if (request.epsilon < 0) throw ConfigError("epsilon must be non-negative");
    if (NumberTraits<V>::is_zero(request.epsilon) && !exact_method<V>(request.method)) {
        throw ConfigError("\xce\xb5=0 requires an exact method");
    }
    if (request.topological && request.criterion == Criterion::kRelative && !(request.epsilon < 1)) {
        throw ConfigError("topological relative precision requires epsilon < 1");
    }
}

template <Value V>
ChainSystem<V> whole_chain_system(const MarkovChain<V>& chain, const SccDecomposition& scc) {
    ChainSystem<V> cs;
    for (StateId s = 0; s < chain.size(); ++s) {
        if (scc.is_transient(s) && scc.is_reachable(s)) cs.states.push_back(s);
    }
    std::vector<V> offset;
    offset.reserve(cs.states.size());
    for (StateId s : cs.states) offset.push_back(chain.initial()[s]);
    cs.system = make_evt_system<V>(chain, cs.states, std::move(offset));

    std::vector<V> escape(cs.states.size(), NumberTraits<V>::one());
    std::vector<std::size_t> position(chain.size(), 0);
    for (std::size_t i = 0; i < cs.states.size(); ++i) position[cs.states[i]] = i;
    for (SccId c : scc.transient_order()) {
        if (!scc.is_reachable_scc(c)) continue;
        std::vector<V> q = escape_lower_bound(chain, scc, c);
        const auto& members = scc.members(c);
        for (std::size_t k = 0; k < members.size(); ++k) escape[position[members[k]]] = std::move(q[k]);
    }
    cs.initial_bounds = initial_ii_bounds<V>(escape, NumberTraits<V>::one());

    cs.topological_order.resize(cs.states.size());
    std::iota(cs.topological_order.begin(), cs.topological_order.end(), std::size_t{0});
    std::stable_sort(cs.topological_order.begin(), cs.topological_order.end(), [&](std::size_t a, std::size_t b) {
        return scc.scc_of(cs.states[a]) < scc.scc_of(cs.states[b]);
    });
    return cs;
}

template <Value V>
V global_escape_bound(const MarkovChain<V>& chain, const SccDecomposition& scc) {
    V q = NumberTraits<V>::one();
    for (SccId c : scc.transient_order()) {
        if (!scc.is_reachable_scc(c)) continue;
        for (const V& v : escape_lower_bound(chain, scc, c)) {
            if (v < q) q = v;
        }
    }
    return q;
}

template <Value V>
V absolute_sigma(const V& eps, const V& q, std::size_t t, std::size_t l, AbsoluteBudget budget) {
    const V tv = NumberTraits<V>::from_int(static_cast<long>(t));
    if (budget == AbsoluteBudget::kLinear) {
        V sum = NumberTraits<V>::zero();
        V power = NumberTraits<V>::one();
        for (std::size_t i = 1; i <= l; ++i) {
            power *= tv;
            sum += power;
        }
        return eps / (1 + sum / q);
    }
    const V ratio = tv / q;
    V sum = NumberTraits<V>::one();
    V power = NumberTraits<V>::one();
    for (std::size_t i = 1; i <= l; ++i) {
        power *= ratio;
        sum += power;
    }
    return eps / sum;
}

template <Value V>
AnalysisResult<V> topological_evts_relative(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                            const EvtRequest<V>& request) {
    EvtRequest<V> req = request;
    req.topological = true;
    req.criterion = Criterion::kRelative;
    validate_request(req);
    if (chain.is_continuous_time()) throw ConfigError("topological drivers take the embedded DTMC");
    const auto k = static_cast<unsigned>(scc.longest_chain() + 1);
    V delta = relative_budget_root<V>(req.epsilon, k);
    if (NumberTraits<V>::is_zero(delta) && !exact_method<V>(req.method)) {
        throw SolverError("per-SCC relative precision underflows to zero; use the rational backend");
    }
    return finish_topological(chain, scc, req, Criterion::kRelative, delta);
}

template <Value V>
AnalysisResult<V> topological_evts_absolute(const MarkovChain<V>& chain, const SccDecomposition& scc,
                                            const EvtRequest<V>& request) {
    EvtRequest<V> req = request;
    req.topological = true;
    req.criterion = Criterion::kAbsolute;
    validate_request(req);
    if (chain.is_continuous_time()) throw ConfigError("topological drivers take the embedded DTMC");
    V sigma = absolute_sigma<V>(req.epsilon, global_escape_bound(chain, scc), scc.max_incoming(), scc.longest_chain(),
                                req.absolute_budget);
    bool usable = sigma > 0;
    if constexpr (!kIsRational<V>) usable = usable && std::isfinite(sigma);
    if (!usable && !exact_method<V>(req.method)) {
        throw SolverError("per-SCC absolute threshold underflows to zero; use the rational backend or relative mode");
    }
    return finish_topological(chain, scc, req, Criterion::kAbsolute, sigma);
}

template <Value V>
AnalysisResult<V> compute_evts(const MarkovChain<V>& chain, const SccDecomposition& scc, const EvtRequest<V>& request) {
    validate_request(request);
    if (!chain.is_continuous_time()) return compute_dtmc(chain, scc, request);

    // Residence time = embedded visits / exit rate. Dividing by E(s) scales an absolute error by
    // 1/E(s), so the embedded run targets eps * min(1, min E).
    const MarkovChain<V> emb = embed(chain);
    const auto& rates = *chain.rates();
    EvtRequest<V> inner = request;
    if (request.criterion == Criterion::kAbsolute) {
        V min_rate = NumberTraits<V>::one();
        for (StateId s = 0; s < chain.size(); ++s) {
            if (scc.is_transient(s) && scc.is_reachable(s) && rates[s] < min_rate) min_rate = rates[s];
        }
        inner.epsilon = request.epsilon * min_rate;
    }
    AnalysisResult<V> result = compute_dtmc(emb, scc, inner);
    for (StateId s = 0; s < chain.size(); ++s) {
        if (result.values[s].is_finite()) result.values[s] = Extended<V>(result.values[s].value() / rates[s]);
    }
    if (result.bounds) {
        for (StateId s = 0; s < chain.size(); ++s) {
            result.bounds->lower[s] /= rates[s];
            result.bounds->upper[s] /= rates[s];
        }
    }
    result.epsilon = request.epsilon;
    if (result.certified_bound && !NumberTraits<V>::is_zero(*result.certified_bound)) {
        result.certified_bound = request.epsilon;
    }
    return result;
}

template <Value V>
AnalysisResult<V> compute_evts(const MarkovChain<V>& chain, const EvtRequest<V>& request) {
    return compute_evts(chain, SccDecomposition(chain), request);
}

#define EVTKIT_INSTANTIATE(V)                                                                                       \
    template void validate_request<V>(const EvtRequest<V>&);                                                      \
    template ChainSystem<V> whole_chain_system<V>(const MarkovChain<V>&, const SccDecomposition&);                \
    template V global_escape_bound<V>(const MarkovChain<V>&, const SccDecomposition&);                            \
    template V absolute_sigma<V>(const V&, const V&, std::size_t, std::size_t, AbsoluteBudget);                   \
    template AnalysisResult<V> topological_evts_relative<V>(const MarkovChain<V>&, const SccDecomposition&,       \
                                                            const EvtRequest<V>&);                                \
    template AnalysisResult<V> topological_evts_absolute<V>(const MarkovChain<V>&, const SccDecomposition&,       \
                                                            const EvtRequest<V>&);                                \
    template AnalysisResult<V> compute_evts<V>(const MarkovChain<V>&, const SccDecomposition&,                    \
                                               const EvtRequest<V>&);                                             \
    template AnalysisResult<V> compute_evts<V>(const MarkovChain<V>&, const EvtRequest<V>&);

EVTKIT_INSTANTIATE(double)
EVTKIT_INSTANTIATE(Rational)

#undef EVTKIT_INSTANTIATE

}  // namespace evtkit
