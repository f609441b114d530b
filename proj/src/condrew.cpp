#include "evtkit/condrew.hpp"

#include <atomic>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "evtkit/errors.hpp"
#include "evtkit/kernels.hpp"

namespace evtkit {

namespace {

std::atomic<std::size_t> g_auxiliary_solves{0};

template <Value V>
struct TargetSums {
    V reach;      // iota(r) + sum_t P(t,r) EVT(t)
    V numerator;  // sum_t P(t,r) y(t)
};

template <Value V>
TargetSums<V> target_sums(const CollapsedChain<V>& collapsed, std::span<const V> evts, std::span<const V> y, StateId r) {
    const auto& chain = collapsed.chain;
    TargetSums<V> sums{chain.initial()[r], NumberTraits<V>::zero()};
    for (StateId t = 0; t < chain.size(); ++t) {
        if (t == r) continue;
        V p = chain.transitions().at(t, r);
        if (NumberTraits<V>::is_zero(p)) continue;
        sums.reach += p * evts[t];
        sums.numerator += p * y[t];
    }
    return sums;
}

template <Value V>
void check_target(const CollapsedChain<V>& collapsed, StateId r) {
    if (r >= collapsed.chain.size()) throw std::invalid_argument("target out of range");
    const auto& row = collapsed.chain.transitions().row(r);
    if (row.size() != 1 || row[0].column != r) {
        throw QueryError("state " + collapsed.chain.name(r) + " is transient; conditioning needs a BSCC target");
    }
}

// One Jacobi or Gauss-Seidel step of the Max (lower) / Min (upper) operators.
template <Value V>
void bracket_step(const EvtSystem<V>& lower_sys, const EvtSystem<V>& upper_sys, Bounds<V>& b, bool gauss_seidel,
                  Bounds<V>& scratch) {
    if (!gauss_seidel) {
        kernels::phi_max<V>(lower_sys, b.lower, scratch.lower);
        kernels::phi_min<V>(upper_sys, b.upper, scratch.upper);
        std::swap(b, scratch);
        return;
    }
    for (std::size_t s = 0; s < b.lower.size(); ++s) {
        V lo = lower_sys.offset[s];
        for (const auto& e : lower_sys.incoming.row(s)) lo += e.value * b.lower[e.column];
        if (b.lower[s] < lo) b.lower[s] = std::move(lo);
        V hi = upper_sys.offset[s];
        for (const auto& e : upper_sys.incoming.row(s)) hi += e.value * b.upper[e.column];
        if (hi < b.upper[s]) b.upper[s] = std::move(hi);
    }
}

}  // namespace

std::size_t auxiliary_solve_count() {
    return g_auxiliary_solves.load();
}

template <Value V>
CollapsedChain<V> collapse_bsccs(const MarkovChain<V>& chain, const std::string& reward_name) {
    std::vector<V> rew = chain.reward(reward_name);
    const MarkovChain<V> base = chain.is_continuous_time() ? embed(chain) : chain;
    if (chain.is_continuous_time()) {
        for (StateId s = 0; s < chain.size(); ++s) rew[s] /= (*chain.rates())[s];
    }
    const SccDecomposition scc(base);
    const std::size_t n = base.size();
    constexpr StateId kUnset = std::numeric_limits<StateId>::max();

    struct {
        std::vector<V> reward;
        std::vector<StateId> image;
        std::vector<std::vector<StateId>> origin;
        std::vector<StateId> targets;
        std::vector<bool> infinite;
    } out;
    out.image.assign(n, kUnset);
    std::vector<StateId> bscc_image(scc.scc_count(), kUnset);
    std::vector<std::string> names;
    for (StateId s = 0; s < n; ++s) {
        if (scc.is_transient(s)) {
            out.image[s] = names.size();
            names.push_back(base.name(s));
            out.origin.push_back({s});
            continue;
        }
        SccId c = scc.scc_of(s);
        if (bscc_image[c] == kUnset) {
            bscc_image[c] = names.size();
            const auto& members = scc.members(c);
            std::string name = base.name(members[0]);
            if (members.size() > 1) {
                name = "{";
                for (std::size_t k = 0; k < members.size(); ++k) name += (k ? "," : "") + base.name(members[k]);
                name += "}";
            }
            names.push_back(std::move(name));
            out.origin.push_back(members);
        }
        out.image[s] = bscc_image[c];
    }

    const std::size_t m = names.size();
    std::map<std::pair<std::size_t, std::size_t>, V> entries;
    std::vector<V> initial(m, NumberTraits<V>::zero());
    out.reward.assign(m, NumberTraits<V>::zero());
    out.infinite.assign(m, false);
    for (StateId c = 0; c < m; ++c) {
        StateId s = out.origin[c][0];
        if (scc.is_transient(s)) {
            for (const auto& e : base.transitions().row(s)) entries[{c, out.image[e.column]}] += e.value;
            out.reward[c] = rew[s];
        } else {
            entries[{c, c}] = NumberTraits<V>::one();
            out.targets.push_back(c);
            for (StateId member : out.origin[c]) {
                if (scc.is_reachable(member) && rew[member] > 0) out.infinite[c] = true;
            }
        }
    }
    for (StateId s = 0; s < n; ++s) initial[out.image[s]] += base.initial()[s];
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    for (auto& [key, value] : entries) triplets.emplace_back(key.first, key.second, std::move(value));
    std::map<std::string, std::vector<V>> rewards{{reward_name, out.reward}};
    MarkovChain<V> collapsed(std::move(names), SparseMatrix<V>::from_triplets(m, m, std::move(triplets)),
                             std::move(initial), std::nullopt, std::move(rewards));
    return CollapsedChain<V>{std::move(collapsed), std::move(out.reward),  std::move(out.image),
                             std::move(out.origin), std::move(out.targets), std::move(out.infinite)};
}

template <Value V>
YSolution<V> solve_y(const CollapsedChain<V>& collapsed, const SccDecomposition& scc, const AnalysisResult<V>& evts,
                     Method method, Criterion criterion, const V& epsilon, const IterationOptions& options) {
    g_auxiliary_solves.fetch_add(1);
    const auto& chain = collapsed.chain;
    const std::size_t n = chain.size();
    YSolution<V> out;
    out.values.assign(n, NumberTraits<V>::zero());
    if (evts.bounds) out.bounds = Bounds<V>{out.values, out.values};

    // y(s) > 0 exactly for the states reachable from a reachable rewarded transient state.
    std::vector<bool> positive(n, false);
    std::deque<StateId> queue;
    for (StateId s = 0; s < n; ++s) {
        if (scc.is_transient(s) && scc.is_reachable(s) && collapsed.reward[s] > 0) {
            positive[s] = true;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        for (const auto& e : chain.transitions().row(s)) {
            if (!positive[e.column] && scc.is_transient(e.column)) {
                positive[e.column] = true;
                queue.push_back(e.column);
            }
        }
    }
    std::vector<StateId> states;
    for (StateId s = 0; s < n; ++s) {
        if (positive[s]) states.push_back(s);
    }
    if (states.empty()) return out;

    auto rhs = [&](auto value_of) {
        std::vector<V> offset;
        for (StateId s : states) offset.push_back(collapsed.reward[s] * value_of(s));
        return make_evt_system<V>(chain, states, std::move(offset));
    };
    const bool interval = method == Method::kIntervalIteration || method == Method::kGaussSeidelIntervalIteration;
    if (!interval) {
        EvtSystem<V> sys = rhs([&](StateId s) { return evts.values[s].value(); });
        SystemSolution<V> sol = solve_system<V>(sys, method, criterion, epsilon, nullptr, options);
        for (std::size_t i = 0; i < states.size(); ++i) out.values[states[i]] = sol.values[i];
        if (out.bounds && sol.bounds) {
            for (std::size_t i = 0; i < states.size(); ++i) {
                out.bounds->lower[states[i]] = sol.bounds->lower[i];
                out.bounds->upper[states[i]] = sol.bounds->upper[i];
            }
        } else {
            out.bounds.reset();
        }
        out.iterations = sol.iterations;
        return out;
    }

    if (!evts.bounds) throw std::logic_error("solve_y: interval methods need EVT bounds");
    // The bracket [y(l), y(u)] contains the exact y; iterate both ends from sound starting
    // points. y(s) <= sum_t rew(t) u(t) / q(s) since no state is visited more than 1/q(s)
    // times in expectation.
    const EvtSystem<V> lower_sys = rhs([&](StateId s) { return evts.bounds->lower[s]; });
    const EvtSystem<V> upper_sys = rhs([&](StateId s) { return evts.bounds->upper[s]; });
    V total = NumberTraits<V>::zero();
    for (std::size_t i = 0; i < states.size(); ++i) total += upper_sys.offset[i];
    std::vector<V> escape(n, NumberTraits<V>::one());
    for (SccId c : scc.transient_order()) {
        if (!scc.is_reachable_scc(c)) continue;
        std::vector<V> q = escape_lower_bound(chain, scc, c);
        for (std::size_t k = 0; k < q.size(); ++k) escape[scc.members(c)[k]] = q[k];
    }
    Bounds<V> b{std::vector<V>(states.size(), NumberTraits<V>::zero()), {}};
    for (StateId s : states) b.upper.push_back(total / escape[s]);
    Bounds<V> scratch = b;
    Bounds<V> previous = b;
    const V target = 2 * epsilon;
    const V stall = epsilon / 1000;
    const bool gauss_seidel = method == Method::kGaussSeidelIntervalIteration;
    for (std::size_t k = 1;; ++k) {
        if (k > options.max_iterations) throw SolverError("auxiliary reward system did not converge");
        bracket_step(lower_sys, upper_sys, b, gauss_seidel, scratch);
        out.iterations = k;
        if (diff<V>(criterion, b.upper, b.lower) <= target) break;
        // The ends converge to y(l) and y(u), which differ when the EVT bracket has width.
        if (diff<V>(criterion, previous.lower, b.lower) <= stall && diff<V>(criterion, previous.upper, b.upper) <= stall) {
            break;
        }
        previous = b;
    }
    for (std::size_t i = 0; i < states.size(); ++i) {
        out.values[states[i]] = (b.lower[i] + b.upper[i]) / 2;
        out.bounds->lower[states[i]] = b.lower[i];
        out.bounds->upper[states[i]] = b.upper[i];
    }
    return out;
}

template <Value V>
Extended<V> conditional_expected_reward(const CollapsedChain<V>& collapsed, std::span<const V> evts,
                                        std::span<const V> y, StateId r) {
    check_target(collapsed, r);
    TargetSums<V> sums = target_sums(collapsed, evts, y, r);
    if (!(sums.reach > 0)) throw QueryError("target " + collapsed.chain.name(r) + " is unreachable");
    if (collapsed.infinite[r]) return Extended<V>::infinity();
    return Extended<V>(sums.numerator / sums.reach);
}

template <Value V>
std::pair<Extended<V>, Extended<V>> conditional_reward_interval(const CollapsedChain<V>& collapsed,
                                                               const Bounds<V>& evts, const Bounds<V>& y, StateId r) {
    check_target(collapsed, r);
    TargetSums<V> low = target_sums<V>(collapsed, evts.upper, y.lower, r);
    TargetSums<V> high = target_sums<V>(collapsed, evts.lower, y.upper, r);
    if (!(low.reach > 0)) throw QueryError("target " + collapsed.chain.name(r) + " is unreachable");
    if (collapsed.infinite[r]) return {Extended<V>::infinity(), Extended<V>::infinity()};
    Extended<V> lower(low.numerator / low.reach);
    Extended<V> upper = high.reach > 0 ? Extended<V>(high.numerator / high.reach) : Extended<V>::infinity();
    return {lower, upper};
}

template <Value V>
CondRewResult<V> conditional_expected_rewards(const MarkovChain<V>& chain, const CondRewRequest<V>& request) {
    CollapsedChain<V> collapsed = collapse_bsccs(chain, request.reward);
    const SccDecomposition scc(collapsed.chain);
    EvtRequest<V> evt_request;
    evt_request.method = request.method;
    evt_request.criterion = request.criterion;
    evt_request.epsilon = request.epsilon;
    evt_request.iteration = request.iteration;
    AnalysisResult<V> evts = compute_evts(collapsed.chain, scc, evt_request);

    std::vector<StateId> targets;
    const bool explicit_targets = !request.targets.empty();
    if (!explicit_targets) {
        targets = collapsed.targets;
    } else {
        for (const auto& name : request.targets) {
            auto s = chain.find_state(name);
            if (!s) throw ModelError("unknown state '" + name + "'");
            StateId r = collapsed.image[*s];
            check_target(collapsed, r);
            if (std::find(targets.begin(), targets.end(), r) == targets.end()) targets.push_back(r);
        }
    }

    const std::size_t before = auxiliary_solve_count();
    YSolution<V> y = solve_y(collapsed, scc, evts, request.method, request.criterion, request.epsilon, request.iteration);

    CondRewResult<V> out;
    out.method = request.method;
    out.criterion = request.criterion;
    out.epsilon = request.epsilon;
    out.iterations = evts.iterations + y.iterations;
    out.auxiliary_solves = auxiliary_solve_count() - before;
    out.certified = evts.bounds.has_value() && y.bounds.has_value();

    std::vector<V> point(collapsed.chain.size(), NumberTraits<V>::zero());
    for (StateId s = 0; s < point.size(); ++s) {
        if (evts.values[s].is_finite()) point[s] = evts.values[s].value();
    }
    for (StateId r : targets) {
        ConditionalReward<V> entry;
        entry.name = collapsed.chain.name(r);
        entry.reach_probability = target_sums<V>(collapsed, point, y.values, r).reach;
        if (!(entry.reach_probability > 0)) {
            if (explicit_targets) throw QueryError("target " + entry.name + " is unreachable");
            out.targets.push_back(std::move(entry));
            continue;
        }
        entry.value = conditional_expected_reward<V>(collapsed, point, y.values, r);
        if (out.certified) {
            auto [lo, hi] = conditional_reward_interval(collapsed, *evts.bounds, *y.bounds, r);
            entry.lower = lo;
            entry.upper = hi;
        }
        out.targets.push_back(std::move(entry));
    }
    return out;
}

#define EVTKIT_INSTANTIATE(V)                                                                                       \
    template CollapsedChain<V> collapse_bsccs<V>(const MarkovChain<V>&, const std::string&);                      \
    template YSolution<V> solve_y<V>(const CollapsedChain<V>&, const SccDecomposition&, const AnalysisResult<V>&, \
                                     Method, Criterion, const V&, const IterationOptions&);                       \
    template Extended<V> conditional_expected_reward<V>(const CollapsedChain<V>&, std::span<const V>,             \
                                                        std::span<const V>, StateId);                             \
    template std::pair<Extended<V>, Extended<V>> conditional_reward_interval<V>(                                  \
        const CollapsedChain<V>&, const Bounds<V>&, const Bounds<V>&, StateId);                                   \
    template CondRewResult<V> conditional_expected_rewards<V>(const MarkovChain<V>&, const CondRewRequest<V>&);

EVTKIT_INSTANTIATE(double)
EVTKIT_INSTANTIATE(Rational)

#undef EVTKIT_INSTANTIATE

}  // namespace evtkit
