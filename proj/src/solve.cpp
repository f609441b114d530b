#include "evtkit/solve.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

#include "evtkit/detail/tarjan.hpp"
#include "evtkit/errors.hpp"

namespace evtkit {

std::string_view to_string(Method method) {
    switch (method) {
        case Method::kValueIteration: return "vi";
        case Method::kGaussSeidelValueIteration: return "gs-vi";
        case Method::kIntervalIteration: return "ii";
        case Method::kGaussSeidelIntervalIteration: return "gs-ii";
        case Method::kLu: return "lu";
        case Method::kLuExact: return "lu-exact";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    for (Method m : {Method::kValueIteration, Method::kGaussSeidelValueIteration, Method::kIntervalIteration,
                     Method::kGaussSeidelIntervalIteration, Method::kLu, Method::kLuExact}) {
        if (to_string(m) == text) return m;
    }
    throw ConfigError("unknown method '" + std::string(text) + "' (expected vi, gs-vi, ii, gs-ii, lu or lu-exact)");
}

bool is_iterative(Method method) {
    return method != Method::kLu && method != Method::kLuExact;
}

bool is_certifying(Method method, bool rational_backend) {
    switch (method) {
        case Method::kIntervalIteration:
        case Method::kGaussSeidelIntervalIteration:
        case Method::kLuExact:
            return true;
        case Method::kLu:
            return rational_backend;
        default:
            return false;
    }
}

template <Value V>
EvtSystem<V> make_evt_system(const MarkovChain<V>& chain, std::span<const StateId> states, std::vector<V> offset) {
    if (offset.size() != states.size()) throw std::invalid_argument("make_evt_system: offset has wrong length");
    constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> position(chain.size(), kAbsent);
    for (std::size_t i = 0; i < states.size(); ++i) position[states[i]] = i;
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    for (std::size_t t = 0; t < states.size(); ++t) {
        for (const auto& e : chain.transitions().row(states[t])) {
            if (position[e.column] != kAbsent) triplets.emplace_back(position[e.column], t, e.value);
        }
    }
    return EvtSystem<V>{SparseMatrix<V>::from_triplets(states.size(), states.size(), std::move(triplets)),
                        std::move(offset)};
}

template <Value V>
EvtSystem<V> make_evt_system(const SparseMatrix<V>& q, std::vector<V> offset) {
    if (q.rows() != q.columns() || q.rows() != offset.size()) {
        throw std::invalid_argument("make_evt_system: dimension mismatch");
    }
    return EvtSystem<V>{q.transposed(), std::move(offset)};
}

namespace {

template <Value V>
void check_system(const EvtSystem<V>& sys, std::size_t length) {
    if (sys.incoming.rows() != sys.size() || sys.incoming.columns() != sys.size()) {
        throw std::invalid_argument("EVT system matrix does not match its offset");
    }
    if (length != sys.size()) {
        throw std::invalid_argument("vector length " + std::to_string(length) + " does not match system size " +
                                    std::to_string(sys.size()));
    }
}

template <Value V>
void check_epsilon(const V& eps) {
    if (!(eps > 0)) throw ConfigError("iterative methods need a positive epsilon");
}

// Floating-point bounds that no longer move cannot close the gap; fail instead of spinning to the cap.
template <Value V>
void check_progress(bool moved, const Extended<V>& gap) {
    if constexpr (!kIsRational<V>) {
        if (!moved) {
            throw SolverError("interval iteration stalled at gap " + format_extended(gap) +
                              ": the threshold is below floating-point resolution; use the rational backend");
        }
    }
}

[[noreturn]] void iteration_cap(const char* what, std::size_t cap) {
    throw SolverError(std::string(what) + " did not converge within " + std::to_string(cap) + " iterations");
}

template <Value V>
void check_bracket(const Bounds<V>& b) {
    for (std::size_t s = 0; s < b.lower.size(); ++s) {
        if (b.upper[s] < b.lower[s]) {
            throw SolverError("interval iteration bounds crossed at index " + std::to_string(s) +
                              "; the initial bounds do not bracket the fixed point");
        }
    }
}

template <Value V>
std::vector<V> mean(const Bounds<V>& b) {
    std::vector<V> m(b.lower.size());
    for (std::size_t s = 0; s < m.size(); ++s) m[s] = (b.lower[s] + b.upper[s]) / 2;
    return m;
}

template <Value V>
V row_value(const EvtSystem<V>& sys, std::size_t s, std::span<const V> x) {
    V acc = sys.offset[s];
    for (const auto& e : sys.incoming.row(s)) acc += e.value * x[e.column];
    return acc;
}

template <Value V>
void validate_order(const SweepOrder& order, std::size_t n) {
    if (order.empty()) return;
    if (order.size() != n) throw std::invalid_argument("sweep order must list every state once");
    std::vector<bool> seen(n, false);
    for (std::size_t s : order) {
        if (s >= n || seen[s]) throw std::invalid_argument("sweep order must list every state once");
        seen[s] = true;
    }
}

}  // namespace

template <Value V>
std::vector<V> apply_phi(const EvtSystem<V>& sys, std::span<const V> x) {
    check_system(sys, x.size());
    std::vector<V> out(sys.size());
    kernels::phi<V>(sys, x, out);
    return out;
}

template <Value V>
ViResult<V> value_iteration(const EvtSystem<V>& sys, std::vector<V> x0, Criterion criterion, const V& eps,
                            const IterationOptions& options) {
    check_system(sys, x0.size());
    check_epsilon(eps);
    std::vector<V> x = std::move(x0);
    std::vector<V> next(x.size());
    for (std::size_t k = 1; k <= options.max_iterations; ++k) {
        kernels::phi<V>(sys, x, next);
        Extended<V> d = kernels::diff<V>(criterion, x, next);
        std::swap(x, next);
        if (d <= eps) return {std::move(x), k};
    }
    iteration_cap("value iteration", options.max_iterations);
}

template <Value V>
IiResult<V> interval_iteration(const EvtSystem<V>& sys, Bounds<V> initial, Criterion criterion, const V& eps,
                               const IterationOptions& options, const IiObserver<V>& observer) {
    check_system(sys, initial.lower.size());
    check_system(sys, initial.upper.size());
    check_epsilon(eps);
    check_bracket(initial);
    const V target = 2 * eps;
    Bounds<V> b = std::move(initial);
    Bounds<V> next{std::vector<V>(b.lower.size()), std::vector<V>(b.upper.size())};
    if (observer) observer(0, b, kernels::diff<V>(criterion, b.upper, b.lower));
    for (std::size_t k = 1; k <= options.max_iterations; ++k) {
        kernels::phi_max<V>(sys, b.lower, next.lower);
        kernels::phi_min<V>(sys, b.upper, next.upper);
        bool moved = true;
        if constexpr (!kIsRational<V>) moved = next.lower != b.lower || next.upper != b.upper;
        std::swap(b, next);
        check_bracket(b);
        Extended<V> gap = kernels::diff<V>(criterion, b.upper, b.lower);
        if (observer) observer(k, b, gap);
        if (gap <= target) {
            std::vector<V> values = mean(b);
            return {std::move(values), std::move(b), eps, k};
        }
        check_progress(moved, gap);
    }
    iteration_cap("interval iteration", options.max_iterations);
}

template <Value V>
SweepOrder topological_sweep_order(const EvtSystem<V>& sys) {
    // x(s) depends on x(t) for every entry t of row s, so t's component must come first.
    const SparseMatrix<V> dependents = sys.incoming.transposed();
    auto components = detail::strongly_connected_components(sys.size(), [&](std::size_t t, auto&& emit) {
        for (const auto& e : dependents.row(t)) emit(e.column);
    });
    SweepOrder order;
    order.reserve(sys.size());
    for (const auto& c : components) order.insert(order.end(), c.begin(), c.end());
    return order;
}

template <Value V>
Extended<V> gauss_seidel_sweep(const EvtSystem<V>& sys, std::span<V> x, Criterion criterion, const SweepOrder& order) {
    check_system(sys, x.size());
    validate_order<V>(order, sys.size());
    const std::size_t n = sys.size();
    V best = NumberTraits<V>::zero();
    bool infinite = false;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = order.empty() ? i : order[i];
        V updated = row_value(sys, s, std::span<const V>(x.data(), x.size()));
        V step[2] = {x[s], updated};
        Extended<V> d = diff<V>(criterion, std::span<const V>(step, 1), std::span<const V>(step + 1, 1));
        if (d.is_infinite()) {
            infinite = true;
        } else if (best < d.value()) {
            best = d.value();
        }
        x[s] = std::move(updated);
    }
    return infinite ? Extended<V>::infinity() : Extended<V>(best);
}

template <Value V>
ViResult<V> gauss_seidel_value_iteration(const EvtSystem<V>& sys, std::vector<V> x0, Criterion criterion, const V& eps,
                                         const IterationOptions& options, const SweepOrder& order) {
    check_system(sys, x0.size());
    check_epsilon(eps);
    validate_order<V>(order, sys.size());
    std::vector<V> x = std::move(x0);
    for (std::size_t k = 1; k <= options.max_iterations; ++k) {
        if (gauss_seidel_sweep<V>(sys, x, criterion, order) <= eps) return {std::move(x), k};
    }
    iteration_cap("Gauss-Seidel value iteration", options.max_iterations);
}

template <Value V>
IiResult<V> gauss_seidel_interval_iteration(const EvtSystem<V>& sys, Bounds<V> initial, Criterion criterion,
                                            const V& eps, const IterationOptions& options, const SweepOrder& order,
                                            const IiObserver<V>& observer) {
    check_system(sys, initial.lower.size());
    check_system(sys, initial.upper.size());
    check_epsilon(eps);
    validate_order<V>(order, sys.size());
    check_bracket(initial);
    const V target = 2 * eps;
    const std::size_t n = sys.size();
    Bounds<V> b = std::move(initial);
    if (observer) observer(0, b, diff<V>(criterion, b.upper, b.lower));
    for (std::size_t k = 1; k <= options.max_iterations; ++k) {
        bool moved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t s = order.empty() ? i : order[i];
            V lo = row_value(sys, s, std::span<const V>(b.lower));
            if (b.lower[s] < lo) {
                b.lower[s] = std::move(lo);
                moved = true;
            }
            V hi = row_value(sys, s, std::span<const V>(b.upper));
            if (hi < b.upper[s]) {
                b.upper[s] = std::move(hi);
                moved = true;
            }
        }
        check_bracket(b);
        Extended<V> gap = diff<V>(criterion, b.upper, b.lower);
        if (observer) observer(k, b, gap);
        if (gap <= target) {
            std::vector<V> values = mean(b);
            return {std::move(values), std::move(b), eps, k};
        }
        check_progress(moved, gap);
    }
    iteration_cap("Gauss-Seidel interval iteration", options.max_iterations);
}

namespace {

// Sparse exact elimination: columns in order, pivot on the lowest-index remaining row with a
// nonzero in the column. Rows are only combined, never scaled, so the result is exact.
std::vector<Rational> solve_exact(const SparseMatrix<Rational>& a, std::vector<Rational> b) {
    const std::size_t n = a.rows();
    std::vector<std::map<std::size_t, Rational>> rows(n);
    std::vector<std::set<std::size_t>> column_rows(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (const auto& e : a.row(r)) {
            rows[r].emplace(e.column, e.value);
            column_rows[e.column].insert(r);
        }
    }
    std::vector<std::size_t> pivot_row(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (column_rows[j].empty()) throw SolverError("singular system in exact elimination");
        const std::size_t r = *column_rows[j].begin();
        pivot_row[j] = r;
        for (const auto& [c, v] : rows[r]) column_rows[c].erase(r);
        const Rational pivot = rows[r].at(j);
        std::vector<std::size_t> targets(column_rows[j].begin(), column_rows[j].end());
        for (std::size_t i : targets) {
            Rational factor = rows[i].at(j) / pivot;
            for (const auto& [c, v] : rows[r]) {
                auto [it, inserted] = rows[i].try_emplace(c, 0);
                it->second -= factor * v;
                if (sgn(it->second) == 0) {
                    rows[i].erase(it);
                    column_rows[c].erase(i);
                } else if (inserted) {
                    column_rows[c].insert(i);
                }
            }
            b[i] -= factor * b[r];
        }
    }
    std::vector<Rational> x(n);
    for (std::size_t j = n; j-- > 0;) {
        const auto& row = rows[pivot_row[j]];
        Rational acc = b[pivot_row[j]];
        for (const auto& [c, v] : row) {
            if (c != j) acc -= v * x[c];
        }
        x[j] = acc / row.at(j);
    }
    return x;
}

std::vector<double> solve_float(const SparseMatrix<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(a.nonzeros());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (const auto& e : a.row(r)) {
            triplets.emplace_back(static_cast<int>(r), static_cast<int>(e.column), e.value);
        }
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(m);
    lu.factorize(m);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed: " + lu.lastErrorMessage());
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), n);
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
    return std::vector<double>(x.data(), x.data() + n);
}

}  // namespace

template <Value V>
std::vector<V> solve_linear(const SparseMatrix<V>& a, std::vector<V> b) {
    if (a.rows() != a.columns() || a.rows() != b.size()) throw std::invalid_argument("solve_linear: dimension mismatch");
    if (b.empty()) return {};
    if constexpr (kIsRational<V>) {
        return solve_exact(a, std::move(b));
    } else {
        return solve_float(a, b);
    }
}

template <Value V>
std::vector<V> direct_solve(const EvtSystem<V>& sys) {
    check_system(sys, sys.size());
    std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
    const std::size_t n = sys.size();
    for (std::size_t s = 0; s < n; ++s) {
        V diagonal = NumberTraits<V>::one();
        for (const auto& e : sys.incoming.row(s)) {
            if (e.column == s) {
                diagonal -= e.value;
            } else {
                triplets.emplace_back(s, e.column, -e.value);
            }
        }
        triplets.emplace_back(s, s, std::move(diagonal));
    }
    return solve_linear<V>(SparseMatrix<V>::from_triplets(n, n, std::move(triplets)), sys.offset);
}

template <Value V>
SystemSolution<V> solve_system(const EvtSystem<V>& sys, Method method, Criterion criterion, const V& eps,
                               const Bounds<V>* initial, const IterationOptions& options, const SweepOrder& order) {
    SystemSolution<V> out;
    const std::vector<V> zero(sys.size(), NumberTraits<V>::zero());
    auto need_bounds = [&] {
        if (initial == nullptr) throw std::invalid_argument("interval iteration needs initial bounds");
        return *initial;
    };
    switch (method) {
        case Method::kValueIteration: {
            auto r = value_iteration<V>(sys, zero, criterion, eps, options);
            out.values = std::move(r.values);
            out.iterations = r.iterations;
            break;
        }
        case Method::kGaussSeidelValueIteration: {
            auto r = gauss_seidel_value_iteration<V>(sys, zero, criterion, eps, options, order);
            out.values = std::move(r.values);
            out.iterations = r.iterations;
            break;
        }
        case Method::kIntervalIteration:
        case Method::kGaussSeidelIntervalIteration: {
            auto r = method == Method::kIntervalIteration
                         ? interval_iteration<V>(sys, need_bounds(), criterion, eps, options)
                         : gauss_seidel_interval_iteration<V>(sys, need_bounds(), criterion, eps, options, order);
            out.values = std::move(r.values);
            out.bounds = std::move(r.bounds);
            out.certified_bound = std::move(r.certified_bound);
            out.iterations = r.iterations;
            break;
        }
        case Method::kLuExact:
            if constexpr (!kIsRational<V>) {
                throw ConfigError("lu-exact requires the rational backend");
            }
            [[fallthrough]];
        case Method::kLu:
            out.values = direct_solve(sys);
            if constexpr (kIsRational<V>) {
                out.bounds = Bounds<V>{out.values, out.values};
                out.certified_bound = NumberTraits<V>::zero();
            }
            break;
    }
    return out;
}

#define EVTKIT_INSTANTIATE(V)                                                                                       \
    template EvtSystem<V> make_evt_system<V>(const MarkovChain<V>&, std::span<const StateId>, std::vector<V>);   \
    template EvtSystem<V> make_evt_system<V>(const SparseMatrix<V>&, std::vector<V>);                            \
    template std::vector<V> apply_phi<V>(const EvtSystem<V>&, std::span<const V>);                                \
    template ViResult<V> value_iteration<V>(const EvtSystem<V>&, std::vector<V>, Criterion, const V&,             \
                                            const IterationOptions&);                                             \
    template IiResult<V> interval_iteration<V>(const EvtSystem<V>&, Bounds<V>, Criterion, const V&,               \
                                               const IterationOptions&, const IiObserver<V>&);                    \
    template SweepOrder topological_sweep_order<V>(const EvtSystem<V>&);                                          \
    template Extended<V> gauss_seidel_sweep<V>(const EvtSystem<V>&, std::span<V>, Criterion, const SweepOrder&);  \
    template ViResult<V> gauss_seidel_value_iteration<V>(const EvtSystem<V>&, std::vector<V>, Criterion,          \
                                                         const V&, const IterationOptions&, const SweepOrder&);   \
    template IiResult<V> gauss_seidel_interval_iteration<V>(const EvtSystem<V>&, Bounds<V>, Criterion, const V&,  \
                                                            const IterationOptions&, const SweepOrder&,           \
                                                            const IiObserver<V>&);                                \
    template std::vector<V> solve_linear<V>(const SparseMatrix<V>&, std::vector<V>);                              \
    template std::vector<V> direct_solve<V>(const EvtSystem<V>&);                                                 \
    template SystemSolution<V> solve_system<V>(const EvtSystem<V>&, Method, Criterion, const V&, const Bounds<V>*, \
                                                const IterationOptions&, const SweepOrder&);

EVTKIT_INSTANTIATE(double)
EVTKIT_INSTANTIATE(Rational)

#undef EVTKIT_INSTANTIATE

}  // namespace evtkit
