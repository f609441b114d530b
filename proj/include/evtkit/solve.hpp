#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evtkit/bounds.hpp"
#include "evtkit/kernels.hpp"
#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/sparse_matrix.hpp"

namespace evtkit {

/// Solver selection shared by every analysis.
enum class Method {
    kValueIteration,
    kGaussSeidelValueIteration,
    kIntervalIteration,
    kGaussSeidelIntervalIteration,
    kLu,
    kLuExact,
};

std::string_view to_string(Method method);
Method parse_method(std::string_view text);
bool is_iterative(Method method);
/// II variants and exact elimination certify their output; LU does so only in rationals.
bool is_certifying(Method method, bool rational_backend);

struct IterationOptions {
    std::size_t max_iterations = 10'000'000;
};

/// EVT system over `states` (global ids, local index = position): row s of the result
/// lists P(t,s) for t in `states`. `offset` is indexed locally.
template <Value V>
EvtSystem<V> make_evt_system(const MarkovChain<V>& chain, std::span<const StateId> states, std::vector<V> offset);

/// EVT system from an explicit source-major matrix Q (x -> offset + Q^T x).
template <Value V>
EvtSystem<V> make_evt_system(const SparseMatrix<V>& q, std::vector<V> offset);

/// Phi(x) = offset + A x. Throws std::invalid_argument on dimension mismatch.
template <Value V>
std::vector<V> apply_phi(const EvtSystem<V>& sys, std::span<const V> x);

template <Value V>
struct ViResult {
    std::vector<V> values;
    std::size_t iterations = 0;
};

/// Iterates Phi until diff(x^(k-1), x^(k)) <= eps. No accuracy certificate.
/// Throws SolverError when the iteration cap is hit.
template <Value V>
ViResult<V> value_iteration(const EvtSystem<V>& sys, std::vector<V> x0, Criterion criterion, const V& eps,
                            const IterationOptions& options = {});

template <Value V>
struct IiResult {
    std::vector<V> values;  // mean of the final bounds
    Bounds<V> bounds;
    V certified_bound;
    std::size_t iterations = 0;
};

/// Called with k = 0 for the initial bounds and after every iteration.
template <Value V>
using IiObserver = std::function<void(std::size_t k, const Bounds<V>& bounds, const Extended<V>& gap)>;

/// Interval iteration with the Max/Min operators: stops once diff(u, l) <= 2 eps and
/// returns the mean, which is within eps of the fixed point whenever the initial bounds
/// bracket it. Throws SolverError on inverted bounds or the iteration cap.
template <Value V>
IiResult<V> interval_iteration(const EvtSystem<V>& sys, Bounds<V> initial, Criterion criterion, const V& eps,
                               const IterationOptions& options = {}, const IiObserver<V>& observer = {});

/// State order for in-place sweeps; empty means ascending local index.
using SweepOrder = std::vector<std::size_t>;

/// Order visiting the system's SCCs topologically (states within an SCC ascending).
template <Value V>
SweepOrder topological_sweep_order(const EvtSystem<V>& sys);

/// One in-place Gauss-Seidel sweep of Phi; returns diff(old, new) under `criterion`.
template <Value V>
Extended<V> gauss_seidel_sweep(const EvtSystem<V>& sys, std::span<V> x, Criterion criterion,
                               const SweepOrder& order = {});

template <Value V>
ViResult<V> gauss_seidel_value_iteration(const EvtSystem<V>& sys, std::vector<V> x0, Criterion criterion,
                                         const V& eps, const IterationOptions& options = {},
                                         const SweepOrder& order = {});

template <Value V>
IiResult<V> gauss_seidel_interval_iteration(const EvtSystem<V>& sys, Bounds<V> initial, Criterion criterion,
                                            const V& eps, const IterationOptions& options = {},
                                            const SweepOrder& order = {}, const IiObserver<V>& observer = {});

/// Solves A x = b for square sparse A. Rationals: exact elimination pivoting on the first
/// nonzero; doubles: sparse LU with partial pivoting. Throws SolverError when singular.
template <Value V>
std::vector<V> solve_linear(const SparseMatrix<V>& a, std::vector<V> b);

/// Solves (I - A) x = offset directly.
template <Value V>
std::vector<V> direct_solve(const EvtSystem<V>& sys);

/// Result of solving an EVT-style system with any method.
template <Value V>
struct SystemSolution {
    std::vector<V> values;
    std::optional<Bounds<V>> bounds;  // II variants and exact solves
    std::optional<V> certified_bound;
    std::size_t iterations = 0;
};

/// Dispatches on `method`. Iterative methods start VI from zero and II from `initial`
/// (required for II variants). Throws ConfigError for lu-exact with the float backend.
template <Value V>
SystemSolution<V> solve_system(const EvtSystem<V>& sys, Method method, Criterion criterion, const V& eps,
                               const Bounds<V>* initial, const IterationOptions& options = {},
                               const SweepOrder& order = {});

}  // namespace evtkit
