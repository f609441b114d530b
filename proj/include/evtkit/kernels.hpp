#pragma once

#include <algorithm>
#include <cstddef>
#include <span>

#include "evtkit/numeric.hpp"
#include "evtkit/sparse_matrix.hpp"

namespace evtkit {

/// Non-negative affine system x -> offset + A x. For EVTs, row s of A lists the incoming
/// transitions (t, P(t,s)) over the system's states, and offset is the initial mass.
template <Value V>
struct EvtSystem {
    SparseMatrix<V> incoming;
    std::vector<V> offset;

    std::size_t size() const { return offset.size(); }
};

namespace kernels {

/// Systems smaller than this run serially even when OpenMP is available.
inline constexpr std::size_t kParallelThreshold = 4096;

namespace serial {

template <Value V>
void phi(const EvtSystem<V>& sys, std::span<const V> x, std::span<V> out) {
    for (std::size_t s = 0; s < sys.size(); ++s) {
        V acc = sys.offset[s];
        for (const auto& e : sys.incoming.row(s)) acc += e.value * x[e.column];
        out[s] = std::move(acc);
    }
}

template <Value V>
void phi_max(const EvtSystem<V>& sys, std::span<const V> x, std::span<V> out) {
    for (std::size_t s = 0; s < sys.size(); ++s) {
        V acc = sys.offset[s];
        for (const auto& e : sys.incoming.row(s)) acc += e.value * x[e.column];
        out[s] = acc < x[s] ? x[s] : std::move(acc);
    }
}

template <Value V>
void phi_min(const EvtSystem<V>& sys, std::span<const V> x, std::span<V> out) {
    for (std::size_t s = 0; s < sys.size(); ++s) {
        V acc = sys.offset[s];
        for (const auto& e : sys.incoming.row(s)) acc += e.value * x[e.column];
        out[s] = acc > x[s] ? x[s] : std::move(acc);
    }
}

template <Value V>
Extended<V> diff(Criterion criterion, std::span<const V> x, std::span<const V> y) {
    return evtkit::diff<V>(criterion, x, y);
}

}  // namespace serial

namespace parallel {

// OpenMP kernels. Each output row is accumulated by a single thread in the serial order,
// so results are bit-identical to the serial kernels.
void phi(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out);
void phi_max(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out);
void phi_min(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out);
Extended<double> diff(Criterion criterion, std::span<const double> x, std::span<const double> y);

/// Worker count used by the parallel kernels and the topological driver.
int max_threads();
void set_max_threads(int threads);

}  // namespace parallel

/// True when the double kernels should take the OpenMP path for a system of this size.
bool use_parallel(std::size_t size);

template <Value V>
void phi(const EvtSystem<V>& sys, std::span<const V> x, std::span<V> out) {
    if constexpr (std::is_same_v<V, double>) {
        if (use_parallel(sys.size())) return parallel::phi(sys, x, out);
    }
    serial::phi(sys, x, out);
}

template <Value V>
void phi_max(const EvtSystem<V>& sys, std::span<const V> x, std::span<V> out) {
    if constexpr (std::is_same_v<V, double>) {
        if (use_parallel(sys.size())) return parallel::phi_max(sys, x, out);
    }
    serial::phi_max(sys, x, out);
}

template <Value V>
void phi_min(const EvtSystem<V>& sys, std::span<const V> x, std::span<V> out) {
    if constexpr (std::is_same_v<V, double>) {
        if (use_parallel(sys.size())) return parallel::phi_min(sys, x, out);
    }
    serial::phi_min(sys, x, out);
}

template <Value V>
Extended<V> diff(Criterion criterion, std::span<const V> x, std::span<const V> y) {
    if constexpr (std::is_same_v<V, double>) {
        if (use_parallel(x.size())) return parallel::diff(criterion, x, y);
    }
    return serial::diff(criterion, x, y);
}

}  // namespace kernels
}  // namespace evtkit
