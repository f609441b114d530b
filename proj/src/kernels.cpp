#include "evtkit/kernels.hpp"

#include <atomic>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evtkit::kernels {

namespace {

std::atomic<int> g_threads{0};  // 0 = OpenMP default

int default_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool in_parallel_region() {
#ifdef _OPENMP
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

template <int Mode>  // 0 = phi, 1 = max, 2 = min
void phi_rows(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(sys.size());
    const int threads = parallel::max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
        double acc = sys.offset[s];
        for (const auto& e : sys.incoming.row(static_cast<std::size_t>(s))) acc += e.value * x[e.column];
        if constexpr (Mode == 1) {
            out[s] = acc < x[s] ? x[s] : acc;
        } else if constexpr (Mode == 2) {
            out[s] = acc > x[s] ? x[s] : acc;
        } else {
            out[s] = acc;
        }
    }
}

}  // namespace

namespace parallel {

int max_threads() {
    int t = g_threads.load(std::memory_order_relaxed);
    return t > 0 ? t : default_threads();
}

void set_max_threads(int threads) {
    g_threads.store(threads > 0 ? threads : 0, std::memory_order_relaxed);
}

void phi(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out) {
    phi_rows<0>(sys, x, out);
}

void phi_max(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out) {
    phi_rows<1>(sys, x, out);
}

void phi_min(const EvtSystem<double>& sys, std::span<const double> x, std::span<double> out) {
    phi_rows<2>(sys, x, out);
}

Extended<double> diff(Criterion criterion, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("diff: vectors of different length");
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const int threads = max_threads();
    double best = 0.0;
    bool infinite = false;
    // max is exact, so the reduction order cannot change the result.
#pragma omp parallel for schedule(static) num_threads(threads) reduction(max : best) reduction(|| : infinite)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double num = std::fabs(x[i] - y[i]);
        if (criterion == Criterion::kAbsolute) {
            best = num > best ? num : best;
        } else if (y[i] == 0.0) {
            if (num != 0.0 && !(num < kRelativeUnderflowGuard)) infinite = true;
        } else {
            double rel = num / std::fabs(y[i]);
            best = rel > best ? rel : best;
        }
    }
    if (infinite) return Extended<double>::infinity();
    return Extended<double>(best);
}

}  // namespace parallel

bool use_parallel(std::size_t size) {
#ifdef _OPENMP
    return size >= kParallelThreshold && parallel::max_threads() > 1 && !in_parallel_region();
#else
    (void)size;
    (void)in_parallel_region;
    return false;
#endif
}

}  // namespace evtkit::kernels
