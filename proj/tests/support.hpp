#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evtkit/model.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/oracle.hpp"

namespace evtkit::testing {

inline std::string fixture_path(const std::string& name) { return std::string(EVTKIT_FIXTURE_DIR) + "/" + name; }

inline std::string read_fixture(const std::string& name) {
    std::ifstream in(fixture_path(name), std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

template <Value V>
MarkovChain<V> load_fixture(const std::string& name) {
    return parse_model<V>(read_fixture(name));
}

inline Rational q(long num, long den = 1) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

/// Parameters of the i-th instance of the seeded random suites.
inline oracle::RandomChainOptions suite_options(std::size_t i, std::size_t max_states, std::size_t min_bsccs = 1) {
    static constexpr double kDensities[] = {0.15, 0.3, 0.5};
    oracle::RandomChainOptions o;
    o.states = 2 + i % (max_states - 1);
    o.density = kDensities[i % 3];
    o.bscc_count = std::min<std::size_t>(o.states, min_bsccs + (i / 3) % 3);
    o.max_bscc_size = 1 + (i / 9) % 3;
    return o;
}

/// Exact component-wise criterion check; infinities and zeros must coincide.
template <Value V>
bool within(Criterion criterion, const std::vector<Extended<V>>& result, const std::vector<Extended<Rational>>& exact,
            const Rational& eps) {
    for (std::size_t s = 0; s < exact.size(); ++s) {
        if (exact[s].is_infinite() != result[s].is_infinite()) return false;
        if (exact[s].is_infinite()) continue;
        const Rational value(result[s].value());
        const Rational err = abs(value - exact[s].value());
        const Rational allowed = criterion == Criterion::kAbsolute ? eps : eps * exact[s].value();
        if (err > allowed) return false;
    }
    return true;
}

}  // namespace evtkit::testing
