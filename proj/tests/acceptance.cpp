#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "evtkit/condrew.hpp"
#include "evtkit/errors.hpp"
#include "evtkit/evt.hpp"
#include "evtkit/graph.hpp"
#include "evtkit/model.hpp"
#include "evtkit/oracle.hpp"
#include "evtkit/solve.hpp"
#include "evtkit/stationary.hpp"
#include "support.hpp"

using namespace evtkit;
using evtkit::testing::load_fixture;
using evtkit::testing::q;
using evtkit::testing::suite_options;
using evtkit::testing::within;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool condition, const std::string& what) {
        if (!condition && pass) {
            pass = false;
            detail.str("");
            detail << what;
        }
    }
};

struct Criterion_ {
    const char* id;
    const char* title;
    double limit_seconds;
    std::function<void(Outcome&)> check;
};

std::string show(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

bool close(double x, double expected, double tol) { return std::fabs(x - expected) <= tol; }

template <Value V>
double as_double(const V& x) {
    return NumberTraits<V>::to_double(x);
}

std::vector<Rational> exact_values(const std::vector<Extended<Rational>>& v, const std::vector<StateId>& states) {
    std::vector<Rational> out;
    for (StateId s : states) out.push_back(v[s].value());
    return out;
}

// Running example, exact elimination.
void ac1(Outcome& o) {
    const auto chain = load_fixture<Rational>("running_example.mc");
    EvtRequest<Rational> req;
    req.method = Method::kLuExact;
    req.epsilon = 0;
    const auto r = compute_evts(chain, req);
    const std::vector<Rational> finite = {q(41, 25), q(41, 50), q(3, 5), q(5)};
    for (std::size_t s = 0; s < 4; ++s) {
        o.require(r.values[s].is_finite() && r.values[s].value() == finite[s],
                  chain.name(s) + " = " + format_extended(r.values[s]));
    }
    for (std::size_t s = 4; s < 7; ++s) o.require(r.values[s].is_infinite(), chain.name(s) + " not infinite");
    const char* display[] = {"1.64", "0.82", "0.6", "5"};
    for (std::size_t s = 0; s < 4; ++s) o.require(show(as_double(r.values[s].value())) == display[s], "display");
    o.require(r.certified() && *r.certified_bound == 0, "not certified exact");
    o.detail << "EVTs (41/25, 41/50, 3/5, 5, inf, inf, inf), display 1.64 0.82 0.6 5";
}

// Interval iteration trace with hand-picked initial upper bounds.
void ac2(Outcome& o) {
    const auto chain = load_fixture<Rational>("running_example.mc");
    const SccDecomposition scc(chain);
    const ChainSystem<Rational> cs = whole_chain_system(chain, scc);
    o.require(cs.states == std::vector<StateId>({0, 1, 2, 3}), "system states are not s1..s4");
    Bounds<Rational> start{std::vector<Rational>(4, 0), {q(2), q(2), q(1), q(5)}};
    struct Row {
        std::vector<double> l, u;
        double gap;
    };
    std::vector<Row> rows;
    auto observer = [&](std::size_t, const Bounds<Rational>& b, const Extended<Rational>& gap) {
        Row row;
        for (std::size_t i = 0; i < 4; ++i) {
            row.l.push_back(b.lower[i].get_d());
            row.u.push_back(b.upper[i].get_d());
        }
        row.gap = gap.value().get_d();
        rows.push_back(std::move(row));
    };
    const auto r = interval_iteration<Rational>(cs.system, start, Criterion::kAbsolute, q(1, 20), {}, observer);
    o.require(r.iterations == 23, "stopped at k = " + std::to_string(r.iterations));
    o.require(rows.size() == 24, "observer rows");
    if (!o.pass) return;
    const std::vector<Row> table = {
        {{0, 0, 0, 0}, {2, 2, 1, 5}, 5.0},
        {{0.4, 0, 0.6, 0}, {2, 1, 0.6, 5}, 5.0},
        {{0.82, 0.2, 0.6, 0.38}, {1.82, 1, 0.6, 5}, 4.62},
    };
    for (std::size_t k = 0; k < table.size(); ++k) {
        for (std::size_t i = 0; i < 4; ++i) {
            o.require(close(rows[k].l[i], table[k].l[i], 5e-4) && close(rows[k].u[i], table[k].u[i], 5e-4),
                      "row " + std::to_string(k) + " differs");
        }
        o.require(close(rows[k].gap, table[k].gap, 5e-4), "gap of row " + std::to_string(k));
    }
    const std::vector<double> l23 = {1.639, 0.819, 0.600, 4.919};
    for (std::size_t i = 0; i < 4; ++i) o.require(close(rows[23].l[i], l23[i], 1e-3), "row 23 lower bound");
    o.require(close(rows[22].gap, 0.101, 1e-3), "gap at k = 22 is " + show(rows[22].gap));
    o.require(close(rows[23].gap, 0.081, 1e-3), "gap at k = 23 is " + show(rows[23].gap));
    o.detail << "stops at k = 23 with gap " << show(rows[23].gap) << ", rows 0-2 match";
}

// Stationary distribution through redirection, plus the redirected chain's EVTs.
void ac3(Outcome& o) {
    const auto chain = load_fixture<Rational>("running_example.mc");
    StationaryRequest<Rational> req;
    req.strategy = Strategy::kEvtFull;
    req.method = Method::kLuExact;
    req.epsilon = 0;
    const auto r = stationary_distribution(chain, req);
    o.require(r.values[4] == q(5, 16) && r.values[5] == q(3, 16) && r.values[6] == q(1, 2),
              "pi = (" + format_number(r.values[4]) + ", " + format_number(r.values[5]) + ", " +
                  format_number(r.values[6]) + ")");
    for (std::size_t s = 0; s < 4; ++s) o.require(r.values[s] == 0, "transient mass");
    const SccDecomposition scc(chain);
    const auto bscc = bscc_chain(chain, scc, scc.scc_of(4));
    const auto irr = stationary_irreducible(bscc, Method::kLuExact, Rational(0), StateId{1});
    o.require(irr.redirected_evts == std::vector<Rational>({q(5, 3), q(1)}), "redirected EVTs");
    o.require(r.certified_rel_error && *r.certified_rel_error == 0, "not certified exact");
    o.detail << "pi(s5, s6, s7) = (5/16, 3/16, 1/2), redirected EVTs (5/3, 1)";
}

// Fast Dice Roller faces are uniform.
void ac4(Outcome& o) {
    std::size_t states = 0;
    for (unsigned n = 1; n <= 64; ++n) {
        const auto chain = oracle::generate_fdr(n);
        states += chain.size();
        const std::size_t first_face = chain.size() - n;
        StationaryRequest<Rational> exact;
        exact.method = Method::kLuExact;
        exact.epsilon = 0;
        const auto r = stationary_distribution(chain, exact);
        for (unsigned f = 0; f < n; ++f) {
            o.require(r.values[first_face + f] == q(1, n), "N = " + std::to_string(n) + " exact face probability");
        }
        StationaryRequest<double> ii;
        ii.method = Method::kIntervalIteration;
        ii.epsilon = 1e-3;
        const auto rf = stationary_distribution(convert_chain<double>(chain), ii);
        o.require(rf.certified_rel_error && *rf.certified_rel_error <= 1e-3, "N = " + std::to_string(n) + " uncertified");
        for (unsigned f = 0; f < n; ++f) {
            o.require(std::fabs(rf.values[first_face + f] * n - 1.0) <= 1e-3,
                      "N = " + std::to_string(n) + " II face probability " + show(rf.values[first_face + f]));
        }
    }
    o.detail << "N = 1..64 (" << states << " states in total): exact 1/N, II within relative 1e-3";
}

// Value iteration stops far from the truth where interval iteration does not.
void ac5(Outcome& o) {
    const auto chain = load_fixture<double>("vi_trap.mc");
    EvtRequest<double> req;
    req.criterion = Criterion::kAbsolute;
    req.epsilon = 0.1;
    req.method = Method::kValueIteration;
    const auto vi = compute_evts(chain, req);
    const double v = vi.values[1].value();
    o.require(close(v, 0.1, 1e-12), "VI returned " + show(v));
    o.require(!vi.certified(), "VI claims certification");
    req.method = Method::kIntervalIteration;
    const auto ii = compute_evts(chain, req);
    const double w = ii.values[1].value();
    o.require(close(w, 10.0, 0.1), "II returned " + show(w));
    o.require(ii.certified() && *ii.certified_bound <= 0.1, "II not certified");
    o.detail << "VI s2 = " << show(v) << " (off by " << show(10 - v) << "), II s2 = " << show(w) << " certified";
}

// Randomized soundness of interval iteration, topological pipelines and Gauss-Seidel.
void ac6(Outcome& o) {
    constexpr std::size_t kInstances = 500;
    std::size_t checks = 0;
    std::size_t bracketed = 0;
    for (std::size_t i = 0; i < kInstances; ++i) {
        const auto chain = oracle::generate_random_chain(6000 + i, suite_options(i, 20));
        const auto fchain = convert_chain<double>(chain);
        const auto exact = oracle::oracle_evts(chain);
        const std::string tag = "instance " + std::to_string(i) + ": ";

        // (a) II and GS-II, both criteria.
        for (Method m : {Method::kIntervalIteration, Method::kGaussSeidelIntervalIteration}) {
            for (Criterion c : {Criterion::kAbsolute, Criterion::kRelative}) {
                for (double eps : {1e-2, 1e-4}) {
                    EvtRequest<double> req;
                    req.method = m;
                    req.criterion = c;
                    req.epsilon = eps;
                    const auto r = compute_evts(fchain, req);
                    o.require(within(c, r.values, exact, Rational(eps)),
                              tag + std::string(to_string(m)) + " " + std::string(to_string(c)) + " eps " + show(eps));
                    ++checks;
                }
            }
        }

        // (c) topological pipelines with their per-SCC budgets.
        for (Criterion c : {Criterion::kRelative, Criterion::kAbsolute}) {
            EvtRequest<double> req;
            req.topological = true;
            req.criterion = c;
            req.epsilon = 1e-3;
            const auto r = compute_evts(fchain, req);
            o.require(within(c, r.values, exact, Rational(1e-3)), tag + "topological " + std::string(to_string(c)));
            ++checks;
        }

        const SccDecomposition scc(chain);
        const ChainSystem<Rational> cs = whole_chain_system(chain, scc);
        if (cs.states.empty()) continue;
        const std::vector<Rational> star = exact_values(exact, cs.states);

        // (d) the exact solution is a fixed point of both the Jacobi and the in-place operator,
        // and float GS-VI / VI converge to the same point.
        {
            o.require(apply_phi<Rational>(cs.system, star) == star, tag + "exact EVTs not a fixed point of phi");
            std::vector<Rational> x = star;
            const auto d = gauss_seidel_sweep<Rational>(cs.system, x, Criterion::kAbsolute, {});
            o.require(x == star && d.is_finite() && d.value() == 0, tag + "exact EVTs not a Gauss-Seidel fixed point");
            const ChainSystem<double> fs = whole_chain_system(fchain, SccDecomposition(fchain));
            const auto vi = value_iteration(fs.system, std::vector<double>(fs.states.size(), 0.0), Criterion::kRelative,
                                            1e-13);
            const auto gs = gauss_seidel_value_iteration(fs.system, std::vector<double>(fs.states.size(), 0.0),
                                                         Criterion::kRelative, 1e-13);
            for (std::size_t k = 0; k < star.size(); ++k) {
                const double s = star[k].get_d();
                o.require(std::fabs(vi.values[k] - gs.values[k]) <= 1e-9 * std::max(1.0, s), tag + "GS-VI vs VI");
            }
            checks += 2;
        }

        // (b) bounds bracket the exact EVTs at every iteration (exact arithmetic).
        if (bracketed < 20) {
            ++bracketed;
            auto observer = [&](std::size_t k, const Bounds<Rational>& b, const Extended<Rational>&) {
                for (std::size_t j = 0; j < star.size(); ++j) {
                    o.require(b.lower[j] <= star[j] && star[j] <= b.upper[j],
                              tag + "bracket violated at k = " + std::to_string(k));
                }
            };
            interval_iteration<Rational>(cs.system, cs.initial_bounds, Criterion::kRelative, q(1, 100), {}, observer);
            gauss_seidel_interval_iteration<Rational>(cs.system, cs.initial_bounds, Criterion::kRelative, q(1, 100), {}, {},
                                            observer);
            checks += 2;
        }
    }
    o.detail << kInstances << " chains, " << checks << " checks, " << bracketed << " bracketing traces";
}

// Stationary strategies agree exactly.
void ac7(Outcome& o) {
    constexpr std::size_t kInstances = 200;
    for (std::size_t i = 0; i < kInstances; ++i) {
        const auto chain = oracle::generate_random_chain(7000 + i, suite_options(i, 20, 2));
        const auto exact = oracle::oracle_stationary(chain);
        for (Strategy s : {Strategy::kClassic, Strategy::kEvtReach, Strategy::kEvtFull}) {
            StationaryRequest<Rational> req;
            req.strategy = s;
            req.method = Method::kLuExact;
            req.epsilon = 0;
            const auto r = stationary_distribution(chain, req);
            o.require(r.values == exact,
                      "instance " + std::to_string(i) + ": " + std::string(to_string(s)) + " disagrees with the oracle");
        }
    }
    o.detail << kInstances << " chains with >= 2 BSCCs, classic = evt-reach = evt-full = oracle";
}

// Conditional expected rewards: one auxiliary solve against per-target conditioning.
void ac8(Outcome& o) {
    constexpr std::size_t kInstances = 200;
    std::size_t targets = 0;
    std::size_t intervals = 0;
    for (std::size_t i = 0; i < kInstances; ++i) {
        auto options = suite_options(i, 20, 2);
        options.max_bscc_size = 1;
        options.with_reward = true;
        const auto chain = oracle::generate_random_chain(8000 + i, options);
        const std::string tag = "instance " + std::to_string(i) + ": ";
        CondRewRequest<Rational> req;
        req.reward = "r";
        req.method = Method::kLuExact;
        req.epsilon = 0;
        const auto r = conditional_expected_rewards(chain, req);
        o.require(r.auxiliary_solves == 1, tag + "auxiliary solves " + std::to_string(r.auxiliary_solves));
        Rational total = 0;
        for (const auto& t : r.targets) {
            const StateId s = *chain.find_state(t.name);
            o.require(t.reach_probability == oracle::oracle_reach(chain, s), tag + "reach probability of " + t.name);
            if (!t.value) continue;
            const auto expected = oracle::oracle_condrew(chain, chain.reward("r"), s);
            o.require(*t.value == expected, tag + "conditional reward of " + t.name);
            if (t.value->is_finite()) total += t.reach_probability * t.value->value();
            ++targets;
        }
        o.require(Extended<Rational>(total) == oracle::oracle_total_reward(chain, chain.reward("r")),
                  tag + "law of total expectation");

        // Interval variant from perturbed exact EVT bounds.
        const auto collapsed = collapse_bsccs(chain, "r");
        const SccDecomposition scc(collapsed.chain);
        EvtRequest<Rational> ereq;
        ereq.method = Method::kLuExact;
        ereq.epsilon = 0;
        AnalysisResult<Rational> evts = compute_evts(collapsed.chain, scc, ereq);
        const YSolution<Rational> y_exact =
            solve_y(collapsed, scc, evts, Method::kLuExact, Criterion::kRelative, Rational(0));
        std::vector<Rational> point(collapsed.chain.size(), 0);
        for (StateId s = 0; s < point.size(); ++s) {
            if (evts.values[s].is_finite()) point[s] = evts.values[s].value();
        }
        Bounds<Rational> widened{point, point};
        for (StateId s = 0; s < point.size(); ++s) {
            widened.lower[s] *= 1 - q(1, 50 + static_cast<long>((s * 7 + i) % 50));
            widened.upper[s] *= 1 + q(1, 50 + static_cast<long>((s * 11 + i) % 50));
        }
        evts.bounds = widened;
        evts.method = Method::kIntervalIteration;
        const YSolution<Rational> y =
            solve_y(collapsed, scc, evts, Method::kIntervalIteration, Criterion::kRelative, q(1, 1000));
        for (StateId s = 0; s < point.size(); ++s) {
            o.require(y.bounds->lower[s] <= y_exact.values[s] && y_exact.values[s] <= y.bounds->upper[s],
                      tag + "auxiliary bracket");
        }
        for (StateId target : collapsed.targets) {
            Rational reach = collapsed.chain.initial()[target];
            for (StateId s = 0; s < point.size(); ++s) {
                if (s != target) reach += collapsed.chain.transitions().at(s, target) * point[s];
            }
            if (reach == 0) continue;
            const auto exact = conditional_expected_reward<Rational>(collapsed, point, y_exact.values, target);
            const auto [lo, hi] = conditional_reward_interval(collapsed, widened, *y.bounds, target);
            o.require(lo.value() <= exact.value() && (hi.is_infinite() || exact.value() <= hi.value()),
                      tag + "interval misses the exact value");
            ++intervals;
        }
    }
    o.detail << kInstances << " absorbing chains, " << targets << " targets exact, " << intervals
             << " intervals bracket";
}

// CTMC EVTs are embedded EVTs scaled by residence time.
void ac9(Outcome& o) {
    constexpr std::size_t kInstances = 100;
    for (std::size_t i = 0; i < kInstances; ++i) {
        auto options = suite_options(i, 15);
        options.continuous_time = true;
        const auto chain = oracle::generate_random_chain(9000 + i, options);
        EvtRequest<Rational> req;
        req.method = Method::kLuExact;
        req.epsilon = 0;
        const auto c = compute_evts(chain, req);
        const auto d = compute_evts(embed(chain), req);
        const std::string tag = "instance " + std::to_string(i) + ": ";
        for (StateId s = 0; s < chain.size(); ++s) {
            o.require(c.values[s].is_infinite() == d.values[s].is_infinite(), tag + "classification");
            if (c.values[s].is_finite()) {
                o.require(c.values[s].value() * (*chain.rates())[s] == d.values[s].value(), tag + "scaling");
            }
        }
        o.require(c.values == oracle::oracle_evts(chain), tag + "oracle");
    }
    o.detail << kInstances << " CTMCs, EVT * rate = embedded EVT";
}

// Scale smoke test on a large dice roller.
void ac10(Outcome& o) {
    constexpr unsigned kFaces = 2000;
    const auto chain = convert_chain<double>(oracle::generate_fdr(kFaces));
    const SccDecomposition scc(chain);
    auto run = [&](bool topological, AnalysisResult<double>& out) {
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            EvtRequest<double> req;
            req.topological = topological;
            const auto start = std::chrono::steady_clock::now();
            out = compute_evts(chain, scc, req);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        return best;
    };
    AnalysisResult<double> top;
    AnalysisResult<double> flat;
    const double t_top = run(true, top);
    const double t_flat = run(false, flat);
    o.require(top.certified() && *top.certified_bound <= 1e-3, "topological result not certified");
    const auto bsccs = scc.bottom_sccs();
    const auto reach = bscc_reach_probabilities<double>(chain, scc, bsccs, top.values);
    double worst = 0;
    for (double p : reach) worst = std::max(worst, std::fabs(p * kFaces - 1.0));
    o.require(reach.size() == kFaces && worst <= 1e-3, "face probabilities off by relative " + show(worst));
    o.require(t_top < 60.0, "topological II took " + show(t_top) + " s");
    o.require(t_top <= 2.0 * t_flat, "topological " + show(t_top) + " s vs non-topological " + show(t_flat) + " s");
    o.detail << chain.size() << " states: topological " << show(t_top) << " s, non-topological " << show(t_flat)
             << " s, worst relative face error " << show(worst);
}

}  // namespace

int main() {
    const std::vector<Criterion_> criteria = {
        {"AC1", "running-example exactness", 1, ac1},
        {"AC2", "interval iteration trace", 1, ac2},
        {"AC3", "stationary exactness", 1, ac3},
        {"AC4", "dice roller uniformity", 30, ac4},
        {"AC5", "value iteration unsoundness", 1, ac5},
        {"AC6", "soundness suite", 300, ac6},
        {"AC7", "stationary strategy agreement", 180, ac7},
        {"AC8", "conditional reward equivalence", 180, ac8},
        {"AC9", "CTMC reduction", 60, ac9},
        {"AC10", "performance smoke", 120, ac10},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.check(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail.str("");
            o.detail << "exception: " << e.what();
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && seconds >= c.limit_seconds) {
            o.pass = false;
            o.detail << " -- exceeded " << show(c.limit_seconds) << " s";
        }
        failures += !o.pass;
        std::printf("%-4s %s  %s (%.2f s): %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title, seconds,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
