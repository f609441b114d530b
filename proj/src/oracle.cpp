#include "evtkit/oracle.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

namespace evtkit::oracle {

namespace {

using Matrix = std::vector<std::vector<Rational>>;

void check_size(const MarkovChain<Rational>& chain) {
    if (chain.size() > kMaxStates) throw std::length_error("oracle: chain exceeds the size cap");
}

// reach[s][t]: t reachable from s in zero or more steps.
std::vector<std::vector<bool>> reachability(const MarkovChain<Rational>& chain) {
    const std::size_t n = chain.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (StateId s = 0; s < n; ++s) {
        std::deque<StateId> queue{s};
        reach[s][s] = true;
        while (!queue.empty()) {
            StateId u = queue.front();
            queue.pop_front();
            for (const auto& e : chain.transitions().row(u)) {
                if (!reach[s][e.column]) {
                    reach[s][e.column] = true;
                    queue.push_back(e.column);
                }
            }
        }
    }
    return reach;
}

struct Classification {
    std::vector<std::vector<bool>> reach;
    std::vector<bool> recurrent;
    std::vector<bool> reachable;  // from the initial distribution
};

Classification classify(const MarkovChain<Rational>& chain) {
    const std::size_t n = chain.size();
    Classification c{reachability(chain), std::vector<bool>(n, true), std::vector<bool>(n, false)};
    for (StateId s = 0; s < n; ++s) {
        for (StateId t = 0; t < n; ++t) {
            if (c.reach[s][t] && !c.reach[t][s]) c.recurrent[s] = false;
        }
        if (sgn(chain.initial()[s]) > 0) {
            for (StateId t = 0; t < n; ++t) {
                if (c.reach[s][t]) c.reachable[t] = true;
            }
        }
    }
    return c;
}

// Solves A x = B column-wise by Gauss-Jordan with row exchanges to the first nonzero pivot.
Matrix gauss_jordan(Matrix a, Matrix b) {
    const std::size_t n = a.size();
    const std::size_t m = n == 0 ? 0 : b[0].size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        while (pivot < n && sgn(a[pivot][col]) == 0) ++pivot;
        if (pivot == n) throw std::domain_error("oracle: singular matrix");
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        const Rational inv = 1 / a[col][col];
        for (auto& v : a[col]) v *= inv;
        for (auto& v : b[col]) v *= inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || sgn(a[r][col]) == 0) continue;
            const Rational f = a[r][col];
            for (std::size_t k = col; k < n; ++k) {
                if (sgn(a[col][k]) != 0) a[r][k] -= f * a[col][k];
            }
            for (std::size_t k = 0; k < m; ++k) {
                if (sgn(b[col][k]) != 0) b[r][k] -= f * b[col][k];
            }
        }
    }
    return b;
}

// Groups recurrent states into their closed classes, ordered by smallest member.
std::vector<std::vector<StateId>> recurrent_classes(const Classification& c) {
    const std::size_t n = c.recurrent.size();
    std::vector<bool> done(n, false);
    std::vector<std::vector<StateId>> classes;
    for (StateId s = 0; s < n; ++s) {
        if (!c.recurrent[s] || done[s]) continue;
        std::vector<StateId> cls;
        for (StateId t = 0; t < n; ++t) {
            if (c.reach[s][t]) {
                cls.push_back(t);
                done[t] = true;
            }
        }
        classes.push_back(std::move(cls));
    }
    return classes;
}

// Absorption probabilities into `target` from every transient state (indexed like fm.transient).
std::vector<Rational> absorption(const MarkovChain<Rational>& chain, const FundamentalMatrix& fm,
                                 const std::vector<bool>& target) {
    const std::size_t k = fm.transient.size();
    std::vector<Rational> b(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (const auto& e : chain.transitions().row(fm.transient[i])) {
            if (target[e.column]) b[i] += e.value;
        }
    }
    std::vector<Rational> h(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (sgn(fm.n[i][j]) != 0 && sgn(b[j]) != 0) h[i] += fm.n[i][j] * b[j];
        }
    }
    return h;
}

std::vector<Rational> eigenvector(const MarkovChain<Rational>& chain, const std::vector<StateId>& cls) {
    const std::size_t m = cls.size();
    std::map<StateId, std::size_t> pos;
    for (std::size_t i = 0; i < m; ++i) pos[cls[i]] = i;
    // Equations: for j < m-1, sum_i pi_i P(i, j) - pi_j = 0; last: sum pi = 1.
    Matrix a(m, std::vector<Rational>(m, 0));
    Matrix b(m, std::vector<Rational>(1, 0));
    for (std::size_t i = 0; i < m; ++i) {
        for (const auto& e : chain.transitions().row(cls[i])) {
            std::size_t j = pos.at(e.column);
            if (j + 1 < m) a[j][i] += e.value;
        }
    }
    for (std::size_t j = 0; j + 1 < m; ++j) a[j][j] -= 1;
    for (std::size_t i = 0; i < m; ++i) a[m - 1][i] = 1;
    b[m - 1][0] = 1;
    Matrix x = gauss_jordan(std::move(a), std::move(b));
    std::vector<Rational> pi(m);
    for (std::size_t i = 0; i < m; ++i) pi[i] = x[i][0];
    return pi;
}

std::vector<Rational> per_visit_reward(const MarkovChain<Rational>& chain, const std::vector<Rational>& reward) {
    std::vector<Rational> r = reward;
    if (chain.rates()) {
        for (StateId s = 0; s < r.size(); ++s) r[s] /= (*chain.rates())[s];
    }
    return r;
}

}  // namespace

FundamentalMatrix fundamental_matrix(const MarkovChain<Rational>& chain) {
    check_size(chain);
    Classification c = classify(chain);
    FundamentalMatrix fm;
    std::vector<std::size_t> pos(chain.size(), 0);
    for (StateId s = 0; s < chain.size(); ++s) {
        if (!c.recurrent[s]) {
            pos[s] = fm.transient.size();
            fm.transient.push_back(s);
        }
    }
    const std::size_t k = fm.transient.size();
    Matrix a(k, std::vector<Rational>(k, 0));
    Matrix identity(k, std::vector<Rational>(k, 0));
    for (std::size_t i = 0; i < k; ++i) {
        a[i][i] = 1;
        identity[i][i] = 1;
        for (const auto& e : chain.transitions().row(fm.transient[i])) {
            if (!c.recurrent[e.column]) a[i][pos[e.column]] -= e.value;
        }
    }
    fm.n = gauss_jordan(std::move(a), std::move(identity));
    return fm;
}

std::vector<Extended<Rational>> oracle_evts(const MarkovChain<Rational>& chain) {
    Classification c = classify(chain);
    FundamentalMatrix fm = fundamental_matrix(chain);
    std::vector<Extended<Rational>> out(chain.size());
    for (StateId s = 0; s < chain.size(); ++s) {
        if (c.recurrent[s] && c.reachable[s]) out[s] = Extended<Rational>::infinity();
    }
    const std::size_t k = fm.transient.size();
    for (std::size_t j = 0; j < k; ++j) {
        Rational v = 0;
        for (std::size_t i = 0; i < k; ++i) v += chain.initial()[fm.transient[i]] * fm.n[i][j];
        if (chain.rates()) v /= (*chain.rates())[fm.transient[j]];
        out[fm.transient[j]] = Extended<Rational>(v);
    }
    return out;
}

std::vector<Rational> oracle_stationary(const MarkovChain<Rational>& chain) {
    Classification c = classify(chain);
    FundamentalMatrix fm = fundamental_matrix(chain);
    std::vector<Rational> pi(chain.size(), 0);
    for (const auto& cls : recurrent_classes(c)) {
        std::vector<bool> target(chain.size(), false);
        for (StateId s : cls) target[s] = true;
        std::vector<Rational> h = absorption(chain, fm, target);
        Rational reach = 0;
        for (StateId s : cls) reach += chain.initial()[s];
        for (std::size_t i = 0; i < fm.transient.size(); ++i) reach += chain.initial()[fm.transient[i]] * h[i];
        std::vector<Rational> local = eigenvector(chain, cls);
        if (chain.rates()) {
            // Time fractions: weight embedded visit frequencies by mean residence times.
            Rational total = 0;
            for (std::size_t i = 0; i < cls.size(); ++i) total += local[i] /= (*chain.rates())[cls[i]];
            for (auto& v : local) v /= total;
        }
        for (std::size_t i = 0; i < cls.size(); ++i) pi[cls[i]] = reach * local[i];
    }
    return pi;
}

Rational oracle_reach(const MarkovChain<Rational>& chain, StateId r) {
    Classification c = classify(chain);
    if (!c.recurrent[r]) throw std::invalid_argument("oracle_reach: target is transient");
    FundamentalMatrix fm = fundamental_matrix(chain);
    std::vector<bool> target(chain.size(), false);
    for (StateId t = 0; t < chain.size(); ++t) target[t] = c.reach[r][t];
    std::vector<Rational> h = absorption(chain, fm, target);
    Rational reach = 0;
    for (StateId t = 0; t < chain.size(); ++t) {
        if (target[t]) reach += chain.initial()[t];
    }
    for (std::size_t i = 0; i < fm.transient.size(); ++i) reach += chain.initial()[fm.transient[i]] * h[i];
    return reach;
}

Extended<Rational> oracle_condrew(const MarkovChain<Rational>& chain, const std::vector<Rational>& reward, StateId r) {
    check_size(chain);
    Classification c = classify(chain);
    if (!c.recurrent[r]) throw std::invalid_argument("oracle_condrew: target is transient");
    const std::size_t n = chain.size();
    const std::vector<Rational> rew = per_visit_reward(chain, reward);
    std::vector<bool> in_target(n, false);
    for (StateId t = 0; t < n; ++t) in_target[t] = c.reach[r][t];

    // h(s) = Pr_s(reach target) by a dense solve over the transient states.
    std::vector<StateId> tr;
    std::vector<std::size_t> pos(n, 0);
    for (StateId s = 0; s < n; ++s) {
        if (!c.recurrent[s]) {
            pos[s] = tr.size();
            tr.push_back(s);
        }
    }
    const std::size_t k = tr.size();
    std::vector<Rational> h(n, 0);
    for (StateId s = 0; s < n; ++s) {
        if (in_target[s]) h[s] = 1;
    }
    if (k > 0) {
        Matrix a(k, std::vector<Rational>(k, 0));
        Matrix b(k, std::vector<Rational>(1, 0));
        for (std::size_t i = 0; i < k; ++i) {
            a[i][i] = 1;
            for (const auto& e : chain.transitions().row(tr[i])) {
                if (!c.recurrent[e.column]) {
                    a[i][pos[e.column]] -= e.value;
                } else if (in_target[e.column]) {
                    b[i][0] += e.value;
                }
            }
        }
        Matrix x = gauss_jordan(std::move(a), std::move(b));
        for (std::size_t i = 0; i < k; ++i) h[tr[i]] = x[i][0];
    }
    Rational reach = 0;
    for (StateId s = 0; s < n; ++s) reach += chain.initial()[s] * h[s];
    if (sgn(reach) == 0) throw std::domain_error("oracle_condrew: target is unreachable");
    for (StateId t = 0; t < n; ++t) {
        if (in_target[t] && sgn(rew[t]) > 0) return Extended<Rational>::infinity();
    }

    // Conditioned chain on {h > 0}: P'(s,t) = P(s,t) h(t) / h(s); solve g = rew + Q' g.
    std::vector<StateId> live;
    std::vector<std::size_t> live_pos(n, 0);
    for (StateId s : tr) {
        if (sgn(h[s]) > 0) {
            live_pos[s] = live.size();
            live.push_back(s);
        }
    }
    const std::size_t m = live.size();
    if (m == 0) return Extended<Rational>(Rational(0));
    Matrix a(m, std::vector<Rational>(m, 0));
    Matrix b(m, std::vector<Rational>(1, 0));
    for (std::size_t i = 0; i < m; ++i) {
        StateId s = live[i];
        a[i][i] = 1;
        b[i][0] = rew[s];
        for (const auto& e : chain.transitions().row(s)) {
            if (c.recurrent[e.column] || sgn(h[e.column]) == 0) continue;
            a[i][live_pos[e.column]] -= e.value * h[e.column] / h[s];
        }
    }
    Matrix g = gauss_jordan(std::move(a), std::move(b));
    Rational value = 0;
    for (std::size_t i = 0; i < m; ++i) value += chain.initial()[live[i]] * h[live[i]] / reach * g[i][0];
    return Extended<Rational>(value);
}

Extended<Rational> oracle_total_reward(const MarkovChain<Rational>& chain, const std::vector<Rational>& reward) {
    Classification c = classify(chain);
    const std::vector<Rational> rew = per_visit_reward(chain, reward);
    for (StateId s = 0; s < chain.size(); ++s) {
        if (c.recurrent[s] && c.reachable[s] && sgn(rew[s]) > 0) return Extended<Rational>::infinity();
    }
    FundamentalMatrix fm = fundamental_matrix(chain);
    Rational total = 0;
    const std::size_t k = fm.transient.size();
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            total += chain.initial()[fm.transient[i]] * fm.n[i][j] * rew[fm.transient[j]];
        }
    }
    return Extended<Rational>(total);
}

Rational oracle_return_probability(const MarkovChain<Rational>& chain, StateId s) {
    check_size(chain);
    auto reach = reachability(chain);
    const std::size_t n = chain.size();
    std::vector<StateId> a_states;
    std::vector<std::size_t> pos(n, 0);
    for (StateId t = 0; t < n; ++t) {
        if (t != s && reach[t][s]) {
            pos[t] = a_states.size();
            a_states.push_back(t);
        }
    }
    const std::size_t k = a_states.size();
    std::vector<Rational> h(n, 0);
    h[s] = 1;
    if (k > 0) {
        Matrix a(k, std::vector<Rational>(k, 0));
        Matrix b(k, std::vector<Rational>(1, 0));
        for (std::size_t i = 0; i < k; ++i) {
            a[i][i] = 1;
            for (const auto& e : chain.transitions().row(a_states[i])) {
                if (e.column == s) {
                    b[i][0] += e.value;
                } else if (e.column != s && reach[e.column][s]) {
                    a[i][pos[e.column]] -= e.value;
                }
            }
        }
        Matrix x = gauss_jordan(std::move(a), std::move(b));
        for (std::size_t i = 0; i < k; ++i) h[a_states[i]] = x[i][0];
    }
    Rational ret = 0;
    for (const auto& e : chain.transitions().row(s)) ret += e.value * h[e.column];
    return ret;
}

MarkovChain<Rational> generate_fdr(unsigned n) {
    if (n == 0) throw std::invalid_argument("generate_fdr: N must be at least 1");
    const Rational half(1, 2);
    std::vector<std::string> names;
    std::vector<std::tuple<std::size_t, std::size_t, Rational>> triplets;
    if (n == 1) {
        // A one-sided die needs no coin flip.
        names = {"v1_c0", "f1"};
        triplets = {{0, 1, Rational(1)}, {1, 1, Rational(1)}};
        return MarkovChain<Rational>(std::move(names), SparseMatrix<Rational>::from_triplets(2, 2, std::move(triplets)),
                                     {Rational(1), Rational(0)});
    }
    // Loop states (v, c) with c < v < N after a restart; explore from (1, 0) in BFS order.
    std::map<std::pair<unsigned long, unsigned long>, std::size_t> index;
    std::vector<std::pair<unsigned long, unsigned long>> loop;
    std::vector<std::pair<std::size_t, long>> edges;  // (source loop state, target: >=0 loop, <0 face -k)
    auto intern = [&](unsigned long v, unsigned long c) {
        auto [it, inserted] = index.emplace(std::make_pair(v, c), loop.size());
        if (inserted) loop.emplace_back(v, c);
        return it->second;
    };
    intern(1, 0);
    for (std::size_t i = 0; i < loop.size(); ++i) {
        auto [v, c] = loop[i];
        for (unsigned long bit = 0; bit < 2; ++bit) {
            unsigned long v2 = 2 * v;
            unsigned long c2 = 2 * c + bit;
            if (v2 >= n) {
                if (c2 < n) {
                    edges.emplace_back(i, -static_cast<long>(c2 + 1));
                    continue;
                }
                v2 -= n;
                c2 -= n;
            }
            edges.emplace_back(i, static_cast<long>(intern(v2, c2)));
        }
    }
    const std::size_t loops = loop.size();
    for (const auto& [v, c] : loop) names.push_back("v" + std::to_string(v) + "_c" + std::to_string(c));
    for (unsigned f = 1; f <= n; ++f) names.push_back("f" + std::to_string(f));
    std::map<std::pair<std::size_t, std::size_t>, Rational> entries;
    for (const auto& [s, t] : edges) {
        std::size_t target = t >= 0 ? static_cast<std::size_t>(t) : loops + static_cast<std::size_t>(-t) - 1;
        entries[{s, target}] += half;
    }
    for (unsigned f = 0; f < n; ++f) entries[{loops + f, loops + f}] = 1;
    for (auto& [key, p] : entries) triplets.emplace_back(key.first, key.second, p);
    const std::size_t total = loops + n;
    std::vector<Rational> initial(total, 0);
    initial[0] = 1;
    return MarkovChain<Rational>(std::move(names),
                                 SparseMatrix<Rational>::from_triplets(total, total, std::move(triplets)),
                                 std::move(initial));
}

namespace {

// Platform-independent draws on top of the raw mt19937_64 stream (whose output sequence the
// standard fixes); std distributions are implementation-defined.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = (~std::uint64_t{0} / bound) * bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    bool chance(double p) {
        if (p >= 1.0) return true;
        const auto threshold = static_cast<std::uint64_t>(p * 9007199254740992.0);
        return (engine_() >> 11) < threshold;
    }

    // Random composition of 64 into k positive parts, as probabilities with denominator 64.
    std::vector<Rational> composition(std::size_t k) {
        std::vector<std::uint64_t> cuts;
        while (cuts.size() + 1 < k) {
            std::uint64_t c = 1 + below(63);
            if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
        }
        std::sort(cuts.begin(), cuts.end());
        std::vector<Rational> parts;
        std::uint64_t prev = 0;
        for (std::uint64_t c : cuts) {
            parts.emplace_back(static_cast<long>(c - prev), 64L);
            prev = c;
        }
        parts.emplace_back(static_cast<long>(64 - prev), 64L);
        for (auto& p : parts) p.canonicalize();
        return parts;
    }

private:
    std::mt19937_64 engine_;
};

constexpr std::size_t kMaxSupport = 64;

void add_row(std::vector<std::tuple<std::size_t, std::size_t, Rational>>& triplets, std::size_t s,
             std::vector<std::size_t> support, Draw& draw) {
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    while (support.size() > kMaxSupport) support.erase(support.begin() + static_cast<long>(draw.below(support.size())));
    std::vector<Rational> probs = draw.composition(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) triplets.emplace_back(s, support[i], probs[i]);
}

}  // namespace

MarkovChain<Rational> generate_random_chain(std::uint64_t seed, const RandomChainOptions& options) {
    const std::size_t n = options.states;
    if (n == 0) throw std::invalid_argument("generate_random_chain: need at least one state");
    if (!(options.density > 0.0 && options.density <= 1.0)) {
        throw std::invalid_argument("generate_random_chain: density must lie in (0, 1]");
    }
    if (options.bscc_count > n) throw std::invalid_argument("generate_random_chain: more BSCCs than states");
    if (options.max_bscc_size == 0) throw std::invalid_argument("generate_random_chain: max_bscc_size must be positive");
    if (options.density == 1.0 && options.bscc_count <= 1 && n > kMaxSupport) {
        throw std::invalid_argument("generate_random_chain: a complete graph needs at most 64 states");
    }
    Draw draw(seed);
    std::vector<std::tuple<std::size_t, std::size_t, Rational>> triplets;
    std::size_t transient_count = 0;

    if (options.bscc_count <= 1) {
        for (std::size_t s = 0; s < n; ++s) {
            std::vector<std::size_t> support;
            for (std::size_t t = 0; t < n; ++t) {
                if (draw.chance(options.density)) support.push_back(t);
            }
            if (support.empty()) support.push_back(draw.below(n));
            add_row(triplets, s, std::move(support), draw);
        }
        transient_count = n;
    } else {
        // Transient prefix, then closed blocks. Block sizes shrink until a transient state fits.
        const std::size_t k = options.bscc_count;
        std::vector<std::size_t> sizes(k);
        for (auto& m : sizes) m = 1 + draw.below(options.max_bscc_size);
        auto recurrent = [&] {
            std::size_t r = 0;
            for (auto m : sizes) r += m;
            return r;
        };
        while (recurrent() > n || (recurrent() == n && n > k)) {
            auto it = std::max_element(sizes.begin(), sizes.end());
            --*it;
        }
        transient_count = n - recurrent();
        for (std::size_t s = 0; s < transient_count; ++s) {
            std::vector<std::size_t> support{s + 1 + draw.below(n - s - 1)};
            for (std::size_t t = 0; t < n; ++t) {
                if (draw.chance(options.density)) support.push_back(t);
            }
            add_row(triplets, s, std::move(support), draw);
        }
        std::size_t start = transient_count;
        for (std::size_t m : sizes) {
            for (std::size_t i = 0; i < m; ++i) {
                std::vector<std::size_t> support{start + (i + 1) % m};
                for (std::size_t j = 0; j < m; ++j) {
                    if (draw.chance(options.density)) support.push_back(start + j);
                }
                add_row(triplets, start + i, std::move(support), draw);
            }
            start += m;
        }
    }

    std::vector<Rational> initial(n, 0);
    const std::size_t pool = transient_count > 0 ? transient_count : n;
    const std::size_t picks = 1 + draw.below(std::min<std::size_t>(3, pool));
    std::vector<std::size_t> starts;
    while (starts.size() < picks) {
        std::size_t s = draw.below(pool);
        if (std::find(starts.begin(), starts.end(), s) == starts.end()) starts.push_back(s);
    }
    std::vector<Rational> mass = draw.composition(picks);
    for (std::size_t i = 0; i < picks; ++i) initial[starts[i]] = mass[i];

    std::optional<std::vector<Rational>> rates;
    if (options.continuous_time) {
        rates.emplace();
        for (std::size_t s = 0; s < n; ++s) {
            Rational r(static_cast<long>(1 + draw.below(16)), static_cast<long>(1 + draw.below(4)));
            r.canonicalize();
            rates->push_back(r);
        }
    }
    std::map<std::string, std::vector<Rational>> rewards;
    if (options.with_reward) {
        auto& r = rewards["r"];
        for (std::size_t s = 0; s < n; ++s) {
            Rational v = 0;
            if (s < transient_count && options.bscc_count > 1) {
                v = Rational(static_cast<long>(draw.below(6)), static_cast<long>(1 + draw.below(4)));
                v.canonicalize();
            }
            r.push_back(v);
        }
    }
    std::vector<std::string> names;
    for (std::size_t s = 0; s < n; ++s) names.push_back("s" + std::to_string(s));
    return MarkovChain<Rational>(std::move(names), SparseMatrix<Rational>::from_triplets(n, n, std::move(triplets)),
                                 std::move(initial), std::move(rates), std::move(rewards));
}

}  // namespace evtkit::oracle
