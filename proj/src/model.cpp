#include "evtkit/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace evtkit {

namespace {

template <Value V>
bool sums_to_one(const V& sum) {
    if constexpr (kIsRational<V>) {
        return sum == 1;
    } else {
        return std::fabs(sum - 1.0) <= kStochasticTolerance;
    }
}

template <Value V>
bool is_probability(const V& p) {
    if constexpr (!kIsRational<V>) {
        if (!std::isfinite(p)) return false;
    }
    return !(p < 0) && !(p > 1);
}

bool valid_name(const std::string& name) {
    if (name.empty() || name.front() == '@') return false;
    for (char c : name) {
        if (c == '#' || std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

}  // namespace

template <Value V>
MarkovChain<V>::MarkovChain(std::vector<std::string> names, SparseMatrix<V> transitions, std::vector<V> initial,
                            std::optional<std::vector<V>> rates, std::map<std::string, std::vector<V>> rewards)
    : names_(std::move(names)),
      transitions_(std::move(transitions)),
      initial_(std::move(initial)),
      rates_(std::move(rates)),
      rewards_(std::move(rewards)) {
    const std::size_t n = names_.size();
    if (n == 0) throw ModelError("a chain needs at least one state");
    std::unordered_map<std::string, StateId> seen;
    for (StateId s = 0; s < n; ++s) {
        if (!valid_name(names_[s])) throw ModelError("invalid state name '" + names_[s] + "'");
        if (!seen.emplace(names_[s], s).second) throw ModelError("duplicate state '" + names_[s] + "'");
    }
    if (transitions_.rows() != n || transitions_.columns() != n) {
        throw ModelError("transition matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    for (StateId s = 0; s < n; ++s) {
        V sum = NumberTraits<V>::zero();
        for (const auto& e : transitions_.row(s)) {
            if (!is_probability(e.value)) {
                throw ModelError("probability out of range on transition " + names_[s] + " -> " + names_[e.column]);
            }
            sum += e.value;
        }
        if (!sums_to_one(sum)) {
            throw ModelError("outgoing probabilities of state " + names_[s] + " sum to " + format_number(sum) +
                             " instead of 1");
        }
    }
    if (initial_.size() != n) throw ModelError("initial distribution has the wrong length");
    V mass = NumberTraits<V>::zero();
    for (StateId s = 0; s < n; ++s) {
        if (!is_probability(initial_[s])) throw ModelError("initial probability of " + names_[s] + " out of range");
        mass += initial_[s];
    }
    if (!sums_to_one(mass)) throw ModelError("initial distribution sums to " + format_number(mass) + " instead of 1");
    if (rates_) {
        if (rates_->size() != n) throw ModelError("rate vector has the wrong length");
        for (StateId s = 0; s < n; ++s) {
            const V& r = (*rates_)[s];
            bool ok = r > 0;
            if constexpr (!kIsRational<V>) ok = ok && std::isfinite(r);
            if (!ok) throw ModelError("exit rate of " + names_[s] + " must be positive");
        }
    }
    for (const auto& [name, values] : rewards_) {
        if (!valid_name(name)) throw ModelError("invalid reward name '" + name + "'");
        if (values.size() != n) throw ModelError("reward '" + name + "' has the wrong length");
        for (StateId s = 0; s < n; ++s) {
            bool ok = !(values[s] < 0);
            if constexpr (!kIsRational<V>) ok = ok && std::isfinite(values[s]);
            if (!ok) throw ModelError("reward '" + name + "' of " + names_[s] + " must be non-negative and finite");
        }
    }
}

template <Value V>
std::optional<StateId> MarkovChain<V>::find_state(std::string_view name) const {
    for (StateId s = 0; s < names_.size(); ++s) {
        if (names_[s] == name) return s;
    }
    return std::nullopt;
}

template <Value V>
const std::vector<V>& MarkovChain<V>::reward(const std::string& name) const {
    auto it = rewards_.find(name);
    if (it == rewards_.end()) throw ModelError("unknown reward structure '" + name + "'");
    return it->second;
}

namespace {

enum class Section { kNone, kStates, kInitial, kTransitions, kRates, kReward };

std::vector<std::string> tokenize(std::string_view line) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) tokens.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return tokens;
}

template <Value V>
class ModelParser {
public:
    MarkovChain<V> parse(std::string_view text) {
        std::size_t line_no = 0;
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            ++line_no;
            line_ = line_no;
            handle(tokenize(text.substr(start, end - start)));
            start = end + 1;
        }
        line_ = 0;
        return finish();
    }

private:
    [[noreturn]] void fail(const std::string& message) const { throw ModelError(message, line_); }

    V number(const std::string& token, const char* what) const {
        try {
            return parse_number<V>(token);
        } catch (const std::invalid_argument&) {
            fail(std::string("malformed ") + what + " '" + token + "'");
        }
    }

    StateId state(const std::string& name) {
        auto it = index_.find(name);
        if (it != index_.end()) return it->second;
        if (explicit_states_) fail("unknown state '" + name + "'");
        if (!valid_name(name)) fail("invalid state name '" + name + "'");
        index_.emplace(name, names_.size());
        names_.push_back(name);
        return names_.size() - 1;
    }

    void expect_arity(const std::vector<std::string>& tokens, std::size_t n, const char* shape) const {
        if (tokens.size() != n) fail(std::string("expected '") + shape + "'");
    }

    void handle(const std::vector<std::string>& tokens) {
        if (tokens.empty()) return;
        if (tokens[0].front() == '@') return directive(tokens);
        switch (section_) {
            case Section::kNone:
                fail("content before the first section");
            case Section::kStates:
                for (const auto& name : tokens) {
                    if (!valid_name(name)) fail("invalid state name '" + name + "'");
                    if (!index_.emplace(name, names_.size()).second) fail("duplicate state '" + name + "'");
                    names_.push_back(name);
                }
                explicit_states_ = true;
                return;
            case Section::kInitial: {
                expect_arity(tokens, 2, "state probability");
                StateId s = state(tokens[0]);
                V p = number(tokens[1], "probability");
                if (!is_probability(p)) fail("initial probability out of range for " + tokens[0]);
                if (!initial_.emplace(s, std::move(p)).second) fail("duplicate initial entry for " + tokens[0]);
                return;
            }
            case Section::kTransitions: {
                expect_arity(tokens, 3, "source target probability");
                StateId s = state(tokens[0]);
                StateId t = state(tokens[1]);
                V p = number(tokens[2], "probability");
                if (!is_probability(p)) fail("probability out of range on " + tokens[0] + " -> " + tokens[1]);
                if (!transitions_.emplace(std::make_pair(s, t), std::move(p)).second) {
                    fail("duplicate transition " + tokens[0] + " -> " + tokens[1]);
                }
                return;
            }
            case Section::kRates: {
                expect_arity(tokens, 2, "state rate");
                StateId s = state(tokens[0]);
                V r = number(tokens[1], "rate");
                if (!(r > 0)) fail("exit rate of " + tokens[0] + " must be positive");
                if (!rates_.emplace(s, std::move(r)).second) fail("duplicate rate for " + tokens[0]);
                return;
            }
            case Section::kReward: {
                expect_arity(tokens, 2, "state value");
                StateId s = state(tokens[0]);
                V r = number(tokens[1], "reward");
                if (r < 0) fail("reward of " + tokens[0] + " must be non-negative");
                if (!rewards_[reward_name_].emplace(s, std::move(r)).second) {
                    fail("duplicate reward entry for " + tokens[0]);
                }
                return;
            }
        }
    }

    void directive(const std::vector<std::string>& tokens) {
        const std::string& d = tokens[0];
        if (d == "@type") {
            expect_arity(tokens, 2, "@type dtmc|ctmc");
            if (tokens[1] != "dtmc" && tokens[1] != "ctmc") fail("unknown model type '" + tokens[1] + "'");
            if (type_seen_) fail("duplicate @type");
            type_seen_ = true;
            continuous_ = tokens[1] == "ctmc";
            section_ = Section::kNone;
        } else if (d == "@states") {
            if (tokens.size() > 2) fail("expected '@states [count]'");
            if (!names_.empty()) fail("@states must precede every state reference");
            if (tokens.size() == 2) {
                try {
                    declared_count_ = std::stoul(tokens[1]);
                } catch (const std::exception&) {
                    fail("malformed state count '" + tokens[1] + "'");
                }
            }
            section_ = Section::kStates;
        } else if (d == "@initial") {
            expect_arity(tokens, 1, "@initial");
            section_ = Section::kInitial;
        } else if (d == "@transitions") {
            expect_arity(tokens, 1, "@transitions");
            section_ = Section::kTransitions;
        } else if (d == "@rates") {
            expect_arity(tokens, 1, "@rates");
            if (!continuous_) fail("rates declared for a dtmc");
            section_ = Section::kRates;
        } else if (d == "@reward") {
            expect_arity(tokens, 2, "@reward name");
            if (!valid_name(tokens[1])) fail("invalid reward name '" + tokens[1] + "'");
            if (rewards_.count(tokens[1])) fail("duplicate reward structure '" + tokens[1] + "'");
            reward_name_ = tokens[1];
            rewards_[reward_name_];
            section_ = Section::kReward;
        } else {
            fail("unknown directive '" + d + "'");
        }
    }

    MarkovChain<V> finish() {
        const std::size_t n = names_.size();
        if (declared_count_ && *declared_count_ != n) {
            throw ModelError("@states declares " + std::to_string(*declared_count_) + " states but " +
                             std::to_string(n) + " are used");
        }
        if (n == 0) throw ModelError("model declares no states");
        std::vector<std::tuple<std::size_t, std::size_t, V>> triplets;
        triplets.reserve(transitions_.size());
        std::vector<V> row_sum(n, NumberTraits<V>::zero());
        for (auto& [key, p] : transitions_) {
            row_sum[key.first] += p;
            triplets.emplace_back(key.first, key.second, p);
        }
        if constexpr (!kIsRational<V>) {
            // Decimal literals are rarely exact in binary; fold tiny defects back into the row.
            for (auto& [s, t, p] : triplets) {
                if (std::fabs(row_sum[s] - 1.0) <= kStochasticTolerance && row_sum[s] != 1.0) p /= row_sum[s];
            }
        }
        std::vector<V> initial(n, NumberTraits<V>::zero());
        V mass = NumberTraits<V>::zero();
        for (auto& [s, p] : initial_) {
            initial[s] = p;
            mass += p;
        }
        if constexpr (!kIsRational<V>) {
            if (std::fabs(mass - 1.0) <= kStochasticTolerance && mass != 1.0) {
                for (auto& p : initial) p /= mass;
            }
        }
        std::optional<std::vector<V>> rates;
        if (continuous_) {
            rates.emplace(n, NumberTraits<V>::zero());
            for (StateId s = 0; s < n; ++s) {
                auto it = rates_.find(s);
                if (it == rates_.end()) throw ModelError("missing exit rate for state " + names_[s]);
                (*rates)[s] = it->second;
            }
        }
        std::map<std::string, std::vector<V>> rewards;
        for (auto& [name, entries] : rewards_) {
            std::vector<V> values(n, NumberTraits<V>::zero());
            for (auto& [s, r] : entries) values[s] = r;
            rewards.emplace(name, std::move(values));
        }
        SparseMatrix<V> matrix;
        try {
            matrix = SparseMatrix<V>::from_triplets(n, n, std::move(triplets));
        } catch (const std::invalid_argument& e) {
            throw ModelError(e.what());
        }
        return MarkovChain<V>(names_, std::move(matrix), std::move(initial), std::move(rates), std::move(rewards));
    }

    std::size_t line_ = 0;
    Section section_ = Section::kNone;
    bool type_seen_ = false;
    bool continuous_ = false;
    bool explicit_states_ = false;
    std::optional<std::size_t> declared_count_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, StateId> index_;
    std::map<StateId, V> initial_;
    std::map<std::pair<StateId, StateId>, V> transitions_;
    std::map<StateId, V> rates_;
    std::map<std::string, std::map<StateId, V>> rewards_;
    std::string reward_name_;
};

}  // namespace

template <Value V>
MarkovChain<V> parse_model(std::string_view text) {
    return ModelParser<V>().parse(text);
}

template <Value V>
std::string serialize_model(const MarkovChain<V>& chain) {
    std::ostringstream out;
    out << "@type " << (chain.is_continuous_time() ? "ctmc" : "dtmc") << '\n';
    out << "@states " << chain.size() << '\n';
    for (const auto& name : chain.names()) out << name << '\n';
    out << "@initial\n";
    for (StateId s = 0; s < chain.size(); ++s) {
        if (!NumberTraits<V>::is_zero(chain.initial()[s])) {
            out << chain.name(s) << ' ' << format_number(chain.initial()[s]) << '\n';
        }
    }
    out << "@transitions\n";
    for (StateId s = 0; s < chain.size(); ++s) {
        for (const auto& e : chain.transitions().row(s)) {
            out << chain.name(s) << ' ' << chain.name(e.column) << ' ' << format_number(e.value) << '\n';
        }
    }
    if (chain.rates()) {
        out << "@rates\n";
        for (StateId s = 0; s < chain.size(); ++s) {
            out << chain.name(s) << ' ' << format_number((*chain.rates())[s]) << '\n';
        }
    }
    for (const auto& [name, values] : chain.rewards()) {
        out << "@reward " << name << '\n';
        for (StateId s = 0; s < chain.size(); ++s) {
            if (!NumberTraits<V>::is_zero(values[s])) out << chain.name(s) << ' ' << format_number(values[s]) << '\n';
        }
    }
    return out.str();
}

template <Value V>
MarkovChain<V> embed(const MarkovChain<V>& chain) {
    if (!chain.is_continuous_time()) throw ModelError("embed: the chain is already discrete-time");
    return MarkovChain<V>(chain.names(), chain.transitions(), chain.initial(), std::nullopt, chain.rewards());
}

template <Value To>
MarkovChain<To> convert_chain(const MarkovChain<Rational>& chain) {
    if constexpr (kIsRational<To>) {
        return chain;
    } else {
        const std::size_t n = chain.size();
        std::vector<std::tuple<std::size_t, std::size_t, double>> triplets;
        for (StateId s = 0; s < n; ++s) {
            double sum = 0.0;
            std::size_t first = triplets.size();
            for (const auto& e : chain.transitions().row(s)) {
                triplets.emplace_back(s, e.column, convert_value<double>(e.value));
                sum += std::get<2>(triplets.back());
            }
            if (sum != 1.0) {
                for (std::size_t k = first; k < triplets.size(); ++k) std::get<2>(triplets[k]) /= sum;
            }
        }
        std::vector<double> initial(n);
        double mass = 0.0;
        for (StateId s = 0; s < n; ++s) mass += initial[s] = convert_value<double>(chain.initial()[s]);
        if (mass != 1.0) {
            for (auto& p : initial) p /= mass;
        }
        std::optional<std::vector<double>> rates;
        if (chain.rates()) {
            rates.emplace();
            for (const auto& r : *chain.rates()) rates->push_back(convert_value<double>(r));
        }
        std::map<std::string, std::vector<double>> rewards;
        for (const auto& [name, values] : chain.rewards()) {
            auto& out = rewards[name];
            for (const auto& r : values) out.push_back(convert_value<double>(r));
        }
        return MarkovChain<double>(chain.names(), SparseMatrix<double>::from_triplets(n, n, std::move(triplets)),
                                   std::move(initial), std::move(rates), std::move(rewards));
    }
}

template class MarkovChain<double>;
template class MarkovChain<Rational>;
template MarkovChain<double> parse_model<double>(std::string_view);
template MarkovChain<Rational> parse_model<Rational>(std::string_view);
template std::string serialize_model<double>(const MarkovChain<double>&);
template std::string serialize_model<Rational>(const MarkovChain<Rational>&);
template MarkovChain<double> embed<double>(const MarkovChain<double>&);
template MarkovChain<Rational> embed<Rational>(const MarkovChain<Rational>&);
template MarkovChain<double> convert_chain<double>(const MarkovChain<Rational>&);
template MarkovChain<Rational> convert_chain<Rational>(const MarkovChain<Rational>&);

}  // namespace evtkit
