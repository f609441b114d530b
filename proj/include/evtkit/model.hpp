#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evtkit/errors.hpp"
#include "evtkit/numeric.hpp"
#include "evtkit/sparse_matrix.hpp"

namespace evtkit {

/// Row-sum / initial-mass tolerance of the float backend (2^-40). Rationals are checked exactly.
inline constexpr double kStochasticTolerance = 9.094947017729282e-13;

/// A finite DTMC, or a CTMC when exit rates are present. Immutable after construction;
/// the constructor validates every invariant and throws ModelError.
template <Value V>
class MarkovChain {
public:
    MarkovChain(std::vector<std::string> names, SparseMatrix<V> transitions, std::vector<V> initial,
                std::optional<std::vector<V>> rates = std::nullopt,
                std::map<std::string, std::vector<V>> rewards = {});

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(StateId s) const { return names_[s]; }
    std::optional<StateId> find_state(std::string_view name) const;

    const SparseMatrix<V>& transitions() const { return transitions_; }
    const std::vector<V>& initial() const { return initial_; }

    bool is_continuous_time() const { return rates_.has_value(); }
    const std::optional<std::vector<V>>& rates() const { return rates_; }

    const std::map<std::string, std::vector<V>>& rewards() const { return rewards_; }
    /// Throws ModelError if no reward structure of that name exists.
    const std::vector<V>& reward(const std::string& name) const;

    bool operator==(const MarkovChain& other) const = default;

private:
    std::vector<std::string> names_;
    SparseMatrix<V> transitions_;
    std::vector<V> initial_;
    std::optional<std::vector<V>> rates_;
    std::map<std::string, std::vector<V>> rewards_;
};

/// Parses the explicit text model format (see README). States are indexed in declaration order.
template <Value V>
MarkovChain<V> parse_model(std::string_view text);

/// Inverse of parse_model; exact for the rational backend.
template <Value V>
std::string serialize_model(const MarkovChain<V>& chain);

/// Embedded DTMC of a CTMC: same transitions, initial distribution and rewards, rates
/// dropped. Throws ModelError for a discrete-time input.
template <Value V>
MarkovChain<V> embed(const MarkovChain<V>& chain);

/// Backend conversion of an exactly parsed chain (rows re-normalized within tolerance).
template <Value To>
MarkovChain<To> convert_chain(const MarkovChain<Rational>& chain);

class SccDecomposition;

/// The chain split as P = (Q R; 0 *) with Q over transient states and R transient -> recurrent.
template <Value V>
struct TransientPartition {
    std::vector<StateId> transient;      // local transient index -> state
    std::vector<StateId> recurrent;      // local recurrent index -> state
    std::vector<std::size_t> local;      // state -> index within its own group
    SparseMatrix<V> q;
    SparseMatrix<V> r;
    std::vector<V> tau;                  // initial distribution restricted to transient states
};

template <Value V>
TransientPartition<V> transient_submatrix(const MarkovChain<V>& chain, const SccDecomposition& scc);

}  // namespace evtkit
