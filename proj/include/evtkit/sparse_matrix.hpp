#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "evtkit/numeric.hpp"

namespace evtkit {

/// Compressed sparse row matrix. Entries within a row are sorted by column; explicit
/// zeros are never stored.
template <Value V>
class SparseMatrix {
public:
    struct Entry {
        std::size_t column;
        V value;
    };

    SparseMatrix() : row_start_(1, 0) {}

    /// Builds from (row, column, value) triplets. Duplicate (row, column) pairs throw.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t columns,
                                      std::vector<std::tuple<std::size_t, std::size_t, V>> triplets) {
        std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        SparseMatrix m;
        m.rows_ = rows;
        m.columns_ = columns;
        m.row_start_.assign(rows + 1, 0);
        m.entries_.reserve(triplets.size());
        for (std::size_t k = 0; k < triplets.size(); ++k) {
            auto& [r, c, v] = triplets[k];
            if (r >= rows || c >= columns) throw std::out_of_range("sparse matrix index out of range");
            if (k > 0 && std::get<0>(triplets[k - 1]) == r && std::get<1>(triplets[k - 1]) == c) {
                throw std::invalid_argument("duplicate sparse matrix entry");
            }
            if (NumberTraits<V>::is_zero(v)) continue;
            m.entries_.push_back({c, std::move(v)});
            ++m.row_start_[r + 1];
        }
        for (std::size_t r = 0; r < rows; ++r) m.row_start_[r + 1] += m.row_start_[r];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t columns() const { return columns_; }
    std::size_t nonzeros() const { return entries_.size(); }

    std::span<const Entry> row(std::size_t r) const {
        return {entries_.data() + row_start_[r], row_start_[r + 1] - row_start_[r]};
    }

    /// Entry (r, c) or zero.
    V at(std::size_t r, std::size_t c) const {
        auto entries = row(r);
        auto it = std::lower_bound(entries.begin(), entries.end(), c,
                                   [](const Entry& e, std::size_t col) { return e.column < col; });
        if (it != entries.end() && it->column == c) return it->value;
        return NumberTraits<V>::zero();
    }

    SparseMatrix transposed() const {
        SparseMatrix t;
        t.rows_ = columns_;
        t.columns_ = rows_;
        t.row_start_.assign(columns_ + 1, 0);
        for (const auto& e : entries_) ++t.row_start_[e.column + 1];
        for (std::size_t c = 0; c < columns_; ++c) t.row_start_[c + 1] += t.row_start_[c];
        std::vector<std::size_t> fill(t.row_start_.begin(), t.row_start_.end() - 1);
        t.entries_.resize(entries_.size(), Entry{0, NumberTraits<V>::zero()});
        for (std::size_t r = 0; r < rows_; ++r) {
            for (const auto& e : row(r)) t.entries_[fill[e.column]++] = Entry{r, e.value};
        }
        return t;
    }

    bool operator==(const SparseMatrix& other) const {
        if (rows_ != other.rows_ || columns_ != other.columns_ || row_start_ != other.row_start_) return false;
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            if (entries_[k].column != other.entries_[k].column || !(entries_[k].value == other.entries_[k].value)) {
                return false;
            }
        }
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t columns_ = 0;
    std::vector<std::size_t> row_start_;
    std::vector<Entry> entries_;
};

}  // namespace evtkit
