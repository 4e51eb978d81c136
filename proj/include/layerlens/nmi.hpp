#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "layerlens/errors.hpp"

namespace layerlens {

// Joint count table for two labelings of the same items. Rows index clusters
// of c, columns clusters of d.
struct ContingencyTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> counts;         // rows x cols, row-major
    std::vector<std::size_t> row_marginals;  // |c_i|
    std::vector<std::size_t> col_marginals;  // |d_j|
    std::size_t total = 0;

    std::size_t at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }
};

namespace detail {

inline std::size_t label_range(const std::vector<int>& labels, const char* who) {
    int max_label = -1;
    for (int l : labels) {
        if (l < 0) throw input_error(std::string(who) + ": negative cluster id");
        max_label = std::max(max_label, l);
    }
    return std::size_t(max_label) + 1;
}

}  // namespace detail

inline ContingencyTable contingency_table(const std::vector<int>& c, const std::vector<int>& d) {
    if (c.size() != d.size()) {
        throw input_error("contingency_table: label lengths differ, " + std::to_string(c.size()) +
                          " vs " + std::to_string(d.size()));
    }
    if (c.empty()) throw input_error("contingency_table: empty labelings");
    ContingencyTable t;
    t.rows = detail::label_range(c, "contingency_table");
    t.cols = detail::label_range(d, "contingency_table");
    t.counts.assign(t.rows * t.cols, 0);
    t.row_marginals.assign(t.rows, 0);
    t.col_marginals.assign(t.cols, 0);
    t.total = c.size();
    for (std::size_t i = 0; i < c.size(); ++i) {
        ++t.counts[std::size_t(c[i]) * t.cols + std::size_t(d[i])];
        ++t.row_marginals[std::size_t(c[i])];
        ++t.col_marginals[std::size_t(d[i])];
    }
    return t;
}

// Shannon entropy of a labeling, natural log: H = -sum_i P(i) ln P(i) over
// occupied clusters (empty clusters contribute nothing).
inline double entropy(const std::vector<int>& labels) {
    if (labels.empty()) throw input_error("entropy: empty labeling");
    const std::size_t k = detail::label_range(labels, "entropy");
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[std::size_t(l)];
    const double n = double(labels.size());
    double h = 0.0;
    for (std::size_t count : counts) {
        if (count == 0) continue;
        const double p = double(count) / n;
        h -= p * std::log(p);
    }
    return h;
}

// Mutual information, natural log:
// I = sum_ij P(i,j) ln(P(i,j) / (P(i) P(j))), zero-count cells contribute 0.
inline double mutual_information(const std::vector<int>& c, const std::vector<int>& d) {
    // MI is symmetric, but float summation order is not: canonicalize the
    // argument orientation so both call orders produce bit-identical sums.
    if (d < c) return mutual_information(d, c);
    const ContingencyTable t = contingency_table(c, d);
    const double n = double(t.total);
    double info = 0.0;
    for (std::size_t i = 0; i < t.rows; ++i) {
        for (std::size_t j = 0; j < t.cols; ++j) {
            const std::size_t nij = t.at(i, j);
            if (nij == 0) continue;
            const double pij = double(nij) / n;
            info += pij * std::log(double(nij) * n /
                                   (double(t.row_marginals[i]) * double(t.col_marginals[j])));
        }
    }
    return info;
}

// Arithmetic-mean normalized mutual information:
// NMI = I(C,D) / ((H(C) + H(D)) / 2), clamped into [0,1] against rounding.
// Degenerate cases follow the standard reference behavior: both labelings
// single-cluster -> 1.0; exactly one single-cluster -> 0.0. Identical
// labelings score exactly 1.0.
inline double nmi(const std::vector<int>& c, const std::vector<int>& d) {
    if (c.size() != d.size()) {
        throw input_error("nmi: label lengths differ, " + std::to_string(c.size()) + " vs " +
                          std::to_string(d.size()));
    }
    if (c.empty()) throw input_error("nmi: empty labelings");

    const bool c_single = std::all_of(c.begin(), c.end(), [&](int l) { return l == c[0]; });
    const bool d_single = std::all_of(d.begin(), d.end(), [&](int l) { return l == d[0]; });
    if (c_single && d_single) return 1.0;
    if (c_single || d_single) return 0.0;
    if (c == d) return 1.0;

    const double denom = 0.5 * (entropy(c) + entropy(d));
    const double value = mutual_information(c, d) / denom;
    return std::clamp(value, 0.0, 1.0);
}

}  // namespace layerlens
