#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "layerlens/errors.hpp"
#include "layerlens/rng.hpp"
#include "layerlens/tensor.hpp"

namespace layerlens {

struct Clustering {
    std::size_t n_items = 0;
    std::size_t k = 0;
    std::vector<int> labels;  // n_items entries in [0, k)
    Matrix centroids;         // k x d
    double inertia = 0.0;     // sum of squared point-to-assigned-centroid distances
};

struct KMeansOptions {
    std::size_t max_iters = 300;
    // When set, receives the inertia after each Lloyd iteration
    // (assignment + empty-cluster repair, measured against that iteration's
    // centroids). Non-increasing across iterations.
    std::vector<double>* inertia_trace = nullptr;
};

namespace detail {

inline double sq_distance(const float* a, const float* b, std::size_t d) {
    double sum = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        const double diff = double(a[c]) - double(b[c]);
        sum += diff * diff;
    }
    return sum;
}

// Nearest-centroid assignment; ties go to the lowest centroid index.
// Returns per-point squared distance to the chosen centroid.
inline void assign_labels(const Matrix& points, const Matrix& centroids,
                          std::vector<int>& labels, std::vector<double>& dist_sq) {
    for (std::size_t t = 0; t < points.rows; ++t) {
        int best = 0;
        double best_d = sq_distance(points.row(t), centroids.row(0), points.cols);
        for (std::size_t c = 1; c < centroids.rows; ++c) {
            const double d = sq_distance(points.row(t), centroids.row(c), points.cols);
            if (d < best_d) {
                best_d = d;
                best = int(c);
            }
        }
        labels[t] = best;
        dist_sq[t] = best_d;
    }
}

// Keeps every cluster non-empty: each empty cluster (ascending id) steals the
// point farthest from its current centroid, considering only points whose
// cluster would stay non-empty; ties go to the lowest point index. The stolen
// point becomes the empty cluster's centroid, so its distance drops to zero
// and the total inertia cannot increase.
inline void repair_empty_clusters(const Matrix& points, Matrix& centroids,
                                  std::vector<int>& labels, std::vector<double>& dist_sq,
                                  std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[std::size_t(l)];
    for (std::size_t empty = 0; empty < k; ++empty) {
        if (counts[empty] != 0) continue;
        std::size_t victim = points.rows;
        double worst = -1.0;
        for (std::size_t t = 0; t < points.rows; ++t) {
            if (counts[std::size_t(labels[t])] < 2) continue;
            if (dist_sq[t] > worst) {
                worst = dist_sq[t];
                victim = t;
            }
        }
        if (victim == points.rows) continue;  // all donors are singletons
        --counts[std::size_t(labels[victim])];
        labels[victim] = int(empty);
        counts[empty] = 1;
        const float* p = points.row(victim);
        std::copy(p, p + points.cols, centroids.row(empty));
        dist_sq[victim] = 0.0;
    }
}

inline void update_centroids(const Matrix& points, const std::vector<int>& labels,
                             Matrix& centroids, std::size_t k) {
    std::vector<double> sums(k * points.cols, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t t = 0; t < points.rows; ++t) {
        const std::size_t c = std::size_t(labels[t]);
        ++counts[c];
        const float* p = points.row(t);
        double* s = &sums[c * points.cols];
        for (std::size_t j = 0; j < points.cols; ++j) s[j] += double(p[j]);
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;  // repair handles empties each round
        float* row = centroids.row(c);
        const double* s = &sums[c * points.cols];
        for (std::size_t j = 0; j < points.cols; ++j) {
            row[j] = float(s[j] / double(counts[c]));
        }
    }
}

// k-means++ seeding: the first center is drawn uniformly; each later center
// is drawn with probability proportional to the squared distance to the
// nearest chosen center. If every remaining point coincides with a chosen
// center (total weight 0), the lowest-index unchosen point is taken.
inline Matrix kmeanspp_init(const Matrix& points, std::size_t k, Rng& rng) {
    Matrix centroids(k, points.cols);
    std::vector<bool> chosen(points.rows, false);
    std::vector<double> d2(points.rows, std::numeric_limits<double>::infinity());

    std::size_t first = std::size_t(rng.next_below(points.rows));
    chosen[first] = true;
    std::copy(points.row(first), points.row(first) + points.cols, centroids.row(0));

    for (std::size_t c = 1; c < k; ++c) {
        const float* latest = centroids.row(c - 1);
        double total = 0.0;
        for (std::size_t t = 0; t < points.rows; ++t) {
            d2[t] = std::min(d2[t], sq_distance(points.row(t), latest, points.cols));
            if (!chosen[t]) total += d2[t];
        }

        std::size_t pick = points.rows;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double cumulative = 0.0;
            for (std::size_t t = 0; t < points.rows; ++t) {
                if (chosen[t]) continue;
                cumulative += d2[t];
                if (r < cumulative) {
                    pick = t;
                    break;
                }
            }
            if (pick == points.rows) {  // rounding pushed r past the last bin
                for (std::size_t t = points.rows; t-- > 0;) {
                    if (!chosen[t]) {
                        pick = t;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t t = 0; t < points.rows; ++t) {
                if (!chosen[t]) {
                    pick = t;
                    break;
                }
            }
        }
        chosen[pick] = true;
        std::copy(points.row(pick), points.row(pick) + points.cols, centroids.row(c));
    }
    return centroids;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ initialization. Deterministic given
// (points, k, seed); converges when an iteration leaves every assignment
// unchanged, or after options.max_iters iterations.
inline Clustering kmeans(const Matrix& points, std::size_t k, uint64_t seed,
                         const KMeansOptions& options = {}) {
    if (k < 1) throw input_error("kmeans: k must be >= 1");
    if (points.rows < k) {
        throw input_error("kmeans: " + std::to_string(points.rows) + " points < k = " +
                          std::to_string(k));
    }
    if (points.cols == 0) throw input_error("kmeans: points have zero dimensions");
    for (float v : points.data) {
        if (!std::isfinite(v)) throw input_error("kmeans: non-finite point coordinate");
    }

    Rng rng(seed);
    Clustering cl;
    cl.n_items = points.rows;
    cl.k = k;
    cl.centroids = detail::kmeanspp_init(points, k, rng);
    cl.labels.assign(points.rows, 0);
    std::vector<double> dist_sq(points.rows, 0.0);

    detail::assign_labels(points, cl.centroids, cl.labels, dist_sq);
    detail::repair_empty_clusters(points, cl.centroids, cl.labels, dist_sq, k);

    std::vector<int> prev_labels;
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        prev_labels = cl.labels;
        detail::update_centroids(points, cl.labels, cl.centroids, k);
        detail::assign_labels(points, cl.centroids, cl.labels, dist_sq);
        detail::repair_empty_clusters(points, cl.centroids, cl.labels, dist_sq, k);
        if (options.inertia_trace) {
            double inertia = 0.0;
            for (double d : dist_sq) inertia += d;
            options.inertia_trace->push_back(inertia);
        }
        if (cl.labels == prev_labels) break;
    }

    cl.inertia = 0.0;
    for (double d : dist_sq) cl.inertia += d;
    return cl;
}

}  // namespace layerlens
