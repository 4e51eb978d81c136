#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "layerlens/errors.hpp"

namespace layerlens {

using Vector = std::vector<float>;

// Dense row-major float32 matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    float* row(std::size_t r) { return data.data() + r * cols; }
    const float* row(std::size_t r) const { return data.data() + r * cols; }

    bool operator==(const Matrix&) const = default;
};

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

// Standard product. Accumulates in float32 over k in left-to-right order, so
// repeated calls are bit-identical (several downstream checks compare
// activations bitwise).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw shape_error("matmul: incompatible shapes " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i);
        float* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const float aik = arow[k];
            const float* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

// y_i = gain_i * x_i / sqrt(mean(x_j^2) + epsilon)
inline Vector rms_norm(const Vector& x, const Vector& gain, float epsilon) {
    if (x.size() != gain.size()) {
        throw shape_error("rms_norm: x has dim " + std::to_string(x.size()) +
                          " but gain has dim " + std::to_string(gain.size()));
    }
    if (x.empty()) throw shape_error("rms_norm: empty input");
    float sum_sq = 0.0f;
    for (float v : x) sum_sq += v * v;
    const float inv = 1.0f / std::sqrt(sum_sq / float(x.size()) + epsilon);
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain[i] * x[i] * inv;
    return y;
}

// Max-subtracted softmax. Empty input gives empty output.
inline Vector softmax(const Vector& x) {
    Vector y(x.size());
    if (x.empty()) return y;
    float mx = x[0];
    for (float v : x) mx = std::max(mx, v);
    float sum = 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
    }
    const float inv = 1.0f / sum;
    for (float& v : y) v *= inv;
    return y;
}

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline float silu(float x) { return x * sigmoid(x); }

}  // namespace layerlens
