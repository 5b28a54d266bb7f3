#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tspo/errors.hpp"

namespace tspo {

// Dense row-major matrix of 64-bit floats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // this (r×c) times other (c×k)
    Matrix matmul(const Matrix& other) const {
        if (cols != other.rows) throw InvalidArgumentError("matmul: inner dimensions differ");
        Matrix out(rows, other.cols);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t k = 0; k < cols; ++k) {
                double a = at(i, k);
                if (a == 0.0) continue;
                const double* brow = other.row(k);
                double* orow = out.row(i);
                for (std::size_t j = 0; j < other.cols; ++j) orow[j] += a * brow[j];
            }
        }
        return out;
    }

    Matrix transposed() const {
        Matrix out(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) out.at(j, i) = at(i, j);
        return out;
    }

    Matrix& add_inplace(const Matrix& o) {
        if (!same_shape(o)) throw InvalidArgumentError("add: shape mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }

    Matrix& scale_inplace(double s) {
        for (double& v : data) v *= s;
        return *this;
    }
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const double* a, std::size_t n) { return std::sqrt(dot(a, a, n)); }

}  // namespace tspo
