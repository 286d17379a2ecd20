#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sls/errors.hpp"

namespace sls {

// Dense row-major matrix of doubles. Rows are samples, columns features.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

    std::span<const double> row(std::size_t r) const { return {row_ptr(r), cols}; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool empty() const { return rows == 0 || cols == 0; }
};

// Gather the given rows of `m` into a new matrix, in index order.
inline Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= m.rows) throw ShapeError("take_rows: row index out of range");
        const double* src = m.row_ptr(idx[r]);
        double* dst = out.row_ptr(r);
        for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c];
    }
    return out;
}

// Contiguous row slice [begin, end).
inline Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    if (begin > end || end > m.rows) throw ShapeError("slice_rows: bad range");
    Matrix out(end - begin, m.cols);
    for (std::size_t r = begin; r < end; ++r) {
        const double* src = m.row_ptr(r);
        double* dst = out.row_ptr(r - begin);
        for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c];
    }
    return out;
}

} // namespace sls
