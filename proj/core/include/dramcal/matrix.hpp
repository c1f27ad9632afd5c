#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dramcal {

// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> column(std::size_t c) const;
    std::vector<double> multiply(std::span<const double> x) const;             // A x
    std::vector<double> multiply_transposed(std::span<const double> v) const;  // A^T v

    // Copy with the listed columns only, in the given order.
    Matrix select_columns(std::span<const std::size_t> cols) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : init) {
        assert(r.size() == cols_);
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

inline std::vector<double> Matrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

inline std::vector<double> Matrix::multiply(std::span<const double> x) const {
    assert(x.size() == cols_);
    std::vector<double> out(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c) * x[c];
        out[r] = s;
    }
    return out;
}

inline std::vector<double> Matrix::multiply_transposed(std::span<const double> v) const {
    assert(v.size() == rows_);
    std::vector<double> out(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) out[c] += (*this)(r, c) * v[r];
    }
    return out;
}

inline Matrix Matrix::select_columns(std::span<const std::size_t> cols) const {
    Matrix out(rows_, cols.size());
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k) out(r, k) = (*this)(r, cols[k]);
    }
    return out;
}

}  // namespace dramcal
