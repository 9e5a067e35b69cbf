#ifndef SKGE_MATRIX_HPP
#define SKGE_MATRIX_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace skge {

// Dense row-major matrix. Rows are handed out as spans; embedding tables,
// gradient buffers and Adam moments are all instances of this.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(int64_t rows, int64_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * static_cast<size_t>(cols), fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<T> row(int64_t i) {
        return std::span<T>(data_.data() + i * cols_, static_cast<size_t>(cols_));
    }
    std::span<const T> row(int64_t i) const {
        return std::span<const T>(data_.data() + i * cols_, static_cast<size_t>(cols_));
    }

    T& operator()(int64_t i, int64_t j) { return data_[i * cols_ + j]; }
    const T& operator()(int64_t i, int64_t j) const { return data_[i * cols_ + j]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    void fill(T v) { data_.assign(data_.size(), v); }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    int64_t rows_ = 0;
    int64_t cols_ = 0;
    std::vector<T> data_;
};

}  // namespace skge

#endif  // SKGE_MATRIX_HPP
