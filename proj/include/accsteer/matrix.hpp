#ifndef ACCSTEER_MATRIX_HPP
#define ACCSTEER_MATRIX_HPP

#include <cassert>
#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

namespace accsteer {

/// Dense row-major float matrix. Rows are time steps, columns hidden units.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        assert(data_.size() == rows_ * cols_);
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<float> flat() noexcept { return data_; }
    std::span<const float> flat() const noexcept { return data_; }

    /// Value equality (0.0f == -0.0f).
    friend bool operator==(const Matrix&, const Matrix&) = default;

    /// Byte-for-byte equality.
    bool bit_equal(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_ &&
               (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

} // namespace accsteer

#endif // ACCSTEER_MATRIX_HPP
