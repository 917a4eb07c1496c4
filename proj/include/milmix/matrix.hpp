#ifndef MILMIX_MATRIX_HPP
#define MILMIX_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace milmix {

/// Dense row-major matrix.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
std::span<T> span_of(Matrix<T>& m) { return {m.data().data(), m.data().size()}; }
template <typename T>
std::span<const T> span_of(const Matrix<T>& m) { return {m.data().data(), m.data().size()}; }
template <typename T>
std::span<T> span_of(std::vector<T>& v) { return {v.data(), v.size()}; }
template <typename T>
std::span<const T> span_of(const std::vector<T>& v) { return {v.data(), v.size()}; }

template <typename T>
std::vector<std::size_t> shape_of(const Matrix<T>& m) { return {m.rows(), m.cols()}; }
template <typename T>
std::vector<std::size_t> shape_of(const std::vector<T>& v) { return {v.size()}; }

}  // namespace milmix

#endif  // MILMIX_MATRIX_HPP
