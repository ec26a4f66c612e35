// matrix.hpp — minimal row-major dense matrix of doubles.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"

namespace ctrl {

class Matrix {
public:
  Matrix() = default;
  Matrix(int64_t rows, int64_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), fill) {
    require(rows >= 0 && cols >= 0, errc::invalid_argument, "matrix: negative dimensions");
  }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }

  double& operator()(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * cols_ + j)]; }
  double operator()(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * cols_ + j)]; }

  std::span<double> row(int64_t i) { return {data_.data() + i * cols_, static_cast<size_t>(cols_)}; }
  std::span<const double> row(int64_t i) const {
    return {data_.data() + i * cols_, static_cast<size_t>(cols_)};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix& other) const = default;

private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace ctrl
