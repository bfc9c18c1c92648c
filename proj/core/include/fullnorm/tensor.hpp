#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fullnorm {

/// Dense row-major matrix of doubles. Every batch, weight matrix and
/// gradient in the library is one of these.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double value);
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C = A * B with a fixed i-k-j accumulation order, so results are
/// reproducible bit for bit.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& m);

/// Rows of `m` selected by `indices`, in order.
Tensor gather_rows(const Tensor& m, std::span<const std::size_t> indices);

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> var;  // population variance, clamped at 0
};

/// Per-column population mean and variance (divisor = rows).
ColumnStats column_stats(const Tensor& m);

/// Per-column mean of squares.
std::vector<double> column_mean_of_squares(const Tensor& m);

double squared_norm(const Tensor& m);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace fullnorm
