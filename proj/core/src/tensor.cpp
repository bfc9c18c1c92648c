#include "fullnorm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ContractError("Tensor: data length " + std::to_string(data_.size()) +
                        " does not match shape " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ContractError("Tensor::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimensions differ (" + shape_str(a) + " x " +
                        shape_str(b) + ")");
  }
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  Tensor c(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    auto out = c.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      auto brow = b.row(p);
      for (std::size_t j = 0; j < n; ++j) out[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& m) {
  Tensor t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> indices) {
  Tensor out(indices.size(), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m.rows()) throw ContractError("gather_rows: index out of range");
    auto src = m.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

ColumnStats column_stats(const Tensor& m) {
  if (m.rows() == 0) throw EmptyBatchError("column_stats: batch has no rows");
  const std::size_t b = m.rows();
  const std::size_t d = m.cols();
  ColumnStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < b; ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  for (auto& v : s.mean) v /= static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = r[j] - s.mean[j];
      s.var[j] += dv * dv;
    }
  }
  for (auto& v : s.var) v = std::max(0.0, v / static_cast<double>(b));
  return s;
}

std::vector<double> column_mean_of_squares(const Tensor& m) {
  if (m.rows() == 0) throw EmptyBatchError("column_mean_of_squares: batch has no rows");
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j] * r[j];
  }
  for (auto& v : out) v /= static_cast<double>(m.rows());
  return out;
}

double squared_norm(const Tensor& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ContractError("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

}  // namespace fullnorm
