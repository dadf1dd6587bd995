#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "adfilt/errors.hpp"

namespace adfilt {

/// Dense row-major tensor of 64-bit floats. Shapes are immutable after
/// construction; data is mutable through data()/at().
class Tensor {
public:
  using Shape = std::vector<std::size_t>;

  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-initialized
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor full(Shape shape, double v);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  /// 2-D tensor from nested braces, e.g. Tensor::matrix({{1,2},{3,4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  bool is_scalar() const { return data_.size() == 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i) { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * stride(0) + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[i * stride(0) + j * stride(1) + k];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[i * stride(0) + j * stride(1) + k * stride(2) + l];
  }
  double at(std::size_t i) const { return data_[i]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * stride(0) + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[i * stride(0) + j * stride(1) + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[i * stride(0) + j * stride(1) + k * stride(2) + l];
  }

  /// Row-major stride of axis i (product of dims after i).
  std::size_t stride(std::size_t i) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void fill(double v);
  Tensor reshaped(Shape shape) const;  // same size, new shape

  std::string shape_str() const;
  static std::string shape_str(const Shape& s);

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Max |a-b| over elements; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace adfilt
