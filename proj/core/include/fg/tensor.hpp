#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fg {

class Rng;

// Dense n-dimensional array of 64-bit reals, row-major. The universal value
// carrier of the library: feature blocks, embeddings, class means, images,
// parameters and their gradients are all Tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Row-major multi-index access, bounds-checked.
  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double factor);

  // True when shapes and every element compare bit-equal.
  bool identical(const Tensor& other) const;

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> idx) const;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

Tensor zeros_like(const Tensor& t);

double dot(const Tensor& a, const Tensor& b);
double squared_distance(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& t);

// Fills with N(0, stddev) draws, in index order.
void fill_normal(Tensor& t, Rng& rng, double stddev);
void fill_uniform(Tensor& t, Rng& rng, double lo, double hi);

// Scales every slice along `axis` to unit Euclidean norm. Slices with zero
// norm are returned unchanged so no NaN can be produced.
Tensor l2_normalize(const Tensor& v, std::size_t axis);

// Gradient of sum_i(g_i * normalize(v)_i) with respect to v, one slice at a
// time. Zero-norm slices pass the gradient through untouched, matching the
// identity behaviour of the forward.
Tensor l2_normalize_backward(const Tensor& v, const Tensor& normalized,
                             const Tensor& grad_out, std::size_t axis);

}  // namespace fg
