#include "fg/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "fg/error.hpp"
#include "fg/rng.hpp"

namespace fg {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    check_config(d > 0, "tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_contract(shape_product(shape_) == data_.size(),
                 "tensor data length does not match shape product");
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> idx) const {
  check_contract(idx.size() == shape_.size(), "index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    check_contract(i < shape_[axis], "index out of bounds");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> idx) {
  return data_[flat_index(idx)];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  return data_[flat_index(idx)];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  check_contract(same_shape(other), "shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  check_contract(same_shape(other), "shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) {
  for (double& v : data_) v *= factor;
  return *this;
}

bool Tensor::identical(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(double)) == 0;
}

Tensor zeros_like(const Tensor& t) {
  return t.empty() ? Tensor() : Tensor(t.shape());
}

double dot(const Tensor& a, const Tensor& b) {
  check_contract(a.same_shape(b), "shape mismatch in dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const Tensor& a, const Tensor& b) {
  check_contract(a.same_shape(b), "shape mismatch in squared_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
}

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t.values()) v = rng.uniform(lo, hi);
}

namespace {

// Decomposes a shape for slice-wise iteration along `axis`:
// outer x len x inner with row-major strides.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Tensor& t, std::size_t axis) {
  check_contract(axis < t.rank(), "axis out of range");
  AxisSplit s;
  for (std::size_t a = 0; a < axis; ++a) s.outer *= t.dim(a);
  s.len = t.dim(axis);
  for (std::size_t a = axis + 1; a < t.rank(); ++a) s.inner *= t.dim(a);
  return s;
}

}  // namespace

Tensor l2_normalize(const Tensor& v, std::size_t axis) {
  const AxisSplit s = split_axis(v, axis);
  Tensor out = v;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double norm_sq = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        const double x = v[base + k * s.inner];
        norm_sq += x * x;
      }
      if (norm_sq == 0.0) continue;  // zero slice stays zero
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (std::size_t k = 0; k < s.len; ++k) {
        out[base + k * s.inner] = v[base + k * s.inner] * inv;
      }
    }
  }
  return out;
}

Tensor l2_normalize_backward(const Tensor& v, const Tensor& normalized,
                             const Tensor& grad_out, std::size_t axis) {
  check_contract(v.same_shape(normalized) && v.same_shape(grad_out),
                 "shape mismatch in l2_normalize_backward");
  const AxisSplit s = split_axis(v, axis);
  Tensor grad_in = grad_out;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double norm_sq = 0.0;
      double g_dot_f = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        const std::size_t at = base + k * s.inner;
        norm_sq += v[at] * v[at];
        g_dot_f += grad_out[at] * normalized[at];
      }
      if (norm_sq == 0.0) continue;
      const double inv = 1.0 / std::sqrt(norm_sq);
      // d/dv of f = v/|v|: (g - f (f.g)) / |v|
      for (std::size_t k = 0; k < s.len; ++k) {
        const std::size_t at = base + k * s.inner;
        grad_in[at] = (grad_out[at] - normalized[at] * g_dot_f) * inv;
      }
    }
  }
  return grad_in;
}

}  // namespace fg
