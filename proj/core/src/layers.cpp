#include "fg/layers.hpp"

#include <cmath>

#include "fg/error.hpp"
#include "fg/rng.hpp"

namespace fg {

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({out_channels, in_channels, kernel, kernel}),
      bias_({out_channels}),
      weight_grad_({out_channels, in_channels, kernel, kernel}),
      bias_grad_({out_channels}) {
  const double stddev =
      std::sqrt(2.0 / static_cast<double>(in_channels * kernel * kernel));
  fill_normal(weight_, rng, stddev);
}

Tensor Conv2d::forward(const Tensor& input) {
  check_contract(input.rank() == 4 && input.dim(1) == in_channels_,
                 "conv input must be N x Cin x H x W");
  input_ = input;
  const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
  const std::size_t out_h = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const std::size_t out_w = (w + 2 * pad_ - kernel_) / stride_ + 1;
  Tensor out({n, out_channels_, out_h, out_w});

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < out_channels_; ++co) {
      double* out_map = out.data() + ((b * out_channels_ + co) * out_h) * out_w;
      const double* kernel_base =
          weight_.data() + co * in_channels_ * kernel_ * kernel_;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          double acc = bias_[co];
          for (std::size_t ci = 0; ci < in_channels_; ++ci) {
            const double* in_map = input.data() + ((b * in_channels_ + ci) * h) * w;
            const double* kern = kernel_base + ci * kernel_ * kernel_;
            for (std::size_t ky = 0; ky < kernel_; ++ky) {
              const long iy = static_cast<long>(oy * stride_ + ky) -
                              static_cast<long>(pad_);
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < kernel_; ++kx) {
                const long ix = static_cast<long>(ox * stride_ + kx) -
                                static_cast<long>(pad_);
                if (ix < 0 || ix >= static_cast<long>(w)) continue;
                acc += kern[ky * kernel_ + kx] * in_map[iy * w + ix];
              }
            }
          }
          out_map[oy * out_w + ox] = acc;
        }
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const std::size_t n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const std::size_t out_h = grad_out.dim(2), out_w = grad_out.dim(3);
  check_contract(grad_out.dim(0) == n && grad_out.dim(1) == out_channels_,
                 "conv grad shape mismatch");
  Tensor grad_in({n, in_channels_, h, w});

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < out_channels_; ++co) {
      const double* gout_map =
          grad_out.data() + ((b * out_channels_ + co) * out_h) * out_w;
      const double* kernel_base =
          weight_.data() + co * in_channels_ * kernel_ * kernel_;
      double* kernel_grad_base =
          weight_grad_.data() + co * in_channels_ * kernel_ * kernel_;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const double g = gout_map[oy * out_w + ox];
          if (g == 0.0) continue;
          bias_grad_[co] += g;
          for (std::size_t ci = 0; ci < in_channels_; ++ci) {
            const double* in_map =
                input_.data() + ((b * in_channels_ + ci) * h) * w;
            double* gin_map = grad_in.data() + ((b * in_channels_ + ci) * h) * w;
            const double* kern = kernel_base + ci * kernel_ * kernel_;
            double* kern_grad = kernel_grad_base + ci * kernel_ * kernel_;
            for (std::size_t ky = 0; ky < kernel_; ++ky) {
              const long iy = static_cast<long>(oy * stride_ + ky) -
                              static_cast<long>(pad_);
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < kernel_; ++kx) {
                const long ix = static_cast<long>(ox * stride_ + kx) -
                                static_cast<long>(pad_);
                if (ix < 0 || ix >= static_cast<long>(w)) continue;
                kern_grad[ky * kernel_ + kx] += g * in_map[iy * w + ix];
                gin_map[iy * w + ix] += g * kern[ky * kernel_ + kx];
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

void Conv2d::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

Tensor ReluLayer::forward(const Tensor& input) {
  input_ = input;
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor ReluLayer::backward(const Tensor& grad_out) const {
  check_contract(grad_out.same_shape(input_), "relu grad shape mismatch");
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    if (input_[i] <= 0.0) grad_in[i] = 0.0;
  }
  return grad_in;
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}),
      weight_grad_({out_features, in_features}),
      bias_grad_({out_features}) {
  fill_normal(weight_, rng, std::sqrt(2.0 / static_cast<double>(in_features)));
}

Tensor Linear::forward(const Tensor& input) {
  check_contract(input.rank() == 2 && input.dim(1) == in_features_,
                 "linear input must be N x in");
  input_ = input;
  const std::size_t n = input.dim(0);
  Tensor out({n, out_features_});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out_features_; ++o) {
      double acc = bias_[o];
      for (std::size_t i = 0; i < in_features_; ++i) {
        acc += weight_[o * in_features_ + i] * input[b * in_features_ + i];
      }
      out[b * out_features_ + o] = acc;
    }
  }
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const std::size_t n = input_.dim(0);
  check_contract(grad_out.dim(0) == n && grad_out.dim(1) == out_features_,
                 "linear grad shape mismatch");
  Tensor grad_in({n, in_features_});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out_features_; ++o) {
      const double g = grad_out[b * out_features_ + o];
      bias_grad_[o] += g;
      for (std::size_t i = 0; i < in_features_; ++i) {
        weight_grad_[o * in_features_ + i] += g * input_[b * in_features_ + i];
        grad_in[b * in_features_ + i] += g * weight_[o * in_features_ + i];
      }
    }
  }
  return grad_in;
}

void Linear::zero_grad() {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

Tensor L2NormalizeLayer::forward(const Tensor& input) {
  check_contract(input.rank() == 2, "normalize input must be N x E");
  input_ = input;
  output_ = l2_normalize(input, 1);
  return output_;
}

Tensor L2NormalizeLayer::backward(const Tensor& grad_out) const {
  return l2_normalize_backward(input_, output_, grad_out, 1);
}

GkmpLayer::GkmpLayer(PoolingMode mode, std::size_t k) : mode_(mode), k_(k) {
  if (mode_ == PoolingMode::kGkmpWeighted) {
    weights_ = Tensor({k_});
    weights_.fill(1.0);
    weight_grad_ = Tensor({k_});
  }
}

std::size_t GkmpLayer::effective_k(std::size_t cells) const {
  switch (mode_) {
    case PoolingMode::kGap: return cells;
    case PoolingMode::kGmp: return 1;
    default: return k_;
  }
}

Tensor GkmpLayer::forward(const Tensor& blocks) {
  check_contract(blocks.rank() == 4, "pooling input must be N x D x I x J");
  batch_ = blocks.dim(0);
  maps_ = blocks.dim(1);
  rows_ = blocks.dim(2);
  cols_ = blocks.dim(3);
  const std::size_t cells = rows_ * cols_;
  const std::size_t k = effective_k(cells);
  check_config(k >= 1 && k <= cells, "pooling K must lie in [1, I*J]");

  PoolConfig cfg =
      weighted()
          ? PoolConfig::weighted(k, std::vector<double>(weights_.values().begin(),
                                                        weights_.values().end()))
          : PoolConfig::plain(k);

  contexts_.assign(batch_, GkmpContext{});
  Tensor out({batch_, maps_});
  const std::size_t block_len = maps_ * cells;
  for (std::size_t b = 0; b < batch_; ++b) {
    Tensor one({maps_, rows_, cols_},
               std::vector<double>(blocks.data() + b * block_len,
                                   blocks.data() + (b + 1) * block_len));
    FeatureBlock fb(std::move(one));
    const Tensor pooled = weighted() ? gkmp_weighted_forward(fb, cfg, &contexts_[b])
                                     : gkmp_forward(fb, cfg, &contexts_[b]);
    for (std::size_t d = 0; d < maps_; ++d) out[b * maps_ + d] = pooled[d];
  }
  return out;
}

Tensor GkmpLayer::backward(const Tensor& grad_out) {
  check_contract(grad_out.dim(0) == batch_ && grad_out.dim(1) == maps_,
                 "pooling grad shape mismatch");
  Tensor grad_in({batch_, maps_, rows_, cols_});
  const std::size_t block_len = maps_ * rows_ * cols_;
  for (std::size_t b = 0; b < batch_; ++b) {
    Tensor upstream({maps_}, std::vector<double>(grad_out.data() + b * maps_,
                                                 grad_out.data() + (b + 1) * maps_));
    const Tensor g = gkmp_backward(contexts_[b], upstream);
    for (std::size_t i = 0; i < block_len; ++i) grad_in[b * block_len + i] = g[i];
    if (weighted()) {
      weight_grad_ += gkmp_weight_gradient(contexts_[b], upstream);
    }
  }
  return grad_in;
}

void GkmpLayer::enable_weighted() {
  check_config(mode_ == PoolingMode::kGkmp,
               "weighted averaging requires a GKMP model");
  mode_ = PoolingMode::kGkmpWeighted;
  weights_ = Tensor({k_});
  weights_.fill(1.0);
  weight_grad_ = Tensor({k_});
}

void GkmpLayer::zero_grad() {
  if (weighted()) weight_grad_.fill(0.0);
}

}  // namespace fg
