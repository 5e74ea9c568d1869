#include "fg/pooling.hpp"

#include <algorithm>
#include <numeric>

#include "fg/error.hpp"

namespace fg {

FeatureBlock::FeatureBlock(Tensor t) : values(std::move(t)) {
  check_contract(values.rank() == 3, "feature block must be DxIxJ");
}

namespace {

void validate_k(const FeatureBlock& block, std::size_t k) {
  check_config(k >= 1 && k <= block.cells(),
               "pooling K must lie in [1, I*J]");
}

// Descending by value; equal values keep ascending flat index (stable sort of
// an ascending index sequence).
void sort_map_desc(std::span<const double> map, std::vector<std::size_t>& order) {
  order.resize(map.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return map[a] > map[b]; });
}

Tensor pool_forward(const FeatureBlock& block, const PoolConfig& cfg,
                    const std::vector<double>* weights, GkmpContext* ctx) {
  validate_k(block, cfg.k);
  const std::size_t d_count = block.maps();
  const std::size_t k = cfg.k;

  Tensor out({d_count});
  GkmpContext local;
  GkmpContext& c = ctx ? *ctx : local;
  c.maps = d_count;
  c.rows = block.rows();
  c.cols = block.cols();
  c.k = k;
  c.selected.assign(d_count * k, 0);
  c.top_values.assign(d_count * k, 0.0);
  c.weights = weights ? std::optional(*weights) : std::nullopt;

  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < d_count; ++d) {
    const auto map = block.map(d);
    sort_map_desc(map, order);
    double acc = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t at = order[r];
      const double v = map[at];
      c.selected[d * k + r] = at;
      c.top_values[d * k + r] = v;
      acc += weights ? (*weights)[r] * v : v;
    }
    out[d] = acc / static_cast<double>(k);
  }
  return out;
}

}  // namespace

SortedActivations sort_activations(const FeatureBlock& block) {
  SortedActivations s;
  s.maps = block.maps();
  s.cells = block.cells();
  s.values.resize(s.maps * s.cells);
  s.indices.resize(s.maps * s.cells);
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < s.maps; ++d) {
    const auto map = block.map(d);
    sort_map_desc(map, order);
    for (std::size_t r = 0; r < s.cells; ++r) {
      s.indices[d * s.cells + r] = order[r];
      s.values[d * s.cells + r] = map[order[r]];
    }
  }
  return s;
}

Tensor gkmp_forward(const FeatureBlock& block, const PoolConfig& cfg,
                    GkmpContext* ctx) {
  return pool_forward(block, cfg, nullptr, ctx);
}

Tensor gkmp_weighted_forward(const FeatureBlock& block, const PoolConfig& cfg,
                             GkmpContext* ctx) {
  check_config(cfg.weights.has_value(),
               "weighted pooling requires averaging weights");
  check_config(cfg.weights->size() == cfg.k,
               "averaging weights must have length K");
  return pool_forward(block, cfg, &*cfg.weights, ctx);
}

Tensor gkmp_backward(const GkmpContext& ctx, const Tensor& output_grad) {
  check_contract(output_grad.size() == ctx.maps,
                 "output gradient must have one entry per feature map");
  Tensor grad({ctx.maps, ctx.rows, ctx.cols});
  const double inv_k = 1.0 / static_cast<double>(ctx.k);
  const std::size_t cells = ctx.rows * ctx.cols;
  for (std::size_t d = 0; d < ctx.maps; ++d) {
    for (std::size_t r = 0; r < ctx.k; ++r) {
      const double w = ctx.weights ? (*ctx.weights)[r] : 1.0;
      grad[d * cells + ctx.selected[d * ctx.k + r]] +=
          output_grad[d] * w * inv_k;
    }
  }
  return grad;
}

Tensor gkmp_weight_gradient(const GkmpContext& ctx, const Tensor& output_grad) {
  check_contract(ctx.weights.has_value(),
                 "weight gradient only exists for the weighted variant");
  check_contract(output_grad.size() == ctx.maps,
                 "output gradient must have one entry per feature map");
  Tensor grad({ctx.k});
  const double inv_k = 1.0 / static_cast<double>(ctx.k);
  for (std::size_t d = 0; d < ctx.maps; ++d) {
    for (std::size_t r = 0; r < ctx.k; ++r) {
      grad[r] += output_grad[d] * ctx.top_values[d * ctx.k + r] * inv_k;
    }
  }
  return grad;
}

Tensor GkmpOp::forward(const std::vector<Tensor>& inputs) {
  check_contract(inputs.size() == (weighted_ ? 2u : 1u),
                 "GkmpOp expects {y} or {y, w}");
  FeatureBlock block(inputs[0]);
  PoolConfig cfg = weighted_
                       ? PoolConfig::weighted(
                             k_, std::vector<double>(inputs[1].values().begin(),
                                                     inputs[1].values().end()))
                       : PoolConfig::plain(k_);
  Tensor out = weighted_ ? gkmp_weighted_forward(block, cfg, &ctx_)
                         : gkmp_forward(block, cfg, &ctx_);
  forward_ran_ = true;
  return out;
}

std::vector<Tensor> GkmpOp::backward(const Tensor& output_grad) {
  check_contract(forward_ran_, "backward called before forward");
  std::vector<Tensor> grads;
  grads.push_back(gkmp_backward(ctx_, output_grad));
  if (weighted_) grads.push_back(gkmp_weight_gradient(ctx_, output_grad));
  return grads;
}

}  // namespace fg
