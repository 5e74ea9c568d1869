#include "fg/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "fg/diff.hpp"
#include "fg/embedding.hpp"
#include "fg/error.hpp"
#include "fg/localization.hpp"
#include "fg/pooling.hpp"
#include "fg/rng.hpp"
#include "fg/tensor.hpp"

namespace fg {

namespace {

class L2NormalizeOp final : public DifferentiableOp {
 public:
  Tensor forward(const std::vector<Tensor>& inputs) override {
    check_contract(inputs.size() == 1, "L2NormalizeOp expects {v}");
    input_ = inputs[0];
    output_ = l2_normalize(input_, input_.rank() - 1);
    return output_;
  }

  std::vector<Tensor> backward(const Tensor& output_grad) override {
    return {l2_normalize_backward(input_, output_, output_grad,
                                  input_.rank() - 1)};
  }

 private:
  Tensor input_, output_;
};

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo,
                     double hi) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

// Activations with pairwise gaps far above the probe epsilon, so the
// finite-difference probes never straddle a rank swap in the k-max sort.
Tensor separated_activations(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  const std::size_t n = t.size();
  const double spacing = 2.0 / static_cast<double>(n);
  std::vector<double> levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    levels[i] = -1.0 + spacing * static_cast<double>(i) +
                rng.uniform(0.0, 0.25 * spacing);
  }
  rng.shuffle(levels);
  for (std::size_t i = 0; i < n; ++i) t[i] = levels[i];
  return t;
}

ClassMeanStore random_store(Rng& rng, std::size_t classes, std::size_t dim,
                            double spread) {
  ClassMeanStore store(classes, dim, 0.5);
  fill_normal(store.means, rng, spread);
  return store;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_index(classes));
  // Pin two distinct classes so the pair set is never empty.
  if (classes >= 2 && n >= 2) {
    labels[0] = 0;
    labels[1] = 1;
  }
  return labels;
}

using CheckBody = std::function<GradCheckResult(Rng&)>;

SuiteCheck run_check(const std::string& name, std::size_t seeds,
                     std::uint64_t base_seed, const CheckBody& body) {
  SuiteCheck check;
  check.name = name;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(base_seed + s * 7919);
    const GradCheckResult result = body(rng);
    check.worst_error = std::max(check.worst_error, result.worst_error);
    ++check.seeds_run;
    if (!result.passed) {
      check.passed = false;
      std::ostringstream msg;
      msg << "seed " << s << ": " << result.detail;
      check.detail = msg.str();
      break;
    }
  }
  return check;
}

}  // namespace

SuiteReport run_gradient_suite(std::size_t seeds_per_check,
                               std::uint64_t base_seed) {
  SuiteReport report;

  report.checks.push_back(run_check(
      "gkmp/activations", seeds_per_check, base_seed, [](Rng& rng) {
        const std::size_t d = 1 + rng.uniform_index(5);
        const std::size_t i = 1 + rng.uniform_index(5);
        const std::size_t j = 1 + rng.uniform_index(5);
        const std::size_t k = 1 + rng.uniform_index(i * j);
        GkmpOp op(k);
        WeightedOutputSum scalar(op, random_tensor(rng, {d}, -1.0, 1.0));
        return check_gradients(scalar, {separated_activations(rng, {d, i, j})});
      }));

  report.checks.push_back(run_check(
      "gkmp-weighted/activations+weights", seeds_per_check, base_seed,
      [](Rng& rng) {
        const std::size_t d = 1 + rng.uniform_index(5);
        const std::size_t i = 1 + rng.uniform_index(5);
        const std::size_t j = 1 + rng.uniform_index(5);
        const std::size_t k = 1 + rng.uniform_index(i * j);
        GkmpOp op(k, /*weighted=*/true);
        WeightedOutputSum scalar(op, random_tensor(rng, {d}, -1.0, 1.0));
        return check_gradients(scalar,
                               {separated_activations(rng, {d, i, j}),
                                random_tensor(rng, {k}, 0.2, 1.8)});
      }));

  report.checks.push_back(
      run_check("l2-normalize", seeds_per_check, base_seed, [](Rng& rng) {
        const std::size_t n = 1 + rng.uniform_index(4);
        const std::size_t e = 2 + rng.uniform_index(6);
        L2NormalizeOp op;
        WeightedOutputSum scalar(op, random_tensor(rng, {n, e}, -1.0, 1.0));
        // Entries bounded away from zero keep the row norms well conditioned
        // under the probe offsets.
        Tensor v({n, e});
        for (double& x : v.values()) {
          const double mag = rng.uniform(0.3, 1.0);
          x = rng.uniform() < 0.5 ? -mag : mag;
        }
        return check_gradients(scalar, {v});
      }));

  const auto embedding_check = [](EmbeddingLossOp::Term term) {
    return [term](Rng& rng) {
      const std::size_t classes = 2 + rng.uniform_index(3);
      const std::size_t n = 2 + rng.uniform_index(7);
      const std::size_t e = 2 + rng.uniform_index(7);
      ClassMeanStore store = random_store(rng, classes, e, 0.25);
      EmbeddingLossConfig cfg;  // margin 0.75 keeps hinges mostly active
      EmbeddingLossOp op(store, random_labels(rng, n, classes), cfg, term);
      Tensor features = random_tensor(rng, {n, e}, -1.0, 1.0);
      features = l2_normalize(features, 1);
      return check_gradients(op, {features});
    };
  };
  report.checks.push_back(run_check("within-class-loss", seeds_per_check,
                                    base_seed,
                                    embedding_check(EmbeddingLossOp::Term::kWithin)));
  report.checks.push_back(run_check("between-class-loss", seeds_per_check,
                                    base_seed,
                                    embedding_check(EmbeddingLossOp::Term::kBetween)));
  report.checks.push_back(run_check("embedding-loss", seeds_per_check, base_seed,
                                    embedding_check(EmbeddingLossOp::Term::kBoth)));

  report.checks.push_back(
      run_check("smooth-l1", seeds_per_check, base_seed, [](Rng& rng) {
        const std::size_t rows = 1 + rng.uniform_index(4);
        const std::size_t cols = 1 + rng.uniform_index(4);
        Heatmap target(rows, cols);
        fill_uniform(target.values, rng, -1.0, 1.0);
        // Residuals kept clear of |r| = 1 so the finite-difference probes
        // never straddle the quadratic/linear switch.
        Tensor predicted = target.values;
        for (double& v : predicted.values()) {
          const double r = rng.uniform() < 0.5 ? rng.uniform(-0.8, 0.8)
                                               : rng.uniform(1.2, 2.0);
          v += rng.uniform() < 0.5 ? r : -r;
        }
        SmoothL1Op op(std::move(target));
        return check_gradients(op, {predicted});
      }));

  report.checks.push_back(
      run_check("joint-loss", seeds_per_check, base_seed, [](Rng& rng) {
        const std::size_t classes = 2 + rng.uniform_index(3);
        const std::size_t n = 2 + rng.uniform_index(5);
        const std::size_t e = 3 + rng.uniform_index(4);
        ClassMeanStore store = random_store(rng, classes, e, 0.25);
        JointLossOp op(store, random_labels(rng, n, classes), EmbeddingLossConfig{});
        Tensor raw({n, e});
        fill_normal(raw, rng, 1.0);
        Tensor weight({classes, e});
        fill_normal(weight, rng, 0.5);
        return check_gradients(op, {raw, weight,
                                    random_tensor(rng, {classes}, -0.2, 0.2)});
      }));

  return report;
}

}  // namespace fg
