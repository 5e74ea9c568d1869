#include "fg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fg/error.hpp"
#include "fg/rng.hpp"
#include "fg/tensor_io.hpp"

namespace fg {

namespace {

using nlohmann::json;

// Class appearance. All classes render the same kind of striped lobed blob;
// only these three parameters move between classes.
struct ClassStyle {
  std::size_t lobes;
  double stripe_freq;  // stripe cycles per object diameter
  double lobe_depth;
};

ClassStyle class_style(std::size_t c) {
  return ClassStyle{
      4 + c % 3,
      5.0 + 1.4 * static_cast<double>(c),
      0.10 + 0.03 * static_cast<double>(c % 4),
  };
}

SyntheticSample render_sample(const DatasetSpec& spec, std::size_t label, Rng rng) {
  const std::size_t size = spec.image_size;
  const double sized = static_cast<double>(size);
  const ClassStyle style = class_style(label);

  SyntheticSample sample;
  sample.label = static_cast<int>(label);
  sample.image = Tensor({spec.channels, size, size});

  // Cluttered background: base level, two low-frequency gratings, then a few
  // faint unstriped distractor discs.
  const double base = rng.uniform(0.12, 0.28);
  struct Grating { double kx, ky, phase, amp; };
  Grating gratings[2];
  for (auto& g : gratings) {
    const double freq = rng.uniform(0.5, 2.0) * 2.0 * std::numbers::pi / sized;
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g = {freq * std::cos(dir), freq * std::sin(dir),
         rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.02, 0.05)};
  }
  struct Disc { double cx, cy, r, delta; };
  std::vector<Disc> discs(spec.distractors);
  for (auto& d : discs) {
    d = {rng.uniform(0.0, sized), rng.uniform(0.0, sized), rng.uniform(2.0, 5.0),
         rng.uniform(-0.10, 0.10)};
  }

  // Object placement: scale and position are free within the frame and say
  // nothing about the class.
  const double radius =
      0.5 * sized * rng.uniform(spec.object_scale_min, spec.object_scale_max);
  const double margin = radius + 1.0;
  const double cx = rng.uniform(margin, sized - margin);
  const double cy = rng.uniform(margin, sized - margin);
  const double orientation = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double stripe_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double stripe_cos = std::cos(orientation);
  const double stripe_sin = std::sin(orientation);

  long px_min = static_cast<long>(size), px_max = -1;
  long py_min = static_cast<long>(size), py_max = -1;

  Tensor plane({size, size});
  sample.mask = Tensor({size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double xd = static_cast<double>(x);
      const double yd = static_cast<double>(y);
      double v = base;
      for (const auto& g : gratings) {
        v += g.amp * std::sin(g.kx * xd + g.ky * yd + g.phase);
      }
      for (const auto& d : discs) {
        const double dx = xd - d.cx, dy = yd - d.cy;
        if (dx * dx + dy * dy <= d.r * d.r) v += d.delta;
      }

      const double ox = xd - cx, oy = yd - cy;
      const double r = std::hypot(ox, oy);
      if (r <= radius) {
        const double theta = std::atan2(oy, ox);
        const double half_depth = 0.5 * style.lobe_depth;
        const double boundary =
            radius * (1.0 - half_depth +
                      half_depth * std::cos(static_cast<double>(style.lobes) *
                                            (theta - orientation)));
        if (r <= boundary) {
          // Stripe coordinate in object-local units so texture frequency is
          // scale invariant.
          const double u = (ox * stripe_cos + oy * stripe_sin) / (2.0 * radius);
          v = 0.62 + 0.30 * std::sin(2.0 * std::numbers::pi * style.stripe_freq * u +
                                     stripe_phase);
          sample.mask[y * size + x] = 1.0;
          px_min = std::min(px_min, static_cast<long>(x));
          px_max = std::max(px_max, static_cast<long>(x));
          py_min = std::min(py_min, static_cast<long>(y));
          py_max = std::max(py_max, static_cast<long>(y));
        }
      }
      plane[y * size + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  check_contract(px_max >= px_min && py_max >= py_min,
                 "rendered object is empty");
  sample.truth_box = {static_cast<double>(px_min), static_cast<double>(py_min),
                      static_cast<double>(px_max + 1),
                      static_cast<double>(py_max + 1)};

  for (std::size_t ch = 0; ch < spec.channels; ++ch) {
    const double channel_gain = 1.0 - 0.08 * static_cast<double>(ch);
    for (std::size_t p = 0; p < size * size; ++p) {
      sample.image[ch * size * size + p] = plane[p] * channel_gain;
    }
  }
  return sample;
}

}  // namespace

std::vector<SyntheticSample> generate_dataset(const DatasetSpec& spec,
                                              std::uint64_t seed,
                                              bool test_split) {
  spec.validate();
  const std::size_t per_class = test_split ? spec.test_per_class : spec.train_per_class;
  const Rng root(seed);
  std::vector<SyntheticSample> samples;
  samples.reserve(spec.classes * per_class);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      // Per-sample streams make the result independent of generation order;
      // the test split draws from a disjoint stream range.
      const std::uint64_t stream =
          (test_split ? 0x8000000000000000ULL : 0ULL) + c * 1000003ULL + i;
      samples.push_back(render_sample(spec, c, root.fork(stream)));
    }
  }
  return samples;
}

void save_dataset(const std::filesystem::path& dir,
                  const std::vector<SyntheticSample>& samples,
                  const DatasetSpec& spec) {
  std::filesystem::create_directories(dir);
  json index;
  index["image_size"] = spec.image_size;
  index["channels"] = spec.channels;
  index["classes"] = spec.classes;
  index["samples"] = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%06zu.fgt", i);
    save_tensor(dir / name, samples[i].image);
    const auto& b = samples[i].truth_box;
    index["samples"].push_back(
        {{"file", name},
         {"label", samples[i].label},
         {"box", {static_cast<long long>(std::llround(b.x_min)),
                  static_cast<long long>(std::llround(b.y_min)),
                  static_cast<long long>(std::llround(b.x_max)),
                  static_cast<long long>(std::llround(b.y_max))}}});
  }
  std::ofstream out(dir / "index.json");
  check_config(out.good(), "cannot write dataset index");
  out << index.dump(2) << "\n";
}

std::vector<SyntheticSample> load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  check_config(in.good(), "cannot open dataset index in " + dir.string());
  json index;
  in >> index;
  std::vector<SyntheticSample> samples;
  for (const auto& entry : index.at("samples")) {
    SyntheticSample s;
    s.image = load_tensor(dir / entry.at("file").get<std::string>());
    s.label = entry.at("label").get<int>();
    const auto& b = entry.at("box");
    s.truth_box = {b.at(0).get<double>(), b.at(1).get<double>(),
                   b.at(2).get<double>(), b.at(3).get<double>()};
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace fg
