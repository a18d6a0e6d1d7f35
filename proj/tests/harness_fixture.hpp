#pragma once

#include "sac/config.hpp"
#include "sac/diffcore.hpp"
#include "sac/synthdata.hpp"
#include "sac/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace sac::testing {

// A small architecture that trains in well under a second per epoch.
inline Config tiny_config() {
  Config cfg;
  cfg.widths = {4, 8, 8, 8};
  cfg.d_v = 8;
  cfg.word_dim = 8;
  cfg.d_e = 12;
  cfg.d_j = 10;
  cfg.k = 3;
  cfg.image_size = 32;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.lr = 0.01;
  cfg.quiet = true;
  return cfg;
}

// Generates (once per name) a G=2, S=2 dataset at 32 px and loads it.
inline synth::Dataset tiny_dataset(const std::string& name, std::size_t images_per_class = 6) {
  const auto dir = std::filesystem::temp_directory_path() / ("sac_fixture_" + name);
  std::filesystem::remove_all(dir);
  synth::DatasetSpec spec;
  spec.groups = 2;
  spec.siblings_per_group = 2;
  spec.images_per_class = images_per_class;
  spec.image_size = 32;
  spec.seed = 5;
  synth::generate_dataset(spec, dir);
  return synth::load_manifest(dir / "manifest.jsonl");
}

// Zero-initialised biases put an all-black (fully erased) image exactly on
// the ReLU kink, where central differences are meaningless. Nudge them off it.
inline void jitter_biases(Model& model, std::uint64_t seed, double scale = 0.05) {
  Rng rng(seed, "test/jitter");
  for (auto& p : model.params()) {
    if (p->name.ends_with(".bias")) {
      for (auto& v : p->value.values()) v += rng.uniform(-scale, scale);
    }
  }
}

struct PathCheck {
  std::string name;
  std::string group;
  double max_rel_err = 0.0;
  double max_abs_grad = 0.0;
};

// Central differences of the mean batch loss against the trainer's own
// gradient, on the `per_param` largest-magnitude entries of every parameter.
inline std::vector<PathCheck> end_to_end_gradients(const Config& cfg, const synth::Dataset& data, Model& model,
                                                   const std::vector<std::size_t>& batch,
                                                   std::size_t per_param = 4, double eps = 1e-6) {
  const double scale = 1.0 / static_cast<double>(batch.size());
  auto loss = [&] {
    Rng rng(cfg.seed, "gradcheck");
    return batch_gradient(cfg, data, model, batch, rng).total * scale;
  };
  loss();
  std::vector<Tensor> grads;
  for (const auto& p : model.params()) grads.push_back(p->grad);

  std::vector<PathCheck> out;
  std::size_t pi = 0;
  for (auto& p : model.params()) {
    const Tensor& g = grads[pi++];
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n = std::min(per_param, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    PathCheck check{p->name, p->group, 0.0, std::abs(g[order[0]])};
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t i = order[t];
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = loss();
      p->value[i] = saved - eps;
      const double down = loss();
      p->value[i] = saved;
      check.max_rel_err = std::max(check.max_rel_err, diff::relative_error(g[i], (up - down) / (2.0 * eps)));
    }
    out.push_back(check);
  }
  return out;
}

}  // namespace sac::testing
