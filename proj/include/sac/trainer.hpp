#pragma once

#include "sac/config.hpp"
#include "sac/model.hpp"
#include "sac/synthdata.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace sac {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;  // mean total loss per image
  double coarse_ce = 0.0;
  double fine_ce = 0.0;
  double aug_ce = 0.0;
  std::size_t aug_passes = 0;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> epochs;
  double first_batch_loss = 0.0;  // mean total loss of epoch 1, batch 0
};

struct TrainOptions {
  std::filesystem::path checkpoint;  // empty: no checkpoints written
  std::function<void(const EpochStats&)> on_epoch;
};

struct BatchLoss {
  double total = 0, coarse = 0, fine = 0, aug = 0;  // summed over the batch
  std::size_t aug_passes = 0;
};

// Zeroes and then fills every parameter gradient with d(mean batch loss)/d(param).
// The augmentation draws come from aug_rng, so a fresh stream with the same
// seed replays the same coins. epoch and step only label error messages.
BatchLoss batch_gradient(const Config& cfg, const synth::Dataset& data, Model& model,
                         const std::vector<std::size_t>& batch, Rng& aug_rng, std::size_t epoch = 0,
                         std::size_t step = 0);

// Model initialised from cfg.seed for the classes of `data`.
Model init_model(const Config& cfg, const synth::Dataset& data);

TrainResult train(const Config& cfg, const synth::Dataset& data, const TrainOptions& options = {});
// Continues from an existing model (used by tests and sweeps).
TrainResult train(const Config& cfg, const synth::Dataset& data, Model model, const TrainOptions& options);

struct EvalReport {
  InferenceMode mode = InferenceMode::kFused;
  std::size_t images = 0;
  std::size_t correct = 0;
  double top1 = 0.0;
  std::size_t k = 0;
  double hit_at_k = 0.0;
  double seconds_per_image = 0.0;
  std::size_t backbone_passes = 0;
  std::size_t touched_params = 0;
  std::map<std::string, std::size_t> param_counts;  // per group, plus "total"
  std::vector<std::size_t> predictions;             // top-1 per evaluated image
};

EvalReport evaluate(Model& model, const synth::Dataset& data, const std::vector<std::size_t>& indices,
                    const Config& cfg);

// Indices of the configured split (cfg.split), truncated to cfg.limit when set.
std::vector<std::size_t> select_split(const synth::Dataset& data, const Config& cfg);

}  // namespace sac
