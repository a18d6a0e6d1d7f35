#pragma once

#include "sac/config.hpp"
#include "sac/model.hpp"
#include "sac/synthdata.hpp"
#include "sac/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sac {

// Rows of flat JSON objects, rendered as JSON-lines and as an aligned table.
class Report {
 public:
  explicit Report(std::string name) : name_(std::move(name)) {}

  void add(nlohmann::ordered_json row);
  const std::string& name() const { return name_; }
  const std::vector<nlohmann::ordered_json>& rows() const { return rows_; }

  std::string jsonl() const;
  std::string table() const;
  // Writes <dir>/<name>.jsonl (atomically) and returns the path.
  std::filesystem::path write(const std::filesystem::path& dir) const;

 private:
  std::string name_;
  std::vector<nlohmann::ordered_json> rows_;
};

nlohmann::ordered_json eval_row(const EvalReport& rep);
nlohmann::ordered_json epoch_row(const EpochStats& stats);

// FNV-1a over parameter names, shapes and bytes; equal digests mean bitwise-equal parameters.
std::string parameter_digest(const ParameterSet& params);

struct VisualizeResult {
  std::vector<std::filesystem::path> images;  // k class maps, pooled map, keep overlay, crop
  std::filesystem::path record;               // prediction JSON
  Tensor class_maps;                          // k x H x W before quantisation
  Tensor attention;                           // f x k
  nlohmann::ordered_json prediction;
};

// ground_truth is reported when known.
VisualizeResult visualize(Model& model, const Image& image, const Config& cfg, const std::filesystem::path& out_dir,
                          std::optional<std::size_t> ground_truth = std::nullopt, const std::string& image_id = "");

struct LocalizeResult {
  loc::CropBox box;
  std::filesystem::path crop;
  nlohmann::ordered_json record;
};
LocalizeResult localize(Model& model, const Image& image, const Config& cfg, const std::filesystem::path& out_dir);

nlohmann::ordered_json prediction_record(const Model& model, const Prediction& pred, const std::string& image_id,
                                         std::optional<std::size_t> ground_truth);

// Trains matched-seed variants (no_drop, random_drop, random_crop, sac) and evaluates each in cfg.mode.
Report compare_dropping(const Config& cfg, const synth::Dataset& data);

// knob is alpha, k or d_phi. Empty values select the default grid.
Report sweep(const Config& cfg, const synth::Dataset& data, const std::string& knob, std::vector<double> values = {});

std::vector<double> default_sweep_values(const std::string& knob);

}  // namespace sac
