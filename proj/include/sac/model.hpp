#pragma once

#include "sac/assessment.hpp"
#include "sac/backbone.hpp"
#include "sac/config.hpp"
#include "sac/image.hpp"
#include "sac/joint_attention.hpp"
#include "sac/label_embed.hpp"
#include "sac/localization.hpp"
#include "sac/params.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sac {

// Everything needed to rebuild the parameter layout; stored in checkpoints.
struct Architecture {
  backbone::Config backbone;
  std::size_t word_dim = 300;
  std::size_t d_e = 1024;
  std::size_t d_j = 1024;
  std::size_t num_classes = 0;
  std::size_t image_size = 64;

  static Architecture from_config(const Config& cfg, std::size_t num_classes);
  bool operator==(const Architecture& o) const {
    return backbone.widths == o.backbone.widths && backbone.pooled_blocks == o.backbone.pooled_blocks &&
           backbone.d_v == o.backbone.d_v && word_dim == o.word_dim && d_e == o.d_e && d_j == o.d_j &&
           num_classes == o.num_classes && image_size == o.image_size;
  }
};

struct ModelViews {
  backbone::Params backbone;
  label::Params label;
  joint::Params joint;
  assess::Params assess;
};

class Model {
 public:
  // Each component is initialised from its own seeded stream, so two models
  // with the same seed share the backbone bitwise whatever else differs.
  Model(const Architecture& arch, std::vector<std::string> class_names, std::uint64_t seed);

  const Architecture& arch() const { return arch_; }
  const std::vector<std::string>& class_names() const { return names_; }
  const label::Vocabulary& vocab() const { return vocab_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  ModelViews views();

  // d_e x N encodings of every class name under the current parameters.
  Tensor class_embeddings();

  // Atomic write: temp file in the same directory, then rename.
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  Model() = default;
  Architecture arch_;
  std::vector<std::string> names_;
  label::Vocabulary vocab_;
  ParameterSet params_;
};

struct PredictOptions {
  std::size_t k = 10;
  double alpha = 0.5;
  double loc_ratio = loc::kDefaultRatio;
  InferenceMode mode = InferenceMode::kFused;
};

struct Prediction {
  backbone::FeatureMap features;    // from the first pass
  Tensor pr1;                       // coarse distribution of the final pass
  backbone::TopKPrediction topk;    // coarse top-k of the first pass
  joint::AttentionMap attention;    // first pass, empty for backbone_only
  Tensor pr2;                       // fine distribution of the final pass
  Tensor pr;                        // distribution the decision is taken from
  backbone::TopKPrediction topk2;   // top-k of pr2 (final pass)
  std::optional<loc::CropBox> box;  // localized mode only
  Image crop;                       // localized mode only
  std::size_t top1 = 0;
  std::size_t backbone_passes = 0;
};

// class_emb may be empty in backbone_only mode.
Prediction predict(Model& model, const Tensor& class_emb, const Image& image, const PredictOptions& options);

}  // namespace sac
