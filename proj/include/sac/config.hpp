#pragma once

#include "sac/dropping.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sac {

enum class InferenceMode { kBackboneOnly, kFused, kLocalized };
InferenceMode parse_mode(const std::string& text);
std::string to_string(InferenceMode mode);

// Training variants. kSac is the full method; the rest are ablations.
enum class Variant { kSac, kBackbone, kNoDrop, kRandomDrop, kRandomCrop };
Variant parse_variant(const std::string& text);
std::string to_string(Variant variant);

struct Config {
  // Architecture.
  std::vector<std::size_t> widths{16, 32, 48, 64};
  std::size_t pooled_blocks = 3;
  std::size_t d_v = 128;
  std::size_t word_dim = 300;
  std::size_t d_e = 1024;
  std::size_t d_j = 1024;

  // Method knobs.
  std::size_t k = 10;
  double alpha = 0.5;
  double d_phi = 0.1;
  double loc_ratio = 0.1;
  drop::Combine combine = drop::Combine::kOr;
  std::string drop_level = "image";  // image | feature
  double aug_prob = 1.0;
  double w_coarse = 1.0, w_fine = 1.0, w_aug = 1.0;
  Variant variant = Variant::kSac;
  double random_drop_p = 0.3;
  double random_crop_min = 0.4;  // minimum side fraction of a random crop
  InferenceMode mode = InferenceMode::kFused;

  // Optimisation. 20 epochs keeps desk runs short.
  std::size_t epochs = 20;
  std::size_t batch_size = 12;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double lr_decay = 0.9;
  std::size_t lr_decay_every = 2;
  std::size_t checkpoint_every = 5;
  std::uint64_t seed = 0;

  // Synthetic data.
  std::size_t groups = 10;
  std::size_t siblings = 4;
  std::size_t images_per_class = 50;
  std::size_t image_size = 64;
  bool nuisance = true;

  // Paths and misc.
  std::string manifest;
  std::string checkpoint;
  std::string out = "out";
  std::string split = "test";
  std::string image;
  std::size_t limit = 0;  // 0 = all images
  bool quiet = false;

  // Applies one key=value assignment; unknown keys and bad values throw kConfig.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void validate() const;
  // key=value lines in keys() order.
  std::string dump() const;
};

// Parses UTF-8 key=value lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin);
Config load_config(const std::filesystem::path& path);

}  // namespace sac
