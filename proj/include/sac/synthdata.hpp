#pragma once

#include "sac/image.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Procedural fine-grained dataset. Classes come in groups that share a body
// shape and colour; siblings inside a group differ only by a small detail patch.
namespace sac::synth {

struct DatasetSpec {
  std::size_t groups = 10;
  std::size_t siblings_per_group = 4;
  std::size_t images_per_class = 50;
  std::size_t image_size = 64;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  bool nuisance = true;  // translation, rotation, background texture, brightness

  std::size_t num_classes() const { return groups * siblings_per_group; }
};

void validate(const DatasetSpec& spec);

// Rows of the training split for a class with n images.
std::size_t train_count(std::size_t n, double train_fraction);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory unless absolute
  std::size_t class_id = 0;
  std::string class_name;
  std::string split;  // "train" or "test"
};

// "<detail colour> <detail mark> <group noun>", always 3 words.
std::string class_name(const DatasetSpec& spec, std::size_t class_id);

// Inclusive pixel bounds of the detail patch when rendered without nuisance.
struct PatchBounds {
  std::size_t r0, c0, r1, c1;
};
PatchBounds detail_bounds(const DatasetSpec& spec, std::size_t class_id);

// Renders image `index` of a class. Pure function of (spec, class_id, index).
Image render(const DatasetSpec& spec, std::size_t class_id, std::size_t index);

// Writes images/ and manifest.jsonl under out_dir; returns the records in manifest order.
std::vector<ManifestRecord> generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

struct Sample {
  Image image;
  std::size_t class_id = 0;
  std::string split;
  std::string path;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;  // indexed by class id

  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> indices(const std::string& split) const;
};

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
Dataset load_manifest(const std::filesystem::path& path);

}  // namespace sac::synth
