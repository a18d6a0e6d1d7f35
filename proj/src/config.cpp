#include "sac/config.hpp"

#include "sac/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace sac {

InferenceMode parse_mode(const std::string& text) {
  if (text == "backbone_only") return InferenceMode::kBackboneOnly;
  if (text == "fused") return InferenceMode::kFused;
  if (text == "localized") return InferenceMode::kLocalized;
  fail(ErrorKind::kConfig, "mode must be backbone_only, fused or localized, got '" + text + "'");
}

std::string to_string(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::kBackboneOnly: return "backbone_only";
    case InferenceMode::kFused: return "fused";
    case InferenceMode::kLocalized: return "localized";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  if (text == "sac") return Variant::kSac;
  if (text == "backbone") return Variant::kBackbone;
  if (text == "no_drop") return Variant::kNoDrop;
  if (text == "random_drop") return Variant::kRandomDrop;
  if (text == "random_crop") return Variant::kRandomCrop;
  fail(ErrorKind::kConfig, "variant must be sac, backbone, no_drop, random_drop or random_crop, got '" + text + "'");
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kSac: return "sac";
    case Variant::kBackbone: return "backbone";
    case Variant::kNoDrop: return "no_drop";
    case Variant::kRandomDrop: return "random_drop";
    case Variant::kRandomCrop: return "random_crop";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key + ": expected " + expected);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a real number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

#define SAC_SIZE(name) \
  {#name, {[](Config& c, const std::string& k, const std::string& v) { c.name = to_size(k, v); }, \
           [](const Config& c) { return std::to_string(c.name); }}}
#define SAC_REAL(name) \
  {#name, {[](Config& c, const std::string& k, const std::string& v) { c.name = to_real(k, v); }, \
           [](const Config& c) { return fmt_real(c.name); }}}
#define SAC_TEXT(name) \
  {#name, {[](Config& c, const std::string&, const std::string& v) { c.name = v; }, \
           [](const Config& c) { return c.name; }}}
#define SAC_BOOL(name) \
  {#name, {[](Config& c, const std::string& k, const std::string& v) { c.name = to_bool(k, v); }, \
           [](const Config& c) { return std::string(c.name ? "true" : "false"); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"widths",
       {[](Config& c, const std::string& k, const std::string& v) {
          c.widths.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) c.widths.push_back(to_size(k, trim(item)));
        },
        [](const Config& c) {
          std::string s;
          for (std::size_t i = 0; i < c.widths.size(); ++i) s += (i ? "," : "") + std::to_string(c.widths[i]);
          return s;
        }}},
      SAC_SIZE(pooled_blocks), SAC_SIZE(d_v), SAC_SIZE(word_dim), SAC_SIZE(d_e), SAC_SIZE(d_j),
      SAC_SIZE(k), SAC_REAL(alpha), SAC_REAL(d_phi), SAC_REAL(loc_ratio),
      {"combine",
       {[](Config& c, const std::string&, const std::string& v) { c.combine = drop::parse_combine(v); },
        [](const Config& c) { return std::string(drop::to_string(c.combine)); }}},
      SAC_TEXT(drop_level), SAC_REAL(aug_prob), SAC_REAL(w_coarse), SAC_REAL(w_fine), SAC_REAL(w_aug),
      {"variant",
       {[](Config& c, const std::string&, const std::string& v) { c.variant = parse_variant(v); },
        [](const Config& c) { return to_string(c.variant); }}},
      SAC_REAL(random_drop_p), SAC_REAL(random_crop_min),
      {"mode",
       {[](Config& c, const std::string&, const std::string& v) { c.mode = parse_mode(v); },
        [](const Config& c) { return to_string(c.mode); }}},
      SAC_SIZE(epochs), SAC_SIZE(batch_size), SAC_REAL(lr), SAC_REAL(momentum), SAC_REAL(weight_decay),
      SAC_REAL(lr_decay), SAC_SIZE(lr_decay_every), SAC_SIZE(checkpoint_every),
      {"seed",
       {[](Config& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
        [](const Config& c) { return std::to_string(c.seed); }}},
      SAC_SIZE(groups), SAC_SIZE(siblings), SAC_SIZE(images_per_class), SAC_SIZE(image_size), SAC_BOOL(nuisance),
      SAC_TEXT(manifest), SAC_TEXT(checkpoint), SAC_TEXT(out), SAC_TEXT(split), SAC_TEXT(image), SAC_SIZE(limit),
      SAC_BOOL(quiet),
  };
  return table;
}

#undef SAC_SIZE
#undef SAC_REAL
#undef SAC_TEXT
#undef SAC_BOOL

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::kConfig, what);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  std::string k = key;
  for (auto& ch : k) {
    if (ch == '-') ch = '_';
  }
  field(k).set(*this, k, trim(value));
}

std::string Config::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& Config::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

void Config::validate() const {
  require(!widths.empty(), "widths must list at least one block");
  for (auto w : widths) require(w > 0, "widths must be positive");
  require(pooled_blocks <= widths.size(), "pooled_blocks cannot exceed the number of blocks");
  require(d_v > 0 && word_dim > 0 && d_e > 0 && d_j > 0, "d_v, word_dim, d_e and d_j must be positive");
  require(k >= 1, "k must be >= 1");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(d_phi > 0.0 && d_phi < 1.0, "d_phi must lie in (0, 1)");
  require(loc_ratio > 0.0 && loc_ratio < 1.0, "loc_ratio must lie in (0, 1)");
  require(drop_level == "image" || drop_level == "feature", "drop_level must be image or feature");
  require(aug_prob >= 0.0 && aug_prob <= 1.0, "aug_prob must lie in [0, 1]");
  require(w_coarse >= 0.0 && w_fine >= 0.0 && w_aug >= 0.0, "loss weights must be non-negative");
  require(random_drop_p >= 0.0 && random_drop_p <= 1.0, "random_drop_p must lie in [0, 1]");
  require(random_crop_min > 0.0 && random_crop_min <= 1.0, "random_crop_min must lie in (0, 1]");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lr >= 0.0, "lr must be non-negative");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
  require(lr_decay_every >= 1, "lr_decay_every must be >= 1");
  require(split == "train" || split == "test" || split == "all", "split must be train, test or all");
  require(image_size >= 16, "image_size must be >= 16");
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + "=" + f.get(*this) + "\n";
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      fail(ErrorKind::kParse, origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config cfg;
  for (const auto& [k, v] : parse_key_values(ss.str(), path.string())) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

}  // namespace sac
