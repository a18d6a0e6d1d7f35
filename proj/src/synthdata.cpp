#include "sac/synthdata.hpp"

#include "sac/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

namespace sac::synth {

namespace {

using Rgb = std::array<double, 3>;

constexpr double kPi = 3.14159265358979323846;

struct Named {
  const char* name;
  Rgb rgb;
};

constexpr std::array<Named, 12> kDetailColours{{
    {"red", {0.90, 0.10, 0.10}},   {"blue", {0.10, 0.20, 0.95}},   {"yellow", {0.95, 0.90, 0.10}},
    {"green", {0.10, 0.75, 0.20}}, {"white", {1.00, 1.00, 1.00}},  {"black", {0.02, 0.02, 0.02}},
    {"orange", {1.00, 0.55, 0.05}}, {"purple", {0.55, 0.10, 0.70}}, {"cyan", {0.10, 0.85, 0.90}},
    {"pink", {0.98, 0.55, 0.75}},  {"brown", {0.45, 0.25, 0.10}},  {"grey", {0.55, 0.55, 0.55}},
}};

// A mark is a patch shape placed at an offset from the body centre (body frame, unit = body radius).
struct Mark {
  const char* name;
  double dr, dc;
  bool round;
};

constexpr std::array<Mark, 9> kMarks{{
    {"tipped", -0.55, 0.55, false},  {"crowned", -0.75, 0.0, true},  {"bellied", 0.60, 0.0, false},
    {"winged", 0.0, -0.65, false},   {"tailed", 0.0, 0.70, true},    {"spotted", 0.0, 0.0, true},
    {"masked", -0.40, -0.40, false}, {"collared", -0.35, 0.20, true}, {"footed", 0.65, -0.45, true},
}};

constexpr std::array<const char*, 24> kNouns{
    "finch", "warbler", "sparrow", "heron", "falcon", "wren",   "robin",  "tern",
    "gull",  "owl",     "plover",  "swift", "kestrel", "thrush", "lark",   "pipit",
    "egret", "shrike",  "vireo",   "tanager", "oriole", "grebe", "bunting", "crane",
};

constexpr std::array<Rgb, 8> kBodyColours{{
    {0.80, 0.35, 0.30}, {0.30, 0.50, 0.80}, {0.35, 0.70, 0.40}, {0.75, 0.65, 0.30},
    {0.60, 0.40, 0.70}, {0.30, 0.65, 0.65}, {0.70, 0.50, 0.40}, {0.50, 0.50, 0.60},
}};

enum class Body { kEllipse, kRectangle, kTriangle, kDiamond, kCross };
constexpr std::size_t kBodyShapes = 5;

struct ClassLook {
  Body body;
  Rgb body_rgb;
  double body_radius;  // pixels
  Mark mark;
  Rgb detail_rgb;
  double patch_half;  // pixels
};

Rgb hue_colour(std::size_t i) {
  // Golden-ratio hue walk for colours beyond the named palette.
  const double h = std::fmod(0.13 + 0.618033988749895 * static_cast<double>(i), 1.0) * 6.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  const int sector = static_cast<int>(h);
  static constexpr std::array<std::array<int, 3>, 6> kPerm{{{0, 1, 2}, {1, 0, 2}, {2, 0, 1}, {2, 1, 0}, {1, 2, 0}, {0, 2, 1}}};
  Rgb rgb{};
  rgb[kPerm[sector][0]] = 0.9;
  rgb[kPerm[sector][1]] = 0.9 * x;
  rgb[kPerm[sector][2]] = 0.05;
  return rgb;
}

std::string colour_word(std::size_t i) {
  return i < kDetailColours.size() ? kDetailColours[i].name : "tint" + std::to_string(i);
}

// Sibling s -> (colour index, mark index). Marks vary fastest so small groups differ in patch position.
std::pair<std::size_t, std::size_t> sibling_code(std::size_t s) { return {s / kMarks.size(), s % kMarks.size()}; }

ClassLook look_of(const DatasetSpec& spec, std::size_t class_id) {
  const std::size_t g = class_id / spec.siblings_per_group, s = class_id % spec.siblings_per_group;
  const double size = static_cast<double>(spec.image_size);
  ClassLook look{};
  look.body = static_cast<Body>(g % kBodyShapes);
  look.body_rgb = kBodyColours[(g / kBodyShapes + g) % kBodyColours.size()];
  look.body_radius = 0.28 * size;
  const auto [ci, mi] = sibling_code(s);
  look.mark = kMarks[mi];
  look.detail_rgb = ci < kDetailColours.size() ? kDetailColours[ci].rgb : hue_colour(ci);
  // 9x9 at 64 px: about 2% of the image.
  look.patch_half = std::max(1.0, std::floor(size * 9.0 / 64.0 / 2.0));
  return look;
}

bool inside_body(Body body, double u, double v) {  // u, v in body-radius units
  const double au = std::abs(u), av = std::abs(v);
  switch (body) {
    case Body::kEllipse: return u * u / 0.80 + v * v <= 1.0;
    case Body::kRectangle: return au <= 0.85 && av <= 0.95;
    case Body::kTriangle: return u >= -0.95 && u <= 0.9 && av <= 0.55 * (u + 0.95) + 0.05;
    case Body::kDiamond: return au + av <= 1.05;
    case Body::kCross: return (au <= 0.40 && av <= 1.0) || (av <= 0.40 && au <= 1.0);
  }
  return false;
}

bool inside_patch(const ClassLook& look, double pr, double pc) {  // pixel offsets from patch centre
  const double h = look.patch_half;
  if (look.mark.round) return pr * pr + pc * pc <= (h + 0.5) * (h + 0.5);
  return std::abs(pr) <= h && std::abs(pc) <= h;
}

struct Nuisance {
  double dr = 0, dc = 0, angle = 0, brightness = 1;
  double tex_amp = 0, tex_fr = 0, tex_fc = 0, tex_phase = 0;
  Rgb background{0.85, 0.85, 0.82};
};

Nuisance draw_nuisance(const DatasetSpec& spec, std::size_t class_id, std::size_t index) {
  Nuisance n;
  if (!spec.nuisance) return n;
  Rng rng(spec.seed, "synth/image/" + std::to_string(class_id) + "/" + std::to_string(index));
  const double size = static_cast<double>(spec.image_size);
  n.dr = rng.uniform(-0.1, 0.1) * size;
  n.dc = rng.uniform(-0.1, 0.1) * size;
  n.angle = rng.uniform(-15.0, 15.0) * kPi / 180.0;
  n.brightness = rng.uniform(0.9, 1.1);
  n.tex_amp = rng.uniform(0.03, 0.10);
  n.tex_fr = rng.uniform(0.1, 0.6);
  n.tex_fc = rng.uniform(0.1, 0.6);
  n.tex_phase = rng.uniform(0.0, 2.0 * kPi);
  const double base = rng.uniform(0.70, 0.92);
  for (auto& ch : n.background) ch = base + rng.uniform(-0.05, 0.05);
  return n;
}

void check_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    fail(ErrorKind::kIo, "cannot create output directory " + dir.string());
  }
  const auto probe = dir / ".write_probe";
  std::ofstream out(probe);
  if (!out) fail(ErrorKind::kIo, "output directory is not writable: " + dir.string());
  out.close();
  std::filesystem::remove(probe, ec);
}

std::string image_name(std::size_t class_id, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "images/c%04zu_%03zu.png", class_id, index);
  return buf;
}

}  // namespace

void validate(const DatasetSpec& spec) {
  if (spec.groups < 2 || spec.siblings_per_group < 2) fail(ErrorKind::kConfig, "groups and siblings_per_group must be >= 2");
  if (spec.num_classes() > 1000) fail(ErrorKind::kConfig, "at most 1000 classes, got " + std::to_string(spec.num_classes()));
  if (spec.images_per_class < 2) fail(ErrorKind::kConfig, "images_per_class must be >= 2 so both splits are populated");
  if (spec.image_size < 16) fail(ErrorKind::kConfig, "image_size must be >= 16");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) fail(ErrorKind::kConfig, "train_fraction must lie in (0, 1)");
}

std::size_t train_count(std::size_t n, double train_fraction) {
  const auto t = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(t, 1, n - 1);
}

std::string class_name(const DatasetSpec& spec, std::size_t class_id) {
  const std::size_t g = class_id / spec.siblings_per_group, s = class_id % spec.siblings_per_group;
  const auto [ci, mi] = sibling_code(s);
  std::string noun = kNouns[g % kNouns.size()];
  if (g >= kNouns.size()) noun += std::to_string(g / kNouns.size());
  return colour_word(ci) + " " + kMarks[mi].name + " " + noun;
}

PatchBounds detail_bounds(const DatasetSpec& spec, std::size_t class_id) {
  const ClassLook look = look_of(spec, class_id);
  const double centre = (static_cast<double>(spec.image_size) - 1.0) / 2.0;
  const double pr = centre + look.mark.dr * look.body_radius, pc = centre + look.mark.dc * look.body_radius;
  const double h = look.patch_half + 1.0;
  const auto clampi = [&](double v) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(spec.image_size - 1)));
  };
  return {clampi(std::floor(pr - h)), clampi(std::floor(pc - h)), clampi(std::ceil(pr + h)), clampi(std::ceil(pc + h))};
}

Image render(const DatasetSpec& spec, std::size_t class_id, std::size_t index) {
  const ClassLook look = look_of(spec, class_id);
  const Nuisance nz = draw_nuisance(spec, class_id, index);
  const std::size_t S = spec.image_size;
  const double centre = (static_cast<double>(S) - 1.0) / 2.0;
  const double cr = centre + nz.dr, cc = centre + nz.dc;
  const double cos_a = std::cos(nz.angle), sin_a = std::sin(nz.angle);
  const double patch_r = look.mark.dr * look.body_radius, patch_c = look.mark.dc * look.body_radius;
  Image img(S, S);
  for (std::size_t r = 0; r < S; ++r) {
    for (std::size_t c = 0; c < S; ++c) {
      // Pixel in the body frame (inverse rotation about the translated centre).
      const double yr = static_cast<double>(r) - cr, yc = static_cast<double>(c) - cc;
      const double br = cos_a * yr + sin_a * yc, bc = -sin_a * yr + cos_a * yc;
      Rgb rgb = nz.background;
      if (nz.tex_amp > 0.0) {
        const double t = nz.tex_amp * std::sin(nz.tex_fr * static_cast<double>(r) + nz.tex_fc * static_cast<double>(c) + nz.tex_phase);
        for (auto& ch : rgb) ch += t;
      }
      if (inside_body(look.body, br / look.body_radius, bc / look.body_radius)) rgb = look.body_rgb;
      if (inside_patch(look, br - patch_r, bc - patch_c)) rgb = look.detail_rgb;
      for (std::size_t ch = 0; ch < kChannels; ++ch) img.at(ch, r, c) = std::clamp(rgb[ch] * nz.brightness, 0.0, 1.0);
    }
  }
  return img;
}

std::vector<ManifestRecord> generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  check_writable(out_dir);
  check_writable(out_dir / "images");
  const std::size_t N = spec.num_classes(), n = spec.images_per_class;
  const std::size_t n_train = train_count(n, spec.train_fraction);

  std::vector<std::vector<ManifestRecord>> per_class(N);
  std::vector<std::string> errors(N);
  auto work = [&](std::size_t cls) {
    try {
      Rng split_rng(spec.seed, "synth/split/" + std::to_string(cls));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[split_rng.index(i)]);
      std::vector<bool> is_train(n, false);
      for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
      const std::string name = class_name(spec, cls);
      for (std::size_t i = 0; i < n; ++i) {
        const std::string rel = image_name(cls, i);
        write_png(out_dir / rel, render(spec, cls, i));
        per_class[cls].push_back({rel, cls, name, is_train[i] ? "train" : "test"});
      }
    } catch (const std::exception& e) {
      errors[cls] = e.what();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), N));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t cls = w; cls < N; cls += workers) work(cls);
      });
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) fail(ErrorKind::kIo, e);
  }

  std::vector<ManifestRecord> records;
  for (auto& rows : per_class) records.insert(records.end(), rows.begin(), rows.end());
  const auto manifest = out_dir / "manifest.jsonl";
  const auto tmp = out_dir / "manifest.jsonl.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    for (const auto& r : records) {
      nlohmann::ordered_json row{{"path", r.path}, {"class_id", r.class_id}, {"class_name", r.class_name}, {"split", r.split}};
      out << row.dump() << '\n';
    }
    if (!out) fail(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, manifest);
  return records;
}

std::vector<std::size_t> Dataset::indices(const std::string& split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (split.empty() || samples[i].split == split) out.push_back(i);
  }
  return out;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto row = nlohmann::json::parse(line);
      ManifestRecord r;
      r.path = row.at("path").get<std::string>();
      const auto id = row.at("class_id").get<long long>();
      if (id < 0) fail(ErrorKind::kParse, "negative class_id");
      r.class_id = static_cast<std::size_t>(id);
      r.class_name = row.at("class_name").get<std::string>();
      r.split = row.at("split").get<std::string>();
      if (r.split != "train" && r.split != "test") fail(ErrorKind::kParse, "split must be train or test");
      records.push_back(std::move(r));
    } catch (const Error& e) {
      fail(ErrorKind::kParse, "malformed manifest row at " + where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, "malformed manifest row at " + where + ": " + e.what());
    }
  }
  if (records.empty()) fail(ErrorKind::kParse, "manifest " + path.string() + " has no records");
  return records;
}

Dataset load_manifest(const std::filesystem::path& path) {
  const auto records = read_manifest(path);
  const auto base = path.parent_path();
  Dataset ds;
  std::size_t max_id = 0;
  for (const auto& r : records) max_id = std::max(max_id, r.class_id);
  ds.class_names.assign(max_id + 1, "");
  for (const auto& r : records) {
    auto& name = ds.class_names[r.class_id];
    if (name.empty()) {
      name = r.class_name;
    } else if (name != r.class_name) {
      fail(ErrorKind::kParse, "class " + std::to_string(r.class_id) + " has two names: '" + name + "' and '" + r.class_name + "'");
    }
  }
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    if (ds.class_names[c].empty()) fail(ErrorKind::kParse, "class ids are not contiguous: missing " + std::to_string(c));
  }
  ds.samples.reserve(records.size());
  for (const auto& r : records) {
    const std::filesystem::path p = std::filesystem::path(r.path).is_absolute() ? std::filesystem::path(r.path) : base / r.path;
    if (!std::filesystem::exists(p)) fail(ErrorKind::kIo, "missing image file " + p.string());
    ds.samples.push_back({read_png(p), r.class_id, r.split, p.string()});
  }
  return ds;
}

}  // namespace sac::synth
