#include "sac/harness.hpp"

#include "sac/dropping.hpp"
#include "sac/error.hpp"
#include "sac/localization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sac {

using nlohmann::ordered_json;

void Report::add(ordered_json row) { rows_.push_back(std::move(row)); }

std::string Report::jsonl() const {
  std::string out;
  for (const auto& r : rows_) out += r.dump() + "\n";
  return out;
}

namespace {

std::string cell(const ordered_json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream ss;
    ss << std::setprecision(4) << std::fixed << v.get<double>();
    return ss.str();
  }
  return v.dump();
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + tmp.string());
    out << text;
    if (!out) fail(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string Report::table() const {
  std::vector<std::string> cols;
  for (const auto& r : rows_) {
    for (const auto& [k, v] : r.items()) {
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
    }
  }
  std::vector<std::size_t> width(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) width[c] = cols[c].size();
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows_) {
    std::vector<std::string> line;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      line.push_back(r.contains(cols[c]) ? cell(r[cols[c]]) : "-");
      width[c] = std::max(width[c], line.back().size());
    }
    cells.push_back(std::move(line));
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      out << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << line[c];
    }
    out << "\n";
  };
  emit(cols);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  emit(rule);
  for (const auto& line : cells) emit(line);
  return out.str();
}

std::filesystem::path Report::write(const std::filesystem::path& dir) const {
  const auto path = dir / (name_ + ".jsonl");
  write_atomic(path, jsonl());
  return path;
}

ordered_json eval_row(const EvalReport& rep) {
  ordered_json row;
  row["mode"] = to_string(rep.mode);
  row["images"] = rep.images;
  row["top1"] = rep.top1;
  row["k"] = rep.k;
  row["hit_at_k"] = rep.hit_at_k;
  row["sec_per_image"] = rep.seconds_per_image;
  row["backbone_passes"] = rep.backbone_passes;
  row["touched_params"] = rep.touched_params;
  for (const auto& [group, n] : rep.param_counts) row["params_" + group] = n;
  return row;
}

ordered_json epoch_row(const EpochStats& s) {
  return ordered_json{{"epoch", s.epoch},         {"lr", s.lr},         {"loss", s.loss},
                      {"coarse_ce", s.coarse_ce}, {"fine_ce", s.fine_ce}, {"aug_ce", s.aug_ce},
                      {"aug_passes", s.aug_passes}, {"seconds", s.seconds}};
}

std::string parameter_digest(const ParameterSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    mix(p->name.data(), p->name.size());
    for (auto d : p->value.shape()) mix(&d, sizeof d);
    mix(p->value.data(), p->value.size() * sizeof(double));
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

ordered_json prediction_record(const Model& model, const Prediction& pred, const std::string& image_id,
                               std::optional<std::size_t> ground_truth) {
  auto list = [&](const backbone::TopKPrediction& t) {
    ordered_json arr = ordered_json::array();
    for (std::size_t j = 0; j < t.k(); ++j) {
      arr.push_back({{"class_id", t.classes[j]}, {"class_name", model.class_names()[t.classes[j]]}, {"score", t.scores[j]}});
    }
    return arr;
  };
  ordered_json rec;
  rec["image"] = image_id;
  rec["topk_coarse"] = list(pred.topk);
  rec["topk_fine"] = list(pred.topk2);
  rec["top1"] = {{"class_id", pred.top1}, {"class_name", model.class_names()[pred.top1]}, {"score", pred.pr[pred.top1]}};
  rec["ground_truth"] = ground_truth ? ordered_json(*ground_truth) : ordered_json(nullptr);
  if (pred.box) rec["box"] = {{"x1", pred.box->x1}, {"y1", pred.box->y1}, {"x2", pred.box->x2}, {"y2", pred.box->y2}};
  return rec;
}

namespace {

void check_image(const Model& model, const Image& image) {
  if (image.height != model.arch().image_size || image.width != model.arch().image_size) {
    fail(ErrorKind::kShape, "image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                                ", model expects " + std::to_string(model.arch().image_size));
  }
}

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace

VisualizeResult visualize(Model& model, const Image& image, const Config& cfg, const std::filesystem::path& out_dir,
                          std::optional<std::size_t> ground_truth, const std::string& image_id) {
  check_image(model, image);
  std::filesystem::create_directories(out_dir);
  const Tensor emb = model.class_embeddings();
  PredictOptions opts{cfg.k, cfg.alpha, cfg.loc_ratio, InferenceMode::kLocalized};
  const Prediction pred = predict(model, emb, image, opts);
  const auto& fm = pred.features;
  const std::size_t H = image.height, W = image.width, k = pred.topk.k();

  VisualizeResult res;
  res.attention = pred.attention.M;
  res.class_maps = loc::class_heatmaps(pred.attention.M, fm.m, fm.n, H, W);
  for (std::size_t j = 0; j < k; ++j) {
    Tensor map({H, W});
    std::copy_n(res.class_maps.data() + j * H * W, H * W, map.data());
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "heat_%02zu_", j);
    const auto path = out_dir / (prefix + slug(model.class_names()[pred.topk.classes[j]]) + ".png");
    write_gray_png(path, map);
    res.images.push_back(path);
  }
  const Tensor pooled = loc::bilinear_upsample(loc::pool_correlation(pred.attention.M, fm.m, fm.n), H, W);
  res.images.push_back(out_dir / "heat_pooled.png");
  write_gray_png(res.images.back(), pooled);

  // Dropped cells are darkened to a quarter of their brightness.
  const auto keep = drop::combine_masks(drop::drop_masks(pred.attention.M, cfg.d_phi), cfg.combine);
  Image overlay = image;
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t x = 0; x < W; ++x) {
      if (keep.values[(r * fm.m / H) * fm.n + x * fm.n / W]) continue;
      for (std::size_t c = 0; c < kChannels; ++c) overlay.at(c, r, x) *= 0.25;
    }
  }
  res.images.push_back(out_dir / "keep_mask.png");
  write_png(res.images.back(), overlay);
  res.images.push_back(out_dir / "crop.png");
  write_png(res.images.back(), pred.crop);

  res.prediction = prediction_record(model, pred, image_id, ground_truth);
  res.prediction["kept_cells"] = keep.kept();
  res.prediction["cells"] = keep.values.size();
  res.record = out_dir / "prediction.json";
  write_atomic(res.record, res.prediction.dump(2) + "\n");
  return res;
}

LocalizeResult localize(Model& model, const Image& image, const Config& cfg, const std::filesystem::path& out_dir) {
  check_image(model, image);
  const Tensor emb = model.class_embeddings();
  const Prediction pred = predict(model, emb, image, {cfg.k, cfg.alpha, cfg.loc_ratio, InferenceMode::kLocalized});
  LocalizeResult res;
  res.box = *pred.box;
  res.crop = out_dir / "crop.png";
  std::filesystem::create_directories(out_dir);
  write_png(res.crop, pred.crop);
  res.record = prediction_record(model, pred, cfg.image, std::nullopt);
  return res;
}

Report compare_dropping(const Config& cfg, const synth::Dataset& data) {
  Report report("compare_dropping");
  const auto test_idx = select_split(data, cfg);
  for (Variant v : {Variant::kNoDrop, Variant::kRandomDrop, Variant::kRandomCrop, Variant::kSac}) {
    Config c = cfg;
    c.variant = v;
    Model init = init_model(c, data);
    const std::string digest = parameter_digest(init.params());
    auto result = train(c, data, std::move(init), {});
    const auto rep = evaluate(result.model, data, test_idx, c);
    ordered_json row;
    row["variant"] = to_string(v);
    row["mode"] = to_string(c.mode);
    row["top1"] = rep.top1;
    row["hit_at_k"] = rep.hit_at_k;
    row["final_loss"] = result.epochs.empty() ? 0.0 : result.epochs.back().loss;
    row["init_digest"] = digest;
    report.add(std::move(row));
  }
  return report;
}

std::vector<double> default_sweep_values(const std::string& knob) {
  if (knob == "alpha") return {0.1, 0.3, 0.5, 0.7, 0.9};
  if (knob == "k") return {2, 5, 10, 20, 50};
  if (knob == "d_phi") return {0.05, 0.1, 0.2, 0.5};
  fail(ErrorKind::kConfig, "sweep knob must be alpha, k or d_phi, got '" + knob + "'");
}

Report sweep(const Config& cfg, const synth::Dataset& data, const std::string& knob, std::vector<double> values) {
  const auto defaults = default_sweep_values(knob);
  if (values.empty()) values = defaults;
  Report report("sweep_" + knob);
  const auto test_idx = select_split(data, cfg);
  const std::size_t N = data.num_classes();

  auto row_for = [&](double value, const EvalReport* rep, const char* note) {
    ordered_json row;
    row["knob"] = knob;
    row["value"] = value;
    row["mode"] = to_string(cfg.mode);
    row["top1"] = rep ? ordered_json(rep->top1) : ordered_json(nullptr);
    row["hit_at_k"] = rep ? ordered_json(rep->hit_at_k) : ordered_json(nullptr);
    row["note"] = note;
    return row;
  };

  if (knob == "alpha") {
    // alpha only enters at inference, so one trained model serves the whole grid.
    auto result = train(cfg, data, {});
    for (double a : values) {
      Config c = cfg;
      c.set("alpha", std::to_string(a));
      c.validate();
      const auto rep = evaluate(result.model, data, test_idx, c);
      report.add(row_for(a, &rep, ""));
    }
    return report;
  }
  for (double value : values) {
    Config c = cfg;
    if (knob == "k") {
      if (value < 1 || value != std::floor(value)) fail(ErrorKind::kConfig, "k values must be positive integers");
      if (static_cast<std::size_t>(value) > N) {
        report.add(row_for(value, nullptr, "skipped: k exceeds the number of classes"));
        continue;
      }
      c.k = static_cast<std::size_t>(value);
    } else {
      c.d_phi = value;
    }
    c.validate();
    auto result = train(c, data, {});
    const auto rep = evaluate(result.model, data, test_idx, c);
    report.add(row_for(value, &rep, ""));
  }
  return report;
}

}  // namespace sac
