// Command-line front end: generate-data, train, eval, visualize, localize,
// compare-dropping and sweep. Settings come from defaults, then --config
// (key=value lines), then --key value flags.

#include "sac/config.hpp"
#include "sac/error.hpp"
#include "sac/harness.hpp"
#include "sac/synthdata.hpp"
#include "sac/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_file, "key=value config file");
  for (const auto& key : sac::Config::keys()) {
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    cmd->add_option_function<std::string>(names, [&ov, key](const std::string& v) { ov.values[key] = v; },
                                          "config: " + key);
  }
}

sac::Config resolve(const Overrides& ov) {
  sac::Config cfg = ov.config_file.empty() ? sac::Config{} : sac::load_config(ov.config_file);
  for (const auto& [k, v] : ov.values) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) sac::fail(sac::ErrorKind::kConfig, std::string("--") + key + " is required");
}

void emit(const sac::Report& report, const sac::Config& cfg) {
  const auto path = report.write(cfg.out);
  std::cout << report.table();
  if (!cfg.quiet) std::cout << "# wrote " << path.string() << "\n";
}

sac::Image load_image(const std::string& path) {
  if (!fs::exists(path)) sac::fail(sac::ErrorKind::kIo, "unreadable image " + path);
  return sac::read_png(path);
}

int run_generate(const sac::Config& cfg) {
  sac::synth::DatasetSpec spec;
  spec.groups = cfg.groups;
  spec.siblings_per_group = cfg.siblings;
  spec.images_per_class = cfg.images_per_class;
  spec.image_size = cfg.image_size;
  spec.seed = cfg.seed;
  spec.nuisance = cfg.nuisance;
  const auto records = sac::synth::generate_dataset(spec, cfg.out);
  std::size_t train = 0;
  for (const auto& r : records) train += r.split == "train";
  sac::Report rep("generate");
  rep.add({{"manifest", (fs::path(cfg.out) / "manifest.jsonl").string()},
           {"classes", spec.num_classes()},
           {"images", records.size()},
           {"train", train},
           {"test", records.size() - train},
           {"image_size", spec.image_size},
           {"seed", spec.seed}});
  emit(rep, cfg);
  return 0;
}

int run_train(const sac::Config& cfg) {
  require_path(cfg.manifest, "manifest");
  const auto data = sac::synth::load_manifest(cfg.manifest);
  const fs::path ckpt = cfg.checkpoint.empty() ? fs::path(cfg.out) / "model.ckpt" : fs::path(cfg.checkpoint);
  sac::Report rep("train");
  sac::TrainOptions opts;
  opts.checkpoint = ckpt;
  opts.on_epoch = [&](const sac::EpochStats& s) {
    rep.add(sac::epoch_row(s));
    if (!cfg.quiet) std::cerr << "epoch " << s.epoch << " loss " << s.loss << " (" << s.seconds << " s)\n";
  };
  sac::train(cfg, data, opts);
  emit(rep, cfg);
  if (!cfg.quiet) std::cout << "# checkpoint " << ckpt.string() << "\n";
  return 0;
}

int run_eval(const sac::Config& cfg) {
  require_path(cfg.manifest, "manifest");
  require_path(cfg.checkpoint, "checkpoint");
  auto model = sac::Model::load(cfg.checkpoint);
  const auto data = sac::synth::load_manifest(cfg.manifest);
  const auto rep = sac::evaluate(model, data, sac::select_split(data, cfg), cfg);
  sac::Report report("eval");
  report.add(sac::eval_row(rep));
  emit(report, cfg);
  return 0;
}

int run_visualize(const sac::Config& cfg) {
  require_path(cfg.checkpoint, "checkpoint");
  require_path(cfg.image, "image");
  auto model = sac::Model::load(cfg.checkpoint);
  const auto res = sac::visualize(model, load_image(cfg.image), cfg, cfg.out, std::nullopt, cfg.image);
  sac::Report report("visualize");
  for (const auto& p : res.images) report.add({{"file", p.string()}});
  report.add({{"file", res.record.string()}});
  std::cout << report.table();
  return 0;
}

int run_localize(const sac::Config& cfg) {
  require_path(cfg.checkpoint, "checkpoint");
  require_path(cfg.image, "image");
  auto model = sac::Model::load(cfg.checkpoint);
  const auto res = sac::localize(model, load_image(cfg.image), cfg, cfg.out);
  sac::Report report("localize");
  report.add({{"image", cfg.image},
              {"x1", res.box.x1},
              {"y1", res.box.y1},
              {"x2", res.box.x2},
              {"y2", res.box.y2},
              {"top1", res.record["top1"]["class_name"]},
              {"crop", res.crop.string()}});
  emit(report, cfg);
  return 0;
}

int run_compare(const sac::Config& cfg) {
  require_path(cfg.manifest, "manifest");
  const auto data = sac::synth::load_manifest(cfg.manifest);
  emit(sac::compare_dropping(cfg, data), cfg);
  return 0;
}

int run_sweep(const sac::Config& cfg, const std::string& knob, const std::string& values_text) {
  require_path(cfg.manifest, "manifest");
  std::vector<double> values;
  std::stringstream ss(values_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      sac::fail(sac::ErrorKind::kConfig, "invalid sweep value '" + item + "'");
    }
  }
  const auto data = sac::synth::load_manifest(cfg.manifest);
  emit(sac::sweep(cfg, data, knob, values), cfg);
  return 0;
}

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self assessment classifier: data generation, training, evaluation and ablations"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    Overrides ov;
    CLI::App* app = nullptr;
  };
  std::vector<Command> commands{
      {"generate-data", "write a synthetic fine-grained dataset and manifest", {}},
      {"train", "train a model and write a checkpoint", {}},
      {"eval", "evaluate a checkpoint in one inference mode", {}},
      {"visualize", "dump attention heatmaps, keep mask, crop and prediction", {}},
      {"localize", "crop the attended region of one image", {}},
      {"compare-dropping", "train matched-seed dropping variants", {}},
      {"sweep", "train or evaluate across an alpha, k or d_phi grid", {}},
  };
  std::string knob, values;
  for (auto& c : commands) {
    c.app = app.add_subcommand(c.name, c.help);
    add_config_options(c.app, c.ov);
  }
  commands.back().app->add_option("--knob", knob, "alpha, k or d_phi")->required();
  commands.back().app->add_option("--values", values, "comma-separated grid (default: the standard grid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    for (auto& c : commands) {
      if (!c.app->parsed()) continue;
      const auto cfg = resolve(c.ov);
      const std::string name = c.name;
      if (name == "generate-data") return run_generate(cfg);
      if (name == "train") return run_train(cfg);
      if (name == "eval") return run_eval(cfg);
      if (name == "visualize") return run_visualize(cfg);
      if (name == "localize") return run_localize(cfg);
      if (name == "compare-dropping") return run_compare(cfg);
      if (name == "sweep") return run_sweep(cfg, knob, values);
    }
  } catch (const sac::Error& e) {
    return report_error(std::string(sac::to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return report_error("usage", "no subcommand");
}
