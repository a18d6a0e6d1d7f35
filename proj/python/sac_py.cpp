#include "sac/assessment.hpp"
#include "sac/backbone.hpp"
#include "sac/config.hpp"
#include "sac/diffcore.hpp"
#include "sac/dropping.hpp"
#include "sac/error.hpp"
#include "sac/harness.hpp"
#include "sac/joint_attention.hpp"
#include "sac/label_embed.hpp"
#include "sac/localization.hpp"
#include "sac/model.hpp"
#include "sac/synthdata.hpp"
#include "sac/trainer.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace sac;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  Tensor t(shape);
  std::copy_n(a.data(), t.size(), t.data());
  return t;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy_n(t.data(), t.size(), out.mutable_data());
  return out;
}

Config to_config(const std::map<std::string, std::string>& overrides) {
  Config cfg;
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

py::dict eval_dict(const EvalReport& rep) {
  py::dict d;
  d["mode"] = to_string(rep.mode);
  d["images"] = rep.images;
  d["top1"] = rep.top1;
  d["k"] = rep.k;
  d["hit_at_k"] = rep.hit_at_k;
  d["seconds_per_image"] = rep.seconds_per_image;
  d["backbone_passes"] = rep.backbone_passes;
  d["touched_params"] = rep.touched_params;
  d["param_counts"] = rep.param_counts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Self assessment classifier core (C++).";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> error(m, "SacError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("softmax", [](const Array& v) { return to_array(diff::softmax(to_tensor(v))); }, py::arg("logits"),
        "Max-subtracted softmax over every entry.");
  m.def(
      "topk_search",
      [](const Array& scores, std::size_t k) {
        auto t = backbone::topk_search(to_tensor(scores), k);
        return py::make_tuple(t.classes, t.scores);
      },
      py::arg("scores"), py::arg("k"), "Indices and scores of the k largest entries, ties to the lower index.");

  m.def(
      "attention_map",
      [](const Array& F, const Array& E, const Array& T_M) {
        return to_array(joint::attention_map(to_tensor(F), to_tensor(E), to_tensor(T_M)).M);
      },
      py::arg("F"), py::arg("E"), py::arg("T_M"));
  m.def(
      "joint_representation",
      [](const Array& F, const Array& E, const Array& T_u, const Array& M) {
        return to_array(joint::joint_representation(to_tensor(F), to_tensor(E), to_tensor(T_u), to_tensor(M)));
      },
      py::arg("F"), py::arg("E"), py::arg("T_u"), py::arg("M"));
  m.def(
      "full_bilinear_reference",
      [](const Array& F, const Array& E, const Array& T) {
        return to_array(joint::full_bilinear_reference(to_tensor(F), to_tensor(E), to_tensor(T)));
      },
      py::arg("F"), py::arg("E"), py::arg("T"));

  m.def(
      "fuse",
      [](const Array& pr1, const Array& pr2, double alpha) {
        return to_array(assess::fuse(to_tensor(pr1), to_tensor(pr2), alpha).pr);
      },
      py::arg("pr1"), py::arg("pr2"), py::arg("alpha"));

  m.def(
      "keep_mask",
      [](const Array& M, double d_phi, const std::string& combine) {
        return drop::combine_masks(drop::drop_masks(to_tensor(M), d_phi), drop::parse_combine(combine)).values;
      },
      py::arg("M"), py::arg("d_phi"), py::arg("combine") = "or", "Combined keep mask (1 = keep) per cell.");

  m.def(
      "pool_correlation",
      [](const Array& M, std::size_t rows, std::size_t cols) { return to_array(loc::pool_correlation(to_tensor(M), rows, cols)); },
      py::arg("M"), py::arg("m"), py::arg("n"));
  m.def(
      "bilinear_upsample",
      [](const Array& grid, std::size_t H, std::size_t W) { return to_array(loc::bilinear_upsample(to_tensor(grid), H, W)); },
      py::arg("grid"), py::arg("H"), py::arg("W"));
  m.def(
      "threshold_bbox",
      [](const Array& heat, double ratio) {
        auto b = loc::threshold_bbox(to_tensor(heat), ratio);
        return py::make_tuple(b.x1, b.y1, b.x2, b.y2);
      },
      py::arg("heatmap"), py::arg("ratio") = loc::kDefaultRatio, "Inclusive (x1, y1, x2, y2); x indexes rows.");

  m.def("split_words", &label::split_words, py::arg("text"));

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out, std::size_t groups, std::size_t siblings, std::size_t images_per_class,
         std::size_t image_size, std::uint64_t seed) {
        synth::DatasetSpec spec;
        spec.groups = groups;
        spec.siblings_per_group = siblings;
        spec.images_per_class = images_per_class;
        spec.image_size = image_size;
        spec.seed = seed;
        return synth::generate_dataset(spec, out).size();
      },
      py::arg("out"), py::arg("groups") = 10, py::arg("siblings") = 4, py::arg("images_per_class") = 50,
      py::arg("image_size") = 64, py::arg("seed") = 0, "Writes images and manifest.jsonl; returns the record count.");

  m.def("config_keys", &Config::keys);
  m.def(
      "default_config", [] { return Config{}.dump(); }, "Default settings as key=value lines.");

  m.def(
      "train",
      [](const std::filesystem::path& manifest, const std::filesystem::path& checkpoint,
         const std::map<std::string, std::string>& overrides) {
        const Config cfg = to_config(overrides);
        const auto data = synth::load_manifest(manifest);
        TrainOptions opts;
        opts.checkpoint = checkpoint;
        py::gil_scoped_release release;
        const auto result = sac::train(cfg, data, opts);
        std::vector<std::map<std::string, double>> epochs;
        for (const auto& e : result.epochs) {
          epochs.push_back({{"epoch", static_cast<double>(e.epoch)}, {"lr", e.lr}, {"loss", e.loss},
                            {"coarse_ce", e.coarse_ce}, {"fine_ce", e.fine_ce}, {"aug_ce", e.aug_ce}});
        }
        return epochs;
      },
      py::arg("manifest"), py::arg("checkpoint"), py::arg("config") = std::map<std::string, std::string>{},
      "Trains from a manifest and writes a checkpoint; returns per-epoch losses.");

  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
         const std::map<std::string, std::string>& overrides) {
        const Config cfg = to_config(overrides);
        auto model = Model::load(checkpoint);
        const auto data = synth::load_manifest(manifest);
        return eval_dict(sac::evaluate(model, data, select_split(data, cfg), cfg));
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("config") = std::map<std::string, std::string>{});

  m.def(
      "predict",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& image,
         const std::map<std::string, std::string>& overrides) {
        const Config cfg = to_config(overrides);
        auto model = Model::load(checkpoint);
        const Image img = read_png(image);
        const bool fine = cfg.mode != InferenceMode::kBackboneOnly;
        const auto pred = sac::predict(model, fine ? model.class_embeddings() : Tensor{}, img,
                                       {cfg.k, cfg.alpha, cfg.loc_ratio, cfg.mode});
        return prediction_record(model, pred, image.string(), std::nullopt).dump();
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("config") = std::map<std::string, std::string>{},
      "Prediction record as a JSON string.");
}
