// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on stderr.
// Usage: acceptance [criterion numbers...]   (default: all)

#include "harness_fixture.hpp"
#include "joint_oracles.hpp"
#include "sac/assessment.hpp"
#include "sac/dropping.hpp"
#include "sac/joint_attention.hpp"
#include "sac/localization.hpp"
#include "sac/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace sac;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// --- 1 ---------------------------------------------------------------------

Verdict factorization() {
  const auto t0 = Clock::now();
  Rng rng(101, "acceptance/factorization");
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d_f = 1 + rng.index(8), d_e = 1 + rng.index(8), d_j = 1 + rng.index(8);
    const std::size_t f = 1 + rng.index(16), k = 1 + rng.index(10);
    const Tensor F = uniform_tensor({d_f, f}, -1, 1, rng), E = uniform_tensor({d_e, k}, -1, 1, rng);
    const Tensor T_u = uniform_tensor({d_f, d_e, d_j}, -1, 1, rng), T_M = uniform_tensor({d_f, d_e}, -1, 1, rng);
    const Tensor M = joint::attention_map(F, E, T_M).M;
    const Tensor J = joint::joint_representation(F, E, T_u, M);
    worst = std::max(worst, testing::max_relative_gap(testing::naive_joint(F, E, T_u, M), J));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0, fmt::format("max rel gap {:.2e} (tol 1e-10) in {:.2f} s (limit 10 s)", worst, secs)};
}

// --- 2 ---------------------------------------------------------------------

Verdict gradients(const synth::Dataset& tiny) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::set<std::string> dead;
  std::size_t checked = 0;
  // Image-level and feature-level dropping exercise different backward routes.
  for (const char* level : {"image", "feature"}) {
    Config cfg = testing::tiny_config();
    cfg.seed = 23;
    cfg.drop_level = level;
    Model model = init_model(cfg, tiny);
    testing::jitter_biases(model, 7);
    const auto idx = tiny.indices("train");
    const std::vector<std::size_t> batch(idx.begin(), idx.begin() + 3);
    for (const auto& c : testing::end_to_end_gradients(cfg, tiny, model, batch, 4)) {
      ++checked;
      if (c.max_abs_grad == 0.0) dead.insert(c.name);
      if (c.max_rel_err > worst) {
        worst = c.max_rel_err;
        worst_name = std::string(level) + ":" + c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-4 && dead.empty() && secs < 120.0;
  std::string detail = fmt::format("{} parameter checks, max_rel_err {:.2e} at {} (tol 1e-4), {:.1f} s (limit 120 s)",
                                   checked, worst, worst_name, secs);
  if (!dead.empty()) detail += fmt::format(", {} parameters with zero gradient", dead.size());
  return {ok, detail};
}

// --- 3 ---------------------------------------------------------------------

Verdict normalization() {
  Rng rng(303, "acceptance/normalization");
  double att_gap = 0.0, fuse_gap = 0.0;
  std::size_t underflow = 0;  // exp() reaching exactly 0 once logit spreads exceed ~745
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d_f = 1 + rng.index(16), d_e = 1 + rng.index(16), f = 1 + rng.index(64), k = 1 + rng.index(20);
    const double scale = std::pow(10.0, rng.uniform(-2, 1.5));
    const Tensor F = uniform_tensor({d_f, f}, -scale, scale, rng), E = uniform_tensor({d_e, k}, -scale, scale, rng);
    const Tensor T_M = uniform_tensor({d_f, d_e}, -1, 1, rng);
    const Tensor M = joint::attention_map(F, E, T_M).M;
    double s = 0.0;
    for (double v : M.values()) {
      s += v;
      underflow += v == 0.0;
    }
    att_gap = std::max(att_gap, std::abs(s - 1.0));
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 2 + rng.index(200);
    const double spread = std::pow(10.0, rng.uniform(-1, 2));
    const Tensor pr1 = diff::softmax(uniform_tensor({N}, -spread, spread, rng));
    const Tensor pr2 = diff::softmax(uniform_tensor({N}, -spread, spread, rng));
    const auto fused = assess::fuse(pr1, pr2, rng.uniform(0, 1));
    double s = 0.0;
    for (double v : fused.pr.values()) s += v;
    fuse_gap = std::max(fuse_gap, std::abs(s - 1.0));
  }
  return {att_gap <= 1e-9 && fuse_gap <= 1e-9,
          fmt::format("attention |sum-1| <= {:.1e}, fused |sum-1| <= {:.1e} over 1000 each (tol 1e-9); {} attention "
                      "entries underflowed to 0",
                      att_gap, fuse_gap, underflow)};
}

// --- 4 ---------------------------------------------------------------------

Verdict dropping() {
  Rng rng(404, "acceptance/dropping");
  std::size_t mismatches = 0, boundary_cells = 0, boundary_dropped = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t f = 1 + rng.index(64), k = 1 + rng.index(12);
    const double d_phi = rng.uniform(0.01, 0.99);
    Tensor M = uniform_tensor({f, k}, 0.0, 1.0, rng);
    double gmax = 0.0;
    for (double v : M.values()) gmax = std::max(gmax, v);
    // Plant entries sitting exactly on the threshold.
    const double thr = d_phi * gmax;
    for (int b = 0; b < 3; ++b) {
      const std::size_t i = rng.index(f), j = rng.index(k);
      if (M.at(i, j) != gmax) M.at(i, j) = thr;
    }
    const auto masks = drop::drop_masks(M, d_phi);
    std::vector<std::uint8_t> any(f, 0), all(f, 1);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < f; ++i) {
        const std::uint8_t keep = M.at(i, j) > thr ? 0 : 1;
        if (masks[j].values[i] != keep) ++mismatches;
        if (M.at(i, j) == thr) {
          ++boundary_cells;
          boundary_dropped += masks[j].values[i] == 0;
        }
        any[i] |= keep;
        all[i] &= keep;
      }
    }
    if (drop::combine_masks(masks, drop::Combine::kOr).values != any) ++mismatches;
    if (drop::combine_masks(masks, drop::Combine::kAnd).values != all) ++mismatches;
  }
  return {mismatches == 0 && boundary_dropped == 0 && boundary_cells > 0,
          fmt::format("{} mismatches over 100 instances; {} boundary entries, {} dropped", mismatches, boundary_cells,
                      boundary_dropped)};
}

// --- 5 ---------------------------------------------------------------------

loc::CropBox brute_box(const Tensor& h, double ratio) {
  double peak = -1.0;
  for (double v : h.values()) peak = std::max(peak, v);
  const std::size_t rows = h.dim(0), cols = h.dim(1);
  loc::CropBox box{rows, cols, 0, 0};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (h.at(r, c) >= ratio * peak) {
        box.x1 = std::min(box.x1, r);
        box.y1 = std::min(box.y1, c);
        box.x2 = std::max(box.x2, r);
        box.y2 = std::max(box.y2, c);
      }
    }
  }
  return box;
}

Tensor random_heatmap(Rng& rng) {
  const std::size_t m = 2 + rng.index(7), n = 2 + rng.index(7), k = 1 + rng.index(10);
  Tensor M = uniform_tensor({m * n, k}, 0.0, 1.0, rng);
  for (auto& v : M.values()) v = std::pow(v, 4.0);  // peaky, like a trained map
  const std::size_t H = m * (1 + rng.index(8)), W = n * (1 + rng.index(8));
  return loc::bilinear_upsample(loc::pool_correlation(M, m, n), H, W);
}

Verdict localization() {
  Rng rng(505, "acceptance/localization");
  std::size_t mismatches = 0, misses = 0, violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor h = random_heatmap(rng);
    const auto box = loc::threshold_bbox(h, 0.1);
    if (!(box == brute_box(h, 0.1))) ++mismatches;
    const auto peak = std::max_element(h.values().begin(), h.values().end()) - h.values().begin();
    const auto p = static_cast<std::size_t>(peak);
    if (!box.contains(p / h.dim(1), p % h.dim(1))) ++misses;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor h = random_heatmap(rng);
    std::vector<double> ratios{0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95};
    for (std::size_t r = 1; r < ratios.size(); ++r) {
      const auto loose = loc::threshold_bbox(h, ratios[r - 1]), tight = loc::threshold_bbox(h, ratios[r]);
      const bool nested = loose.x1 <= tight.x1 && loose.y1 <= tight.y1 && loose.x2 >= tight.x2 && loose.y2 >= tight.y2;
      violations += !nested;
    }
  }
  return {mismatches == 0 && misses == 0 && violations == 0,
          fmt::format("{} box mismatches / 100, {} boxes missing the peak, {} nesting violations over 20 cases",
                      mismatches, misses, violations)};
}

// --- 6, 7, 8 ----------------------------------------------------------------

// Desk-scale profile shared by both sides of every comparison.
Config desk_config(std::uint64_t seed) {
  Config cfg;
  cfg.image_size = 32;
  cfg.d_e = 64;
  cfg.d_j = 64;
  cfg.lr = 0.005;
  cfg.epochs = 20;
  cfg.seed = seed;
  cfg.quiet = true;
  return cfg;
}

double accuracy(Model& model, const synth::Dataset& data, Config cfg, InferenceMode mode) {
  cfg.mode = mode;
  cfg.split = "test";
  return evaluate(model, data, select_split(data, cfg), cfg).top1;
}

struct SeedRun {
  std::uint64_t seed;
  Model sac;
  double sac_fused, sac_coarse, baseline;
};

struct Study {
  std::vector<SeedRun> runs;
  double mean_gap() const {
    double g = 0.0;
    for (const auto& r : runs) g += r.sac_fused - r.baseline;
    return g / static_cast<double>(runs.size());
  }
};

Study run_study(const synth::Dataset& data) {
  Study study;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t0 = Clock::now();
    Config cfg = desk_config(seed);
    auto sac = train(cfg, data).model;
    Config base = cfg;
    base.variant = Variant::kBackbone;
    auto bb = train(base, data).model;
    SeedRun run{seed, std::move(sac), 0, 0, 0};
    run.sac_fused = accuracy(run.sac, data, cfg, InferenceMode::kFused);
    run.sac_coarse = accuracy(run.sac, data, cfg, InferenceMode::kBackboneOnly);
    run.baseline = accuracy(bb, data, base, InferenceMode::kBackboneOnly);
    progress(fmt::format("seed {}: sac fused {:.4f} (its coarse head {:.4f}), baseline {:.4f}  [{:.0f} s]", seed,
                         run.sac_fused, run.sac_coarse, run.baseline, seconds_since(t0)));
    study.runs.push_back(std::move(run));
  }
  return study;
}

Verdict improvement(const Study& study, double secs) {
  int wins = 0;
  std::string rows;
  for (const auto& r : study.runs) {
    wins += r.sac_fused > r.baseline;
    rows += fmt::format(" {:.3f}/{:.3f}", r.sac_fused, r.baseline);
  }
  return {wins >= 4, fmt::format("fused SAC beats the backbone baseline in {}/5 seeds (need 4); sac/base:{}; mean gap "
                                 "{:+.4f}; {:.0f} s",
                                 wins, rows, study.mean_gap(), secs)};
}

Verdict sweeps(Study& study, const synth::Dataset& data) {
  // alpha: re-evaluate the trained models, no retraining.
  double d_alpha = 0.0;
  for (auto& r : study.runs) {
    Config cfg = desk_config(r.seed);
    cfg.alpha = 0.3;
    d_alpha += std::abs(accuracy(r.sac, data, cfg, InferenceMode::kFused) - r.sac_fused);
  }
  d_alpha /= static_cast<double>(study.runs.size());
  const double gap = study.mean_gap();
  const bool alpha_ok = gap > 0.0 && d_alpha <= 0.5 * gap;

  // k and d_phi: retrain on two seeds and compare with the default models.
  double k2 = 0.0, k10 = 0.0, phi5 = 0.0, phi1 = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    auto& r = study.runs[s];
    Config cfg = desk_config(r.seed);
    cfg.k = 2;
    auto m2 = train(cfg, data).model;
    k2 += accuracy(m2, data, cfg, InferenceMode::kFused) / 2.0;
    k10 += r.sac_fused / 2.0;
    cfg = desk_config(r.seed);
    cfg.d_phi = 0.5;
    auto m5 = train(cfg, data).model;
    phi5 += accuracy(m5, data, cfg, InferenceMode::kFused) / 2.0;
    phi1 += r.sac_fused / 2.0;
    progress(fmt::format("sweep seed {} done", r.seed));
  }
  const bool k_ok = k2 < k10, phi_ok = phi5 < phi1;
  return {alpha_ok && k_ok && phi_ok,
          fmt::format("alpha: mean |acc(.5)-acc(.3)| {:.4f} vs gap {:+.4f} (need <= half) {}; k: {:.4f} (k=2) vs {:.4f} "
                      "(k=10) {}; d_phi: {:.4f} (0.5) vs {:.4f} (0.1) {}",
                      d_alpha, gap, alpha_ok ? "ok" : "no", k2, k10, k_ok ? "ok" : "no", phi5, phi1,
                      phi_ok ? "ok" : "no")};
}

Verdict complexity(Model& model, const synth::Dataset& data) {
  Config cfg = desk_config(1);
  cfg.split = "test";
  const auto idx = select_split(data, cfg);
  cfg.mode = InferenceMode::kBackboneOnly;
  const auto bo = evaluate(model, data, idx, cfg);
  const std::size_t backbone = model.params().numel_in_group("backbone");
  // Alternate the two timed modes and keep the fastest of three rounds each.
  double fused = 1e300, localized = 1e300;
  for (int round = 0; round < 3; ++round) {
    cfg.mode = InferenceMode::kFused;
    fused = std::min(fused, evaluate(model, data, idx, cfg).seconds_per_image);
    cfg.mode = InferenceMode::kLocalized;
    localized = std::min(localized, evaluate(model, data, idx, cfg).seconds_per_image);
  }
  const double ratio = localized / fused;
  const bool ok = bo.touched_params == backbone && ratio >= 1.7 && ratio <= 2.3;
  return {ok, fmt::format("backbone_only touched {} of {} backbone params ({} total); localized/fused time {:.2f}x "
                          "({:.2f} ms vs {:.2f} ms, need 1.7-2.3x)",
                          bo.touched_params, backbone, model.params().numel(), ratio, localized * 1e3, fused * 1e3)};
}

// --- 9 ---------------------------------------------------------------------

Verdict chance(const synth::Dataset& data) {
  Config cfg = desk_config(1);
  Model model = init_model(cfg, data);
  const double n = static_cast<double>(data.indices("test").size());
  const double p = 1.0 / static_cast<double>(data.num_classes());
  const double bound = 3.0 * std::sqrt(p * (1.0 - p) / n);
  bool ok = true;
  std::string detail;
  for (auto mode : {InferenceMode::kBackboneOnly, InferenceMode::kFused, InferenceMode::kLocalized}) {
    const double acc = accuracy(model, data, cfg, mode);
    ok = ok && std::abs(acc - p) <= bound;
    detail += fmt::format("{} {:.4f}, ", to_string(mode), acc);
  }
  return {ok, detail + fmt::format("chance {:.4f} +- {:.4f} (3 sigma, n={})", p, bound, n)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int c) { return wanted.empty() || wanted.contains(c); };

  std::map<int, std::pair<std::string, Verdict>> verdicts;
  auto record = [&](int c, std::string name, Verdict v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << c << " " << name << ": " << v.detail << std::endl;
    verdicts[c] = {std::move(name), std::move(v)};
  };

  try {
    if (want(1)) record(1, "factorization identity", factorization());
    if (want(2)) record(2, "gradient suite", gradients(testing::tiny_dataset("acceptance_grad", 4)));
    if (want(3)) record(3, "normalization", normalization());
    if (want(4)) record(4, "dropping oracle", dropping());
    if (want(5)) record(5, "localization oracle", localization());

    if (want(6) || want(7) || want(8) || want(9)) {
      const auto dir = fs::temp_directory_path() / "sac_acceptance_data";
      fs::remove_all(dir);
      synth::DatasetSpec spec;
      spec.groups = 10;
      spec.siblings_per_group = 4;
      spec.images_per_class = 50;
      spec.image_size = 32;
      spec.seed = 1;
      progress("generating G=10 S=4 dataset, 50 images per class");
      synth::generate_dataset(spec, dir);
      const auto data = synth::load_manifest(dir / "manifest.jsonl");

      if (want(9)) record(9, "chance-level control", chance(data));
      if (want(6) || want(7) || want(8)) {
        const auto t0 = Clock::now();
        auto study = run_study(data);
        const double secs = seconds_since(t0);
        if (want(6)) record(6, "directional improvement", improvement(study, secs));
        if (want(8)) record(8, "complexity accounting", complexity(study.runs[0].sac, data));
        if (want(7)) record(7, "knob sweeps", sweeps(study, data));
      }
      fs::remove_all(dir);
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL error: " << e.what() << std::endl;
    return 1;
  }

  std::size_t failed = 0;
  for (const auto& [c, nv] : verdicts) failed += !nv.second.pass;
  std::cout << fmt::format("{} of {} criteria passed", verdicts.size() - failed, verdicts.size()) << std::endl;
  return failed == 0 ? 0 : 1;
}
