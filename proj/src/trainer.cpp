#include "sac/trainer.hpp"

#include "sac/diffcore.hpp"
#include "sac/dropping.hpp"
#include "sac/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

namespace sac {

Model init_model(const Config& cfg, const synth::Dataset& data) {
  return Model(Architecture::from_config(cfg, data.num_classes()), data.class_names, cfg.seed);
}

namespace {

using Clock = std::chrono::steady_clock;

void accumulate(Parameter& p, const Tensor& g) { p.grad.vec() += g.vec(); }

void accumulate_affine(Parameter& W, Parameter& b, const diff::AffineGrads& g) {
  accumulate(W, g.dW);
  accumulate(b, g.db);
}

struct Augmenter {
  const Config& cfg;
  Rng& rng;

  // Returns true and fills `out` when an augmentation pass should run.
  bool image_level(const Image& img, const backbone::FeatureMap& fm, const joint::AttentionMap& att, bool coin,
                   Image& out, drop::KeepMask* keep_out) {
    switch (cfg.variant) {
      case Variant::kSac: {
        auto keep = drop::combine_masks(drop::drop_masks(att.M, cfg.d_phi), cfg.combine);
        if (!coin || keep.keeps_all()) return false;
        if (keep_out) *keep_out = keep;
        if (cfg.drop_level == "image") out = drop::image_level_erase(img, keep, fm.m, fm.n);
        return true;
      }
      case Variant::kRandomDrop: {
        drop::KeepMask keep;
        keep.values.resize(fm.f());
        for (auto& v : keep.values) v = rng.bernoulli(cfg.random_drop_p) ? 0 : 1;
        if (!coin || keep.keeps_all()) return false;
        out = drop::image_level_erase(img, keep, fm.m, fm.n);
        return true;
      }
      case Variant::kRandomCrop: {
        const double fr = rng.uniform(cfg.random_crop_min, 1.0), fc = rng.uniform(cfg.random_crop_min, 1.0);
        const auto rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fr * img.height)));
        const auto cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fc * img.width)));
        const std::size_t r0 = rng.index(img.height - rows + 1), c0 = rng.index(img.width - cols + 1);
        if (!coin) return false;
        out = loc::crop(img, {r0, c0, r0 + rows - 1, c0 + cols - 1}, img.height, img.width);
        return true;
      }
      case Variant::kBackbone:
      case Variant::kNoDrop:
        return false;
    }
    return false;
  }
};

struct Slot {
  backbone::Trace trace;
  backbone::FeatureMap fm;
  Tensor coarse;
  backbone::TopKPrediction topk;
};

class Trainer {
 public:
  Trainer(const Config& cfg, const synth::Dataset& data, Model model)
      : cfg_(cfg), data_(data), model_(std::move(model)) {
    for (const auto& p : model_.params()) velocity_.emplace_back(p->value.shape());
  }

  TrainResult run(const TrainOptions& options) {
    const auto train_idx = data_.indices("train");
    if (train_idx.empty()) fail(ErrorKind::kConfig, "manifest has no training images");
    const std::size_t N = model_.arch().num_classes;
    if (cfg_.k > N) fail(ErrorKind::kConfig, "k=" + std::to_string(cfg_.k) + " exceeds the number of classes " + std::to_string(N));
    std::vector<EpochStats> history;
    double first_batch_loss = 0.0;
    double lr = cfg_.lr;
    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      const auto t0 = Clock::now();
      std::vector<std::size_t> order = train_idx;
      Rng shuffle(cfg_.seed, "train/shuffle/" + std::to_string(epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
      Rng aug_rng(cfg_.seed, "train/aug/" + std::to_string(epoch));
      EpochStats stats;
      stats.epoch = epoch;
      stats.lr = lr;
      for (std::size_t start = 0, step = 0; start < order.size(); start += cfg_.batch_size, ++step) {
        const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
        std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
        const auto b = step_batch(batch, lr, aug_rng, epoch, step);
        if (epoch == 1 && step == 0) first_batch_loss = b.total / static_cast<double>(batch.size());
        stats.loss += b.total;
        stats.coarse_ce += b.coarse;
        stats.fine_ce += b.fine;
        stats.aug_ce += b.aug;
        stats.aug_passes += b.aug_passes;
      }
      const double n = static_cast<double>(order.size());
      stats.loss /= n;
      stats.coarse_ce /= n;
      stats.fine_ce /= n;
      stats.aug_ce /= n;
      stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      history.push_back(stats);
      if (options.on_epoch) options.on_epoch(stats);
      if (epoch % cfg_.lr_decay_every == 0) lr *= cfg_.lr_decay;
      if (!options.checkpoint.empty() && cfg_.checkpoint_every > 0 && epoch % cfg_.checkpoint_every == 0) {
        model_.save(options.checkpoint);
      }
    }
    if (!options.checkpoint.empty()) model_.save(options.checkpoint);
    return TrainResult{std::move(model_), std::move(history), first_batch_loss};
  }

 private:
  BatchLoss step_batch(const std::vector<std::size_t>& batch, double lr, Rng& aug_rng, std::size_t epoch,
                       std::size_t step) {
    const auto out = batch_gradient(cfg_, data_, model_, batch, aug_rng, epoch, step);
    apply_update(lr);
    return out;
  }

  // SGD with momentum and L2 weight decay: v = mu v + (g + wd w); w -= lr v.
  void apply_update(double lr) {
    std::size_t i = 0;
    for (auto& p : model_.params()) {
      auto vel = velocity_[i++].vec();
      vel = cfg_.momentum * vel + p->grad.vec() + cfg_.weight_decay * p->value.vec();
      p->value.vec() -= lr * vel;
    }
    label::enforce_padding_row(*model_.views().label.table);
  }

  const Config& cfg_;
  const synth::Dataset& data_;
  Model model_;
  std::vector<Tensor> velocity_;
};

}  // namespace

BatchLoss batch_gradient(const Config& cfg, const synth::Dataset& data, Model& model,
                         const std::vector<std::size_t>& batch, Rng& aug_rng, std::size_t epoch, std::size_t step) {
  const auto v = model.views();
  const auto& arch = model.arch();
  const bool fine = cfg.variant != Variant::kBackbone;
  const double scale = 1.0 / static_cast<double>(batch.size());
  model.params().zero_grad();

  std::vector<Slot> slots(batch.size());
  std::set<std::size_t> union_classes;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& sample = data.samples[batch[i]];
    Slot& s = slots[i];
    s.fm = backbone::extract_features(sample.image, arch.backbone, v.backbone, &s.trace);
    s.coarse = backbone::coarse_logits(s.fm.V, v.backbone.head_w->value, v.backbone.head_b->value);
    if (fine) {
      s.topk = backbone::topk_search(diff::softmax(s.coarse), cfg.k);
      union_classes.insert(s.topk.classes.begin(), s.topk.classes.end());
    }
  }
  label::ClassEncoder encoder(v.label, model.vocab(), model.class_names());
  if (fine) encoder.encode({union_classes.begin(), union_classes.end()});

  Augmenter augmenter{cfg, aug_rng};
  const assess::LossWeights weights{cfg.w_coarse, cfg.w_fine, cfg.w_aug};
  BatchLoss out;
  // Columns of the batched T_u gradient: vec(G_b) and dJ_b.
  Tensor Gs, dJs;
  if (fine) {
    Gs = Tensor({arch.backbone.d_f() * arch.d_e, batch.size()});
    dJs = Tensor({arch.d_j, batch.size()});
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& sample = data.samples[batch[i]];
    Slot& s = slots[i];
    const Tensor F = s.fm.flat();
    Tensor dF({arch.backbone.d_f(), s.fm.f()});
    double total = 0.0;

    // Coarse head.
    auto coarse_ce = diff::cross_entropy(s.coarse, sample.class_id);
    double coarse_loss = coarse_ce.loss, fine_loss = 0.0, aug_loss = 0.0;
    Tensor d_coarse = coarse_ce.dlogits;
    d_coarse.vec() *= cfg.w_coarse * scale;

    if (fine) {
      const Tensor E = encoder.gather(s.topk.classes);
      const auto att = joint::attention_map(F, E, v.joint.T_M->value);
      const Tensor J = joint::joint_representation(F, E, v.joint.T_u->value, att.M);
      const Tensor fl = assess::fine_logits(J, v.assess.W->value, v.assess.b->value);

      // Augmentation pass on the dropped (or randomly altered) image.
      const bool coin = aug_rng.bernoulli(cfg.aug_prob);
      Image aug_img;
      drop::KeepMask keep;
      Tensor aug_logits;
      backbone::Trace aug_trace;
      backbone::FeatureMap aug_fm;
      Tensor aug_pooled;
      const bool has_aug = augmenter.image_level(sample.image, s.fm, att, coin, aug_img, &keep);
      if (has_aug && cfg.drop_level == "feature" && cfg.variant == Variant::kSac) {
        const Tensor Fd = drop::apply_feature_drop(F, keep);
        aug_pooled = Tensor({arch.backbone.d_f()});
        aug_pooled.vec() = Fd.mat().rowwise().mean();
        const Tensor Vd = diff::affine(aug_pooled, v.backbone.visual_w->value, v.backbone.visual_b->value);
        aug_fm.V = Vd;
      } else if (has_aug) {
        aug_fm = backbone::extract_features(aug_img, arch.backbone, v.backbone, &aug_trace);
      }
      if (has_aug) aug_logits = backbone::coarse_logits(aug_fm.V, v.backbone.head_w->value, v.backbone.head_b->value);

      auto loss = assess::sac_loss(s.coarse, fl, has_aug ? &aug_logits : nullptr, sample.class_id, weights);
      fine_loss = loss.breakdown.fine_ce;
      aug_loss = loss.breakdown.aug_ce;

      // Fine head and joint attention.
      Tensor d_fine = loss.d_fine;
      d_fine.vec() *= scale;
      const auto gfine = diff::affine_backward(J, v.assess.W->value, d_fine);
      accumulate_affine(*v.assess.W, *v.assess.b, gfine);
      const auto gj = joint::joint_backward(F, E, v.joint.T_u->value, v.joint.T_M->value, att, gfine.dx, {}, false);
      const Tensor G = joint::couple_moment(F, E, att.M);
      for (std::size_t r = 0; r < G.size(); ++r) Gs.at(r, i) = G[r];
      for (std::size_t r = 0; r < gfine.dx.size(); ++r) dJs.at(r, i) = gfine.dx[r];
      accumulate(*v.joint.T_M, gj.dT_M);
      encoder.accumulate(s.topk.classes, gj.dE);
      dF.vec() += gj.dF.vec();

      if (has_aug) {
        ++out.aug_passes;
        Tensor d_aug = loss.d_aug;
        d_aug.vec() *= scale;
        const auto ghead = diff::affine_backward(aug_fm.V, v.backbone.head_w->value, d_aug);
        accumulate_affine(*v.backbone.head_w, *v.backbone.head_b, ghead);
        if (aug_pooled.empty()) {
          backbone::backward_features(arch.backbone, v.backbone, aug_trace, Tensor{}, ghead.dx);
        } else {
          const auto gvis = diff::affine_backward(aug_pooled, v.backbone.visual_w->value, ghead.dx);
          accumulate_affine(*v.backbone.visual_w, *v.backbone.visual_b, gvis);
          const double inv_f = 1.0 / static_cast<double>(s.fm.f());
          for (std::size_t a = 0; a < dF.dim(0); ++a) {
            for (std::size_t c = 0; c < dF.dim(1); ++c) {
              if (keep.values[c]) dF.at(a, c) += gvis.dx[a] * inv_f;
            }
          }
        }
      }
    }
    total = cfg.w_coarse * coarse_loss + cfg.w_fine * fine_loss + cfg.w_aug * aug_loss;
    if (!std::isfinite(total)) {
      fail(ErrorKind::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                                    " image " + data.samples[batch[i]].path);
    }
    const auto ghead = diff::affine_backward(s.fm.V, v.backbone.head_w->value, d_coarse);
    accumulate_affine(*v.backbone.head_w, *v.backbone.head_b, ghead);
    backbone::backward_features(arch.backbone, v.backbone, s.trace, fine ? dF : Tensor{}, ghead.dx);

    out.total += total;
    out.coarse += coarse_loss;
    out.fine += fine_loss;
    out.aug += aug_loss;
  }
  if (fine) {
    joint::accumulate_T_u_grad(v.joint.T_u->grad, Gs, dJs);
    encoder.backward();
  }
  return out;
}

TrainResult train(const Config& cfg, const synth::Dataset& data, const TrainOptions& options) {
  return train(cfg, data, init_model(cfg, data), options);
}

TrainResult train(const Config& cfg, const synth::Dataset& data, Model model, const TrainOptions& options) {
  cfg.validate();
  if (!(model.arch() == Architecture::from_config(cfg, data.num_classes()))) {
    fail(ErrorKind::kConfig, "model architecture does not match the config and dataset");
  }
  Trainer trainer(cfg, data, std::move(model));
  return trainer.run(options);
}

std::vector<std::size_t> select_split(const synth::Dataset& data, const Config& cfg) {
  auto idx = data.indices(cfg.split == "all" ? "" : cfg.split);
  if (cfg.limit > 0 && idx.size() > cfg.limit) idx.resize(cfg.limit);
  return idx;
}

EvalReport evaluate(Model& model, const synth::Dataset& data, const std::vector<std::size_t>& indices,
                    const Config& cfg) {
  if (indices.empty()) fail(ErrorKind::kConfig, "nothing to evaluate: split '" + cfg.split + "' is empty");
  if (data.class_names != model.class_names()) {
    fail(ErrorKind::kConfig, "checkpoint classes do not match the manifest's classes");
  }
  EvalReport rep;
  rep.mode = cfg.mode;
  rep.k = std::min(cfg.k, model.arch().num_classes);
  const auto& params = model.params();
  for (const auto& p : params) rep.param_counts[p->group] += p->value.size();
  rep.param_counts["total"] = params.numel();

  model.params().clear_touched();
  const bool fine = cfg.mode != InferenceMode::kBackboneOnly;
  const Tensor class_emb = fine ? model.class_embeddings() : Tensor{};
  const PredictOptions opts{cfg.k, cfg.alpha, cfg.loc_ratio, cfg.mode};
  std::size_t hits = 0;
  const auto t0 = Clock::now();
  for (std::size_t i : indices) {
    const auto& s = data.samples[i];
    if (s.image.height != model.arch().image_size || s.image.width != model.arch().image_size) {
      fail(ErrorKind::kShape, "image " + s.path + " is " + std::to_string(s.image.height) + "x" +
                                  std::to_string(s.image.width) + ", model expects " +
                                  std::to_string(model.arch().image_size));
    }
    const auto pred = predict(model, class_emb, s.image, opts);
    rep.predictions.push_back(pred.top1);
    rep.correct += pred.top1 == s.class_id;
    hits += pred.topk.contains(s.class_id);
    rep.backbone_passes += pred.backbone_passes;
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  rep.images = indices.size();
  rep.top1 = static_cast<double>(rep.correct) / static_cast<double>(rep.images);
  rep.hit_at_k = static_cast<double>(hits) / static_cast<double>(rep.images);
  rep.seconds_per_image = secs / static_cast<double>(rep.images);
  rep.touched_params = model.params().touched_numel();
  return rep;
}

}  // namespace sac
