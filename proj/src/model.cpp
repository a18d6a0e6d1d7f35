#include "sac/model.hpp"

#include "sac/diffcore.hpp"
#include "sac/error.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sac {

Architecture Architecture::from_config(const Config& cfg, std::size_t num_classes) {
  Architecture a;
  a.backbone.widths = cfg.widths;
  a.backbone.pooled_blocks = cfg.pooled_blocks;
  a.backbone.d_v = cfg.d_v;
  a.word_dim = cfg.word_dim;
  a.d_e = cfg.d_e;
  a.d_j = cfg.d_j;
  a.num_classes = num_classes;
  a.image_size = cfg.image_size;
  return a;
}

Model::Model(const Architecture& arch, std::vector<std::string> class_names, std::uint64_t seed)
    : arch_(arch), names_(std::move(class_names)) {
  if (names_.size() != arch_.num_classes) {
    fail(ErrorKind::kConfig, "model expects " + std::to_string(arch_.num_classes) + " class names, got " +
                                 std::to_string(names_.size()));
  }
  vocab_ = label::Vocabulary::build(names_);
  Rng rb(seed, "init/backbone"), rl(seed, "init/label"), rj(seed, "init/joint"), ra(seed, "init/assess");
  backbone::add_parameters(params_, arch_.backbone, arch_.num_classes, rb);
  label::add_parameters(params_, {arch_.word_dim, arch_.d_e}, vocab_.size(), rl);
  joint::add_parameters(params_, arch_.backbone.d_f(), arch_.d_e, arch_.d_j, rj);
  assess::add_parameters(params_, arch_.d_j, arch_.num_classes, ra);
}

ModelViews Model::views() {
  return {backbone::bind_parameters(params_, arch_.backbone), label::bind_parameters(params_),
          joint::bind_parameters(params_), assess::bind_parameters(params_)};
}

Tensor Model::class_embeddings() {
  const auto v = views();
  label::ClassEncoder enc(v.label, vocab_, names_);
  std::vector<std::size_t> all(names_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  enc.encode(all);
  return enc.gather(all);
}

// ---- checkpoint -------------------------------------------------------------

namespace {

constexpr const char* kMagic = "sac-checkpoint 1";

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& where) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) fail(ErrorKind::kParse, "truncated checkpoint at " + where);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string header_text(const Architecture& a, const std::vector<std::string>& names, const label::Vocabulary& vocab,
                        std::size_t n_params) {
  std::ostringstream h;
  h << kMagic << "\n";
  h << "widths=";
  for (std::size_t i = 0; i < a.backbone.widths.size(); ++i) h << (i ? "," : "") << a.backbone.widths[i];
  h << "\npooled_blocks=" << a.backbone.pooled_blocks << "\nd_v=" << a.backbone.d_v << "\nword_dim=" << a.word_dim
    << "\nd_e=" << a.d_e << "\nd_j=" << a.d_j << "\nnum_classes=" << a.num_classes << "\nimage_size=" << a.image_size
    << "\n";
  h << "classes " << names.size() << "\n";
  for (const auto& n : names) h << n << "\n";
  h << "vocab " << vocab.size() << "\n";
  for (const auto& t : vocab.tokens()) h << t << "\n";
  h << "parameters " << n_params << "\n";
  return h.str();
}

std::string read_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kParse, "truncated checkpoint header");
  return line;
}

std::size_t counted(const std::string& line, const std::string& label) {
  if (line.rfind(label + " ", 0) != 0) fail(ErrorKind::kParse, "checkpoint header: expected '" + label + " <count>'");
  return static_cast<std::size_t>(std::stoull(line.substr(label.size() + 1)));
}

}  // namespace

void Model::save(const std::filesystem::path& path) const {
  static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + tmp.string());
    out << header_text(arch_, names_, vocab_, params_.size());
    for (const auto& p : params_) {
      put_u64(out, p->name.size());
      out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
      put_u64(out, p->value.rank());
      for (auto d : p->value.shape()) put_u64(out, d);
      for (double v : p->value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    out.flush();
    if (!out) fail(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  if (read_line(in) != kMagic) fail(ErrorKind::kParse, path.string() + " is not a sac checkpoint");
  std::string arch_text;
  for (int i = 0; i < 8; ++i) arch_text += read_line(in) + "\n";
  const auto kv = parse_key_values(arch_text, path.string());
  Config cfg;
  std::size_t num_classes = 0;
  for (const auto& [k, v] : kv) {
    if (k == "num_classes") {
      num_classes = static_cast<std::size_t>(std::stoull(v));
    } else {
      cfg.set(k, v);
    }
  }
  Model m;
  m.arch_ = Architecture::from_config(cfg, num_classes);
  const std::size_t n_classes = counted(read_line(in), "classes");
  if (n_classes != num_classes) fail(ErrorKind::kParse, "checkpoint class list does not match num_classes");
  for (std::size_t i = 0; i < n_classes; ++i) m.names_.push_back(read_line(in));
  const std::size_t n_vocab = counted(read_line(in), "vocab");
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n_vocab; ++i) tokens.push_back(read_line(in));
  m.vocab_ = label::Vocabulary::from_lines(tokens);
  if (!(m.vocab_ == label::Vocabulary::build(m.names_))) {
    fail(ErrorKind::kParse, "checkpoint vocabulary does not match its class names");
  }

  // Rebuild the layout, then overwrite every tensor from the file.
  Model layout(m.arch_, m.names_, 0);
  m.params_ = std::move(layout.params_);
  const std::size_t n_params = counted(read_line(in), "parameters");
  if (n_params != m.params_.size()) {
    fail(ErrorKind::kParse, "checkpoint holds " + std::to_string(n_params) + " parameters, architecture needs " +
                                std::to_string(m.params_.size()));
  }
  for (std::size_t i = 0; i < n_params; ++i) {
    const std::string where = path.string() + " parameter " + std::to_string(i);
    const auto len = get_u64(in, where);
    if (len > 4096) fail(ErrorKind::kParse, "implausible name length at " + where);
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) fail(ErrorKind::kParse, "truncated checkpoint at " + where);
    Parameter& p = m.params_.get(name);
    const auto rank = get_u64(in, where);
    Shape shape(rank);
    for (auto& d : shape) d = get_u64(in, where);
    if (shape != p.value.shape()) {
      fail(ErrorKind::kParse, "parameter " + name + " has shape " + shape_string(shape) + ", architecture expects " +
                                  shape_string(p.value.shape()));
    }
    for (auto& v : p.value.values()) v = std::bit_cast<double>(get_u64(in, where));
  }
  return m;
}

// ---- inference --------------------------------------------------------------

namespace {

struct Pass {
  backbone::FeatureMap fm;
  Tensor pr1;
  backbone::TopKPrediction topk;
  joint::AttentionMap attention;
  Tensor pr2;
};

Pass run_pass(Model& model, const ModelViews& v, const Tensor& class_emb, const Image& image, std::size_t k, bool fine) {
  Pass p;
  p.fm = backbone::extract_features(image, model.arch().backbone, v.backbone);
  p.pr1 = diff::softmax(backbone::coarse_logits(p.fm.V, v.backbone.head_w->use(), v.backbone.head_b->use()));
  p.topk = backbone::topk_search(p.pr1, k);
  if (!fine) return p;
  Tensor E({model.arch().d_e, k});
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < E.dim(0); ++r) E.at(r, j) = class_emb.at(r, p.topk.classes[j]);
  }
  const Tensor F = p.fm.flat();
  p.attention = joint::attention_map(F, E, v.joint.T_M->use());
  const Tensor J = joint::joint_representation(F, E, v.joint.T_u->use(), p.attention.M);
  p.pr2 = diff::softmax(assess::fine_logits(J, v.assess.W->use(), v.assess.b->use()));
  return p;
}

std::size_t argmax(const Tensor& v) {
  return static_cast<std::size_t>(std::max_element(v.values().begin(), v.values().end()) - v.values().begin());
}

}  // namespace

Prediction predict(Model& model, const Tensor& class_emb, const Image& image, const PredictOptions& options) {
  const std::size_t N = model.arch().num_classes;
  const std::size_t k = std::min(options.k, N);
  const bool fine = options.mode != InferenceMode::kBackboneOnly;
  if (fine && (class_emb.rank() != 2 || class_emb.dim(1) != N)) {
    fail(ErrorKind::kShape, "predict: class embeddings " + shape_string(class_emb.shape()) + " for " +
                                std::to_string(N) + " classes");
  }
  const auto v = model.views();
  Prediction out;
  Pass first = run_pass(model, v, class_emb, image, k, fine);
  out.backbone_passes = 1;
  out.features = first.fm;
  out.topk = first.topk;
  out.attention = first.attention;
  if (!fine) {
    out.pr1 = first.pr1;
    out.pr = first.pr1;
    out.top1 = argmax(out.pr);
    return out;
  }
  Pass final_pass;
  if (options.mode == InferenceMode::kLocalized) {
    const Tensor grid = loc::pool_correlation(first.attention.M, first.fm.m, first.fm.n);
    const Tensor heat = loc::bilinear_upsample(grid, image.height, image.width);
    out.box = loc::threshold_bbox(heat, options.loc_ratio);
    out.crop = loc::crop(image, *out.box, image.height, image.width);
    final_pass = run_pass(model, v, class_emb, out.crop, k, true);
    out.backbone_passes = 2;
  } else {
    final_pass = std::move(first);
  }
  out.pr1 = final_pass.pr1;
  out.pr2 = final_pass.pr2;
  out.pr = assess::fuse(out.pr1, out.pr2, options.alpha).pr;
  out.topk2 = backbone::topk_search(out.pr2, k);
  out.top1 = argmax(out.pr);
  return out;
}

}  // namespace sac
