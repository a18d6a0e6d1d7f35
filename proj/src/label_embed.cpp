#include "sac/label_embed.hpp"

#include "sac/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace sac::label {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto uch = static_cast<unsigned char>(ch);
    if (std::isalnum(uch)) {
      current.push_back(static_cast<char>(std::tolower(uch)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocabulary::Vocabulary() : tokens_{"<pad>"}, ids_{{"<pad>", kPadId}} {}

Vocabulary Vocabulary::build(const std::vector<std::string>& class_names) {
  Vocabulary vocab;
  for (const auto& name : class_names) {
    const auto words = split_words(name);
    const std::size_t used = std::min(words.size(), kMaxWords);
    for (std::size_t i = 0; i < used; ++i) {
      if (!vocab.contains(words[i])) {
        vocab.ids_[words[i]] = vocab.tokens_.size();
        vocab.tokens_.push_back(words[i]);
      }
    }
  }
  return vocab;
}

Vocabulary Vocabulary::from_lines(const std::vector<std::string>& lines) {
  if (lines.empty() || lines.front() != "<pad>") {
    fail(ErrorKind::kParse, "vocabulary must start with the <pad> token");
  }
  Vocabulary vocab;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty() || vocab.contains(lines[i])) {
      fail(ErrorKind::kParse, "vocabulary line " + std::to_string(i) + ": empty or duplicate token");
    }
    vocab.ids_[lines[i]] = vocab.tokens_.size();
    vocab.tokens_.push_back(lines[i]);
  }
  return vocab;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) fail(ErrorKind::kRange, "unknown token '" + token + "'");
  return it->second;
}

TokenSequence tokenize_pad(std::string_view class_name, const Vocabulary& vocab) {
  const auto words = split_words(class_name);
  if (words.empty()) fail(ErrorKind::kParse, "class name '" + std::string(class_name) + "' has no words");
  TokenSequence seq{};
  for (std::size_t i = 0; i < kMaxWords && i < words.size(); ++i) seq[i] = vocab.id(words[i]);
  return seq;
}

Params add_parameters(ParameterSet& set, const Config& config, std::size_t vocab_size, Rng& rng) {
  Tensor table({vocab_size, config.word_dim});
  for (std::size_t i = config.word_dim; i < table.size(); ++i) table[i] = rng.normal(0.0, 1.0);
  set.add("label.word_table", "label_embed", std::move(table));
  const std::size_t h = config.d_e;
  set.add("label.gru.W", "label_embed", uniform_tensor({3 * h, config.word_dim}, -0.08, 0.08, rng));
  set.add("label.gru.U", "label_embed", uniform_tensor({3 * h, h}, -0.08, 0.08, rng));
  set.add("label.gru.b", "label_embed", Tensor({3 * h}));
  return bind_parameters(set);
}

Params bind_parameters(ParameterSet& set) {
  return {&set.get("label.word_table"), &set.get("label.gru.W"), &set.get("label.gru.U"), &set.get("label.gru.b")};
}

Tensor embed_tokens(const TokenSequence& seq, const Tensor& table) {
  const std::size_t dim = table.dim(1);
  Tensor out({kMaxWords, dim});
  for (std::size_t t = 0; t < kMaxWords; ++t) {
    if (seq[t] >= table.dim(0)) {
      fail(ErrorKind::kRange, "token id " + std::to_string(seq[t]) + " outside vocabulary of " +
                                  std::to_string(table.dim(0)));
    }
    if (seq[t] == kPadId) continue;
    std::copy_n(table.data() + seq[t] * dim, dim, out.data() + t * dim);
  }
  return out;
}

void embed_tokens_backward(const TokenSequence& seq, const Tensor& d_emb, Tensor& table_grad) {
  const std::size_t dim = table_grad.dim(1);
  for (std::size_t t = 0; t < kMaxWords; ++t) {
    if (seq[t] == kPadId) continue;
    double* row = table_grad.data() + seq[t] * dim;
    for (std::size_t j = 0; j < dim; ++j) row[j] += d_emb[t * dim + j];
  }
}

void enforce_padding_row(Parameter& table) {
  const std::size_t dim = table.value.dim(1);
  std::fill_n(table.value.data(), dim, 0.0);
  std::fill_n(table.grad.data(), dim, 0.0);
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_gru_shapes(const Tensor& W, const Tensor& U, const Tensor& b, std::size_t word_dim) {
  const std::size_t h3 = U.dim(0);
  if (h3 % 3 != 0 || U.dim(1) * 3 != h3 || W.dim(0) != h3 || b.size() != h3 || W.dim(1) != word_dim) {
    fail(ErrorKind::kShape, "gru: W " + shape_string(W.shape()) + ", U " + shape_string(U.shape()) + ", b " +
                                shape_string(b.shape()) + " inconsistent with word_dim " + std::to_string(word_dim));
  }
}

}  // namespace

Tensor gru_encode_batch(const std::vector<Tensor>& seq_embs, const Tensor& W, const Tensor& U, const Tensor& b,
                        GruTrace* trace) {
  if (seq_embs.empty()) fail(ErrorKind::kShape, "gru: no sequences to encode");
  const std::size_t word_dim = seq_embs.front().dim(1);
  check_gru_shapes(W, U, b, word_dim);
  const std::size_t hd = U.dim(1);
  const auto C = static_cast<Eigen::Index>(seq_embs.size());
  const auto H = static_cast<Eigen::Index>(hd);
  for (const auto& s : seq_embs) {
    if (s.shape() != Shape{kMaxWords, word_dim}) {
      fail(ErrorKind::kShape, "gru: input " + shape_string(s.shape()) + " expected (" + std::to_string(kMaxWords) +
                                  ", " + std::to_string(word_dim) + ")");
    }
  }
  if (trace) *trace = GruTrace{};

  Tensor h({hd, seq_embs.size()});
  for (std::size_t t = 0; t < kMaxWords; ++t) {
    Tensor x({word_dim, seq_embs.size()});
    for (std::size_t c = 0; c < seq_embs.size(); ++c) {
      for (std::size_t j = 0; j < word_dim; ++j) x.at(j, c) = seq_embs[c][t * word_dim + j];
    }
    Eigen::MatrixXd gx = W.mat() * x.mat();
    gx.colwise() += b.vec();
    const auto Um = U.mat();
    Eigen::MatrixXd gh = Um.topRows(2 * H) * h.mat();

    Tensor z({hd, seq_embs.size()}), r({hd, seq_embs.size()}), cand({hd, seq_embs.size()});
    z.mat() = (gx.topRows(H) + gh.topRows(H)).unaryExpr([](double v) { return sigmoid(v); });
    r.mat() = (gx.middleRows(H, H) + gh.bottomRows(H)).unaryExpr([](double v) { return sigmoid(v); });
    Eigen::MatrixXd rh = r.mat().cwiseProduct(h.mat());
    cand.mat() = (gx.bottomRows(H) + Um.bottomRows(H) * rh).array().tanh().matrix();

    Tensor next({hd, seq_embs.size()});
    next.mat() = (Eigen::MatrixXd::Ones(H, C) - z.mat()).cwiseProduct(h.mat()) + z.mat().cwiseProduct(cand.mat());
    if (!next.all_finite()) fail(ErrorKind::kNumeric, "gru: non-finite hidden state at step " + std::to_string(t));
    if (trace) {
      trace->x.push_back(std::move(x));
      trace->h_prev.push_back(std::move(h));
      trace->z.push_back(std::move(z));
      trace->r.push_back(std::move(r));
      trace->cand.push_back(std::move(cand));
    }
    h = std::move(next);
  }
  if (trace) trace->h = h;
  return h;
}

Tensor gru_encode(const Tensor& seq_emb, const Tensor& W, const Tensor& U, const Tensor& b) {
  return gru_encode_batch({seq_emb}, W, U, b).reshaped({U.dim(1)});
}

GruGrads gru_backward(const GruTrace& trace, const Tensor& W, const Tensor& U, const Tensor& dh_final) {
  const std::size_t hd = U.dim(1);
  const auto H = static_cast<Eigen::Index>(hd);
  const std::size_t word_dim = W.dim(1);
  const std::size_t C = trace.h.dim(1);
  GruGrads g{Tensor(W.shape()), Tensor(U.shape()), Tensor({3 * hd}), {}};
  g.d_seq_embs.assign(C, Tensor({kMaxWords, word_dim}));

  const auto Um = U.mat();
  Eigen::MatrixXd dh = dh_final.reshaped({hd, C}).mat();
  for (std::size_t t = kMaxWords; t-- > 0;) {
    const auto z = trace.z[t].mat();
    const auto r = trace.r[t].mat();
    const auto cand = trace.cand[t].mat();
    const auto hp = trace.h_prev[t].mat();
    const auto x = trace.x[t].mat();

    Eigen::MatrixXd dcand = dh.cwiseProduct(z);
    Eigen::MatrixXd dz = dh.cwiseProduct(cand - hp);
    Eigen::MatrixXd dh_prev = dh.cwiseProduct(Eigen::MatrixXd::Ones(H, static_cast<Eigen::Index>(C)) - z);

    Eigen::MatrixXd da(3 * H, static_cast<Eigen::Index>(C));
    da.bottomRows(H) = dcand.cwiseProduct((1.0 - cand.array().square()).matrix());
    Eigen::MatrixXd rh = r.cwiseProduct(hp);
    Eigen::MatrixXd drh = Um.bottomRows(H).transpose() * da.bottomRows(H);
    dh_prev += drh.cwiseProduct(r);
    Eigen::MatrixXd dr = drh.cwiseProduct(hp);
    da.middleRows(H, H) = dr.cwiseProduct((r.array() * (1.0 - r.array())).matrix());
    da.topRows(H) = dz.cwiseProduct((z.array() * (1.0 - z.array())).matrix());

    g.dW.mat().noalias() += da * x.transpose();
    g.db.vec() += da.rowwise().sum();
    g.dU.mat().topRows(2 * H).noalias() += da.topRows(2 * H) * hp.transpose();
    g.dU.mat().bottomRows(H).noalias() += da.bottomRows(H) * rh.transpose();
    dh_prev.noalias() += Um.topRows(2 * H).transpose() * da.topRows(2 * H);

    Eigen::MatrixXd dx = W.mat().transpose() * da;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < word_dim; ++j) {
        g.d_seq_embs[c][t * word_dim + j] = dx(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
      }
    }
    dh = std::move(dh_prev);
  }
  return g;
}

ClassEncoder::ClassEncoder(const Params& params, const Vocabulary& vocab, const std::vector<std::string>& names)
    : params_(params), vocab_(vocab), names_(names) {}

void ClassEncoder::encode(const std::vector<std::size_t>& classes) {
  encoded_.clear();
  col_.clear();
  seqs_.clear();
  for (auto c : classes) {
    if (c >= names_.size()) fail(ErrorKind::kRange, "class " + std::to_string(c) + " has no name");
    if (col_.count(c)) continue;
    col_[c] = encoded_.size();
    encoded_.push_back(c);
  }
  const Tensor& table = params_.table->use();
  std::vector<Tensor> embs;
  embs.reserve(encoded_.size());
  for (auto c : encoded_) {
    seqs_.push_back(tokenize_pad(names_[c], vocab_));
    embs.push_back(embed_tokens(seqs_.back(), table));
  }
  gru_encode_batch(embs, params_.W->use(), params_.U->use(), params_.b->use(), &trace_);
  dH_ = Tensor(trace_.h.shape());
}

Tensor ClassEncoder::gather(const std::vector<std::size_t>& classes) const {
  const std::size_t hd = trace_.h.dim(0);
  Tensor E({hd, classes.size()});
  for (std::size_t j = 0; j < classes.size(); ++j) {
    auto it = col_.find(classes[j]);
    if (it == col_.end()) fail(ErrorKind::kRange, "class " + std::to_string(classes[j]) + " was not encoded");
    E.mat().col(static_cast<Eigen::Index>(j)) = trace_.h.mat().col(static_cast<Eigen::Index>(it->second));
  }
  return E;
}

void ClassEncoder::accumulate(const std::vector<std::size_t>& classes, const Tensor& dE) {
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(col_.at(classes[j]));
    dH_.mat().col(col) += dE.mat().col(static_cast<Eigen::Index>(j));
  }
}

void ClassEncoder::backward() {
  if (encoded_.empty()) return;
  auto g = gru_backward(trace_, params_.W->value, params_.U->value, dH_);
  params_.W->grad.vec() += g.dW.vec();
  params_.U->grad.vec() += g.dU.vec();
  params_.b->grad.vec() += g.db.vec();
  for (std::size_t c = 0; c < encoded_.size(); ++c) {
    embed_tokens_backward(seqs_[c], g.d_seq_embs[c], params_.table->grad);
  }
  dH_.fill(0.0);
}

Tensor embed_topk(const backbone::TopKPrediction& topk, const std::vector<std::string>& names,
                  const Vocabulary& vocab, const Params& params) {
  ClassEncoder encoder(params, vocab, names);
  encoder.encode(topk.classes);
  return encoder.gather(topk.classes);
}

}  // namespace sac::label
