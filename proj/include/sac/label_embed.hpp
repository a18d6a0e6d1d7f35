#pragma once

#include "sac/backbone.hpp"
#include "sac/params.hpp"
#include "sac/tensor.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// Class-name encoder: tokenizer, word-embedding table and gated recurrent
// encoder producing one d_e-dimensional vector per class name.
namespace sac::label {

inline constexpr std::size_t kMaxWords = 4;
inline constexpr std::size_t kPadId = 0;

// Lowercase, split on runs of non-alphanumeric characters.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& class_names);
  // One token per line; line number is the id, line 0 is the padding token.
  static Vocabulary from_lines(const std::vector<std::string>& lines);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  std::size_t id(const std::string& token) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> ids_;
};

using TokenSequence = std::array<std::size_t, kMaxWords>;

TokenSequence tokenize_pad(std::string_view class_name, const Vocabulary& vocab);

struct Config {
  std::size_t word_dim = 300;
  std::size_t d_e = 1024;
};

struct Params {
  Parameter* table = nullptr;  // vocab x word_dim, row 0 held at zero
  Parameter* W = nullptr;      // 3*d_e x word_dim, gate blocks ordered [update, reset, candidate]
  Parameter* U = nullptr;      // 3*d_e x d_e
  Parameter* b = nullptr;      // 3*d_e
};

Params add_parameters(ParameterSet& set, const Config& config, std::size_t vocab_size, Rng& rng);
Params bind_parameters(ParameterSet& set);

Tensor embed_tokens(const TokenSequence& seq, const Tensor& table);
// Scatters a kMaxWords x word_dim cotangent into table_grad; the padding row never receives gradient.
void embed_tokens_backward(const TokenSequence& seq, const Tensor& d_emb, Tensor& table_grad);
// Zeroes the padding row of the table's gradient (and the row itself).
void enforce_padding_row(Parameter& table);

// Per-step intermediates for a batch of sequences encoded column-wise.
struct GruTrace {
  std::vector<Tensor> x;       // per step: word_dim x C
  std::vector<Tensor> h_prev;  // per step: d_e x C
  std::vector<Tensor> z, r, cand;
  Tensor h;                    // final hidden state, d_e x C
};

// Encodes C sequences at once. seq_embs[c] is kMaxWords x word_dim; the
// result is d_e x C, column c being the final hidden state for sequence c.
Tensor gru_encode_batch(const std::vector<Tensor>& seq_embs, const Tensor& W, const Tensor& U, const Tensor& b,
                        GruTrace* trace = nullptr);
Tensor gru_encode(const Tensor& seq_emb, const Tensor& W, const Tensor& U, const Tensor& b);

struct GruGrads {
  Tensor dW, dU, db;
  std::vector<Tensor> d_seq_embs;  // per sequence: kMaxWords x word_dim
};
GruGrads gru_backward(const GruTrace& trace, const Tensor& W, const Tensor& U, const Tensor& dh);

// Encodes a set of class ids, reusing encodings across repeated ids and
// keeping what the backward pass needs.
class ClassEncoder {
 public:
  ClassEncoder(const Params& params, const Vocabulary& vocab, const std::vector<std::string>& names);

  // Encodes every distinct class among `classes`; later lookups are column reads.
  void encode(const std::vector<std::size_t>& classes);
  // Columns for the requested classes, in order: d_e x classes.size().
  Tensor gather(const std::vector<std::size_t>& classes) const;
  // Accumulates a d_e x classes.size() cotangent for later backward().
  void accumulate(const std::vector<std::size_t>& classes, const Tensor& dE);
  // Pushes accumulated cotangents into the table and recurrent parameter grads.
  void backward();

 private:
  Params params_;
  const Vocabulary& vocab_;
  const std::vector<std::string>& names_;
  std::vector<std::size_t> encoded_;        // class ids, column order
  std::map<std::size_t, std::size_t> col_;  // class id -> column
  std::vector<TokenSequence> seqs_;
  GruTrace trace_;
  Tensor dH_;
};

// Column j is the encoding of names[topk.classes[j]].
Tensor embed_topk(const backbone::TopKPrediction& topk, const std::vector<std::string>& names,
                  const Vocabulary& vocab, const Params& params);

}  // namespace sac::label
