#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "rstparse/autodiff.hpp"
#include "rstparse/core.hpp"
#include "rstparse/model.hpp"

namespace rstparse {

// Document mapped to vocabulary ids, with each EDU's first and last word
// position in the flattened word sequence.
struct IndexedDocument {
  std::vector<int> words;
  std::vector<int> tags;
  std::vector<std::pair<std::size_t, std::size_t>> edu_bounds;

  int num_edus() const { return static_cast<int>(edu_bounds.size()); }
};

inline IndexedDocument index_document(const Model& m, const Document& doc) {
  if (doc.edus.empty()) throw std::invalid_argument("document " + doc.doc_id + " has no EDUs");
  IndexedDocument out;
  for (const auto& e : doc.edus) {
    if (e.tokens.empty() || e.tokens.size() != e.pos_tags.size())
      throw std::invalid_argument("document " + doc.doc_id + ": malformed EDU " + std::to_string(e.index));
    const std::size_t first = out.words.size();
    for (std::size_t t = 0; t < e.tokens.size(); ++t) {
      out.words.push_back(m.words.index(e.tokens[t]));
      out.tags.push_back(m.tags.index(e.pos_tags[t]));
    }
    out.edu_bounds.emplace_back(first, out.words.size() - 1);
  }
  return out;
}

// Inverted-dropout masks. Recurrent outputs get one mask per word; each
// scorer's hidden layer gets one mask shared by every call within the
// document, so decoding and loss see the same network.
struct DropoutMasks {
  std::vector<Vec> fwd, bwd;
  Vec span, rel, nuc, action;
};

inline DropoutMasks sample_dropout(const ModelDims& d, std::size_t num_words, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must be in [0, 1)");
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  auto draw = [&](std::size_t n) {
    Vec m(n);
    for (auto& v : m) v = keep(rng) ? s : 0.0;
    return m;
  };
  DropoutMasks out;
  for (std::size_t t = 0; t < num_words; ++t) out.fwd.push_back(draw(d.lstm_hidden));
  for (std::size_t t = 0; t < num_words; ++t) out.bwd.push_back(draw(d.lstm_hidden));
  out.span = draw(d.ff_hidden);
  out.rel = draw(d.ff_hidden);
  out.nuc = draw(d.ff_hidden);
  out.action = draw(d.ff_hidden);
  return out;
}

// e_1..e_n, each f_first ⊕ b_first ⊕ f_last ⊕ b_last (dimension 4H).
struct EncodedDocument {
  std::vector<Vec> edu_reps;

  int num_edus() const { return static_cast<int>(edu_reps.size()); }
  std::size_t dim() const { return edu_reps.empty() ? 0 : edu_reps.front().size(); }
};

struct TapedEncoding {
  std::vector<Var> edu_reps;
  EncodedDocument values;
};

namespace detail {

struct LstmState {
  Vec h, c;
};

inline LstmState lstm_step(const LstmCell& cell, std::span<const double> x, const LstmState& prev) {
  const std::size_t hidden = cell.wh.cols;
  Vec gx(4 * hidden), gh(4 * hidden);
  affine_into(cell.wx, x, &cell.b, gx);
  affine_into(cell.wh, prev.h, nullptr, gh);
  LstmState next{Vec(hidden), Vec(hidden)};
  for (std::size_t u = 0; u < hidden; ++u) {
    const double i = sigmoid(gx[u] + gh[u]);
    const double f = sigmoid(gx[hidden + u] + gh[hidden + u]);
    const double g = std::tanh(gx[2 * hidden + u] + gh[2 * hidden + u]);
    const double o = sigmoid(gx[3 * hidden + u] + gh[3 * hidden + u]);
    next.c[u] = f * prev.c[u] + i * g;
    next.h[u] = o * std::tanh(next.c[u]);
  }
  return next;
}

struct TapedLstmState {
  Var h, c;
};

inline TapedLstmState lstm_step(Tape& tape, LstmCell& cell, Var x, const TapedLstmState& prev) {
  const std::size_t hidden = cell.wh.cols;
  Var gates = tape.add(tape.affine(cell.wx, x, &cell.b), tape.affine(cell.wh, prev.h));
  Var i = tape.sigmoid(tape.slice(gates, 0, hidden));
  Var f = tape.sigmoid(tape.slice(gates, hidden, hidden));
  Var g = tape.tanh(tape.slice(gates, 2 * hidden, hidden));
  Var o = tape.sigmoid(tape.slice(gates, 3 * hidden, hidden));
  Var c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

inline Vec word_input(const ModelParams& p, int word, int tag) {
  Vec x;
  auto w = p.word_emb.row(static_cast<std::size_t>(word));
  auto t = p.pos_emb.row(static_cast<std::size_t>(tag));
  x.insert(x.end(), w.begin(), w.end());
  x.insert(x.end(), t.begin(), t.end());
  if (p.pretrained.cols > 0) {
    auto e = p.pretrained.row(static_cast<std::size_t>(word));
    x.insert(x.end(), e.begin(), e.end());
  }
  return x;
}

inline void apply_mask(Vec& v, const std::vector<Vec>& masks, std::size_t t) {
  if (masks.empty()) return;
  for (std::size_t u = 0; u < v.size(); ++u) v[u] *= masks[t][u];
}

inline bool has_masks(const DropoutMasks* m) { return m != nullptr && !m->span.empty(); }

}  // namespace detail

// Forward-only encoding.
inline EncodedDocument encode_document(const Model& m, const IndexedDocument& doc,
                                       const DropoutMasks* masks = nullptr) {
  const std::size_t len = doc.words.size();
  const std::size_t hidden = m.dims.lstm_hidden;
  const bool drop = detail::has_masks(masks);
  std::vector<Vec> f(len), b(len);
  detail::LstmState s{Vec(hidden, 0.0), Vec(hidden, 0.0)};
  for (std::size_t t = 0; t < len; ++t) {
    s = detail::lstm_step(m.params.fwd, detail::word_input(m.params, doc.words[t], doc.tags[t]), s);
    f[t] = s.h;
    if (drop) detail::apply_mask(f[t], masks->fwd, t);
  }
  s = {Vec(hidden, 0.0), Vec(hidden, 0.0)};
  for (std::size_t t = len; t-- > 0;) {
    s = detail::lstm_step(m.params.bwd, detail::word_input(m.params, doc.words[t], doc.tags[t]), s);
    b[t] = s.h;
    if (drop) detail::apply_mask(b[t], masks->bwd, t);
  }
  EncodedDocument out;
  for (auto [first, last] : doc.edu_bounds) {
    Vec e;
    e.reserve(4 * hidden);
    for (const Vec* part : {&f[first], &b[first], &f[last], &b[last]}) e.insert(e.end(), part->begin(), part->end());
    out.edu_reps.push_back(std::move(e));
  }
  return out;
}

inline EncodedDocument encode_document(const Model& m, const Document& doc) {
  return encode_document(m, index_document(m, doc));
}

// Recorded encoding; gradients flow into embeddings and both recurrent cells.
inline TapedEncoding encode_document(Tape& tape, Model& m, const IndexedDocument& doc,
                                     const DropoutMasks* masks = nullptr) {
  const std::size_t len = doc.words.size();
  const std::size_t hidden = m.dims.lstm_hidden;
  const bool drop = detail::has_masks(masks);
  auto& p = m.params;
  std::vector<Var> inputs;
  inputs.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<Var> parts{tape.lookup(p.word_emb, static_cast<std::size_t>(doc.words[t])),
                           tape.lookup(p.pos_emb, static_cast<std::size_t>(doc.tags[t]))};
    if (p.pretrained.cols > 0) parts.push_back(tape.lookup(p.pretrained, static_cast<std::size_t>(doc.words[t])));
    inputs.push_back(tape.concat(parts));
  }
  std::vector<Var> f(len), b(len);
  detail::TapedLstmState s{tape.zeros(hidden), tape.zeros(hidden)};
  for (std::size_t t = 0; t < len; ++t) {
    s = detail::lstm_step(tape, p.fwd, inputs[t], s);
    f[t] = drop ? tape.mask(s.h, masks->fwd[t]) : s.h;
  }
  s = {tape.zeros(hidden), tape.zeros(hidden)};
  for (std::size_t t = len; t-- > 0;) {
    s = detail::lstm_step(tape, p.bwd, inputs[t], s);
    b[t] = drop ? tape.mask(s.h, masks->bwd[t]) : s.h;
  }
  TapedEncoding out;
  for (auto [first, last] : doc.edu_bounds) {
    Var e = tape.concat({f[first], b[first], f[last], b[last]});
    out.edu_reps.push_back(e);
    out.values.edu_reps.push_back(tape.value(e));
  }
  return out;
}

// First covered EDU ⊕ last covered EDU.
inline Vec span_rep(const EncodedDocument& enc, int i, int j) {
  if (i < 0 || j > enc.num_edus() || i >= j) throw std::invalid_argument("span_rep: invalid span");
  const Vec& first = enc.edu_reps[static_cast<std::size_t>(i)];
  const Vec& last = enc.edu_reps[static_cast<std::size_t>(j - 1)];
  Vec out(first);
  out.insert(out.end(), last.begin(), last.end());
  return out;
}

inline Var span_rep(Tape& tape, const TapedEncoding& enc, int i, int j) {
  if (i < 0 || j > static_cast<int>(enc.edu_reps.size()) || i >= j)
    throw std::invalid_argument("span_rep: invalid span");
  return tape.concat({enc.edu_reps[static_cast<std::size_t>(i)], enc.edu_reps[static_cast<std::size_t>(j - 1)]});
}

inline void check_split(int i, int j, int k) {
  const bool internal = i < k && k < j;
  const bool leaf = j == i + 1 && k == i;
  if (!internal && !leaf)
    throw std::invalid_argument("invalid split " + std::to_string(k) + " for span (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
}

// Input to the relation/nuclearity scorers: left child rep ⊕ right child rep.
// A leaf uses its own span rep in both slots.
inline Vec pair_rep(const EncodedDocument& enc, int i, int j, int k) {
  check_split(i, j, k);
  Vec left = k == i ? span_rep(enc, i, j) : span_rep(enc, i, k);
  Vec right = k == i ? span_rep(enc, i, j) : span_rep(enc, k, j);
  left.insert(left.end(), right.begin(), right.end());
  return left;
}

inline Var pair_rep(Tape& tape, const TapedEncoding& enc, int i, int j, int k) {
  check_split(i, j, k);
  Var left = k == i ? span_rep(tape, enc, i, j) : span_rep(tape, enc, i, k);
  Var right = k == i ? span_rep(tape, enc, i, j) : span_rep(tape, enc, k, j);
  return tape.concat({left, right});
}

inline Vec feed_forward(const FeedForward& ff, std::span<const double> x, std::span<const double> mask = {}) {
  Vec h(ff.w1.rows), out(ff.w2.rows);
  affine_into(ff.w1, x, &ff.b1, h);
  for (std::size_t u = 0; u < h.size(); ++u) {
    h[u] = h[u] > 0.0 ? h[u] : 0.0;
    if (!mask.empty()) h[u] *= mask[u];
  }
  affine_into(ff.w2, h, &ff.b2, out);
  return out;
}

inline Var feed_forward(Tape& tape, FeedForward& ff, Var x, std::span<const double> mask = {}) {
  Var h = tape.relu(tape.affine(ff.w1, x, &ff.b1));
  if (!mask.empty()) h = tape.mask(h, mask);
  return tape.affine(ff.w2, h, &ff.b2);
}

inline double score_span(const EncodedDocument& enc, int i, int j, const Model& m) {
  return feed_forward(m.params.span, span_rep(enc, i, j))[0];
}

inline Vec score_rel(const EncodedDocument& enc, int i, int j, int k, const Model& m) {
  return feed_forward(m.params.rel, pair_rep(enc, i, j, k));
}

inline Vec score_nuc(const EncodedDocument& enc, int i, int j, int k, const Model& m) {
  return feed_forward(m.params.nuc, pair_rep(enc, i, j, k));
}

// Chart score oracle backed by the neural scorers. The first layer of each
// scorer is split into per-EDU column blocks precomputed once, so a cell
// costs O(H_ff * (4 + G)) instead of a full 16H-wide product.
class NeuralScores {
 public:
  NeuralScores(const Model& m, const EncodedDocument& enc, const DropoutMasks* masks = nullptr)
      : model_(&m), n_(enc.num_edus()) {
    if (n_ < 1) throw std::invalid_argument("NeuralScores: empty document");
    if (enc.dim() != m.dims.edu_dim()) throw std::invalid_argument("NeuralScores: encoding width mismatch");
    if (detail::has_masks(masks)) {
      span_mask_ = masks->span;
      rel_mask_ = masks->rel;
      nuc_mask_ = masks->nuc;
    }
    const auto& p = m.params;
    span_blocks_ = project_blocks(p.span.w1, enc, 2);
    rel_blocks_ = project_blocks(p.rel.w1, enc, 4);
    nuc_blocks_ = project_blocks(p.nuc.w1, enc, 4);
    const auto dim = static_cast<std::size_t>(n_ + 1);
    span_table_.assign(dim * dim, 0.0);
    Vec h(m.dims.ff_hidden);
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j <= n_; ++j) {
        hidden(p.span, span_blocks_, {i, j - 1}, span_mask_, h);
        Vec out(1);
        affine_into(p.span.w2, h, &p.span.b2, out);
        span_table_[static_cast<std::size_t>(i) * dim + static_cast<std::size_t>(j)] = out[0];
      }
    rel_buf_.resize(static_cast<std::size_t>(m.dims.num_relations));
    nuc_buf_.resize(kNumNuclearity);
    hidden_buf_.resize(m.dims.ff_hidden);
  }

  int num_edus() const { return n_; }
  int num_relations() const { return model_->dims.num_relations; }

  double span(int i, int j) const {
    return span_table_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(j)];
  }

  // Valid until the next rel() call.
  std::span<const double> rel(int i, int j, int k) const {
    pair_hidden(model_->params.rel, rel_blocks_, i, j, k, rel_mask_);
    affine_into(model_->params.rel.w2, hidden_buf_, &model_->params.rel.b2, rel_buf_);
    return rel_buf_;
  }

  // Valid until the next nuc() call.
  std::span<const double> nuc(int i, int j, int k) const {
    pair_hidden(model_->params.nuc, nuc_blocks_, i, j, k, nuc_mask_);
    affine_into(model_->params.nuc.w2, hidden_buf_, &model_->params.nuc.b2, nuc_buf_);
    return nuc_buf_;
  }

 private:
  // blocks[b][t] = W1[:, block b] * e_{t+1}
  using Blocks = std::vector<std::vector<Vec>>;

  static Blocks project_blocks(const Parameter& w1, const EncodedDocument& enc, std::size_t count) {
    const std::size_t width = enc.dim();
    Blocks out(count, std::vector<Vec>(enc.edu_reps.size(), Vec(w1.rows, 0.0)));
    for (std::size_t blk = 0; blk < count; ++blk)
      for (std::size_t t = 0; t < enc.edu_reps.size(); ++t) {
        const Vec& e = enc.edu_reps[t];
        Vec& dst = out[blk][t];
        for (std::size_t r = 0; r < w1.rows; ++r) {
          const double* wr = w1.value.data() + r * w1.cols + blk * width;
          double acc = 0.0;
          for (std::size_t c = 0; c < width; ++c) acc += wr[c] * e[c];
          dst[r] = acc;
        }
      }
    return out;
  }

  // Hidden layer for an input assembled from per-EDU blocks (0-based EDU ids).
  static void hidden(const FeedForward& ff, const Blocks& blocks, std::initializer_list<int> edus,
                     const Vec& mask, Vec& h) {
    for (std::size_t r = 0; r < h.size(); ++r) {
      double acc = ff.b1.value[r];
      std::size_t blk = 0;
      for (int t : edus) acc += blocks[blk++][static_cast<std::size_t>(t)][r];
      acc = acc > 0.0 ? acc : 0.0;
      h[r] = mask.empty() ? acc : acc * mask[r];
    }
  }

  void pair_hidden(const FeedForward& ff, const Blocks& blocks, int i, int j, int k, const Vec& mask) const {
    check_split(i, j, k);
    if (k == i)
      hidden(ff, blocks, {i, i, i, i}, mask, hidden_buf_);
    else
      hidden(ff, blocks, {i, k - 1, k, j - 1}, mask, hidden_buf_);
  }

  const Model* model_;
  int n_;
  Vec span_mask_, rel_mask_, nuc_mask_;
  Blocks span_blocks_, rel_blocks_, nuc_blocks_;
  Vec span_table_;
  mutable Vec rel_buf_, nuc_buf_, hidden_buf_;
};

// Recorded scorers for loss construction.
inline Var span_score(Tape& tape, Model& m, const TapedEncoding& enc, int i, int j, const DropoutMasks* masks) {
  const bool drop = detail::has_masks(masks);
  return feed_forward(tape, m.params.span, span_rep(tape, enc, i, j),
                      drop ? std::span<const double>(masks->span) : std::span<const double>{});
}

inline Var rel_scores(Tape& tape, Model& m, const TapedEncoding& enc, int i, int j, int k, const DropoutMasks* masks) {
  const bool drop = detail::has_masks(masks);
  return feed_forward(tape, m.params.rel, pair_rep(tape, enc, i, j, k),
                      drop ? std::span<const double>(masks->rel) : std::span<const double>{});
}

inline Var nuc_scores(Tape& tape, Model& m, const TapedEncoding& enc, int i, int j, int k, const DropoutMasks* masks) {
  const bool drop = detail::has_masks(masks);
  return feed_forward(tape, m.params.nuc, pair_rep(tape, enc, i, j, k),
                      drop ? std::span<const double>(masks->nuc) : std::span<const double>{});
}

}  // namespace rstparse
