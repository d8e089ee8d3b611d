#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rstparse/autodiff.hpp"
#include "rstparse/core.hpp"
#include "rstparse/vocab.hpp"

namespace rstparse {

using Rng = std::mt19937_64;

// Independent stream for a named purpose (init, shuffle, dropout, split)
// derived from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  std::vector<std::uint32_t> material{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (char c : purpose) material.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(material.begin(), material.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct ModelDims {
  std::size_t word_dim = 300;
  std::size_t pos_dim = 300;
  std::size_t pretrained_dim = 0;  // 0 when no frozen table is loaded
  std::size_t lstm_hidden = 200;
  std::size_t ff_hidden = 200;
  int num_relations = 20;  // including LEAF

  std::size_t input_dim() const { return word_dim + pos_dim + pretrained_dim; }
  std::size_t edu_dim() const { return 4 * lstm_hidden; }
  std::size_t span_dim() const { return 8 * lstm_hidden; }
  std::size_t pair_dim() const { return 16 * lstm_hidden; }
  std::size_t state_dim() const { return 36 * lstm_hidden; }
  int action_count() const { return num_actions(num_relations); }
  bool operator==(const ModelDims&) const = default;
};

struct LstmCell {
  Parameter wx;  // 4H x input, gate order: input, forget, candidate, output
  Parameter wh;  // 4H x H
  Parameter b;   // 4H
};

// Two-layer scorer: out = W2 relu(W1 x + b1) + b2.
struct FeedForward {
  Parameter w1, b1, w2, b2;
};

struct ModelParams {
  Parameter word_emb;
  Parameter pos_emb;
  Parameter pretrained;  // frozen; empty when unused
  LstmCell fwd, bwd;
  FeedForward span, rel, nuc, action;

  template <class F>
  void for_each(F&& f) {
    for (Parameter* p : all()) f(*p);
  }
  template <class F>
  void for_each(F&& f) const {
    for (const Parameter* p : const_cast<ModelParams*>(this)->all()) f(*p);
  }

  void zero_grad() {
    for_each([](Parameter& p) { p.zero_grad(); });
  }

 private:
  std::vector<Parameter*> all() {
    return {&word_emb, &pos_emb, &pretrained, &fwd.wx, &fwd.wh, &fwd.b, &bwd.wx, &bwd.wh, &bwd.b,
            &span.w1, &span.b1, &span.w2, &span.b2, &rel.w1, &rel.b1, &rel.w2, &rel.b2,
            &nuc.w1, &nuc.b1, &nuc.w2, &nuc.b2, &action.w1, &action.b1, &action.w2, &action.b2};
  }
};

struct Model {
  ModelDims dims;
  Vocabulary words;
  Vocabulary tags;
  RelationVocab relations;
  ModelParams params;
};

namespace detail {

inline FeedForward make_ff(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out) {
  return {Parameter(name + ".w1", hidden, in), Parameter(name + ".b1", hidden, 1),
          Parameter(name + ".w2", out, hidden), Parameter(name + ".b2", out, 1)};
}

inline LstmCell make_lstm(const std::string& name, std::size_t in, std::size_t hidden) {
  return {Parameter(name + ".wx", 4 * hidden, in), Parameter(name + ".wh", 4 * hidden, hidden),
          Parameter(name + ".b", 4 * hidden, 1)};
}

inline void fill_uniform(Parameter& p, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : p.value) v = u(rng);
}

inline void glorot(Parameter& p, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(p.rows + p.cols));
  fill_uniform(p, -a, a, rng);
}

}  // namespace detail

// Allocates every tensor at the right shape, all zeros.
inline ModelParams zero_params(const ModelDims& d, int word_vocab, int tag_vocab) {
  ModelParams p;
  p.word_emb = Parameter("word_emb", static_cast<std::size_t>(word_vocab), d.word_dim);
  p.pos_emb = Parameter("pos_emb", static_cast<std::size_t>(tag_vocab), d.pos_dim);
  p.pretrained = Parameter("pretrained", d.pretrained_dim ? static_cast<std::size_t>(word_vocab) : 0,
                           d.pretrained_dim, false);
  p.fwd = detail::make_lstm("lstm_fwd", d.input_dim(), d.lstm_hidden);
  p.bwd = detail::make_lstm("lstm_bwd", d.input_dim(), d.lstm_hidden);
  const auto rels = static_cast<std::size_t>(d.num_relations);
  p.span = detail::make_ff("span_scorer", d.span_dim(), d.ff_hidden, 1);
  p.rel = detail::make_ff("rel_scorer", d.pair_dim(), d.ff_hidden, rels);
  p.nuc = detail::make_ff("nuc_scorer", d.pair_dim(), d.ff_hidden, kNumNuclearity);
  p.action = detail::make_ff("action_scorer", d.state_dim(), d.ff_hidden,
                             static_cast<std::size_t>(d.action_count()));
  return p;
}

// Word embeddings U(-0.1, 0.1); POS embeddings U(0, 1); weight matrices
// Glorot-uniform; biases zero.
inline void initialize_params(ModelParams& p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  detail::fill_uniform(p.word_emb, -0.1, 0.1, rng);
  detail::fill_uniform(p.pos_emb, 0.0, 1.0, rng);
  for (LstmCell* c : {&p.fwd, &p.bwd}) {
    detail::glorot(c->wx, rng);
    detail::glorot(c->wh, rng);
  }
  for (FeedForward* f : {&p.span, &p.rel, &p.nuc, &p.action}) {
    detail::glorot(f->w1, rng);
    detail::glorot(f->w2, rng);
  }
}

inline Model make_model(const ModelDims& dims, Vocabulary words, Vocabulary tags, RelationVocab relations,
                        std::uint64_t seed) {
  if (dims.num_relations != relations.size())
    throw std::invalid_argument("relation count does not match the relation vocabulary");
  Model m{dims, std::move(words), std::move(tags), std::move(relations), {}};
  m.params = zero_params(dims, m.words.size(), m.tags.size());
  initialize_params(m.params, seed);
  return m;
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  p.for_each([&](const Parameter& t) {
    for (double v : t.value)
      if (!std::isfinite(v)) ok = false;
  });
  return ok;
}

}  // namespace rstparse
