#pragma once

#include <array>
#include <charconv>
#include <concepts>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rstparse/autodiff.hpp"
#include "rstparse/core.hpp"
#include "rstparse/encoder.hpp"

namespace rstparse {

// Anything that can score chart decisions: span(i,j), and per-label score
// vectors for relation (width G) and nuclearity (width 4) at span (i,j) with
// split k. Leaves are queried as (i, i+1, i).
template <class S>
concept ScoreOracle = requires(const S& s, int i, int j, int k) {
  { s.num_edus() } -> std::convertible_to<int>;
  { s.num_relations() } -> std::convertible_to<int>;
  { s.span(i, j) } -> std::convertible_to<double>;
  { s.rel(i, j, k) } -> std::convertible_to<std::span<const double>>;
  { s.nuc(i, j, k) } -> std::convertible_to<std::span<const double>>;
};

enum class Decoder { Exact, Partial, Complete };

inline std::string_view to_string(Decoder d) {
  switch (d) {
    case Decoder::Exact: return "exact";
    case Decoder::Partial: return "partial";
    case Decoder::Complete: return "complete";
  }
  return "?";
}

inline std::optional<Decoder> parse_decoder(std::string_view s) {
  if (s == "exact") return Decoder::Exact;
  if (s == "partial") return Decoder::Partial;
  if (s == "complete") return Decoder::Complete;
  return std::nullopt;
}

// Dense explicit score tables; unset entries are zero.
class TableScores {
 public:
  TableScores(int n, int num_relations) : n_(n), g_(num_relations) {
    if (n < 1 || num_relations < 2) throw std::invalid_argument("TableScores: need n >= 1 and at least one relation");
    const auto d = static_cast<std::size_t>(n + 1);
    span_.assign(d * d, 0.0);
    rel_.assign(d * d * d * static_cast<std::size_t>(g_), 0.0);
    nuc_.assign(d * d * d * kNumNuclearity, 0.0);
  }

  int num_edus() const { return n_; }
  int num_relations() const { return g_; }

  double span(int i, int j) const { return span_[cell(i, j)]; }
  std::span<const double> rel(int i, int j, int k) const {
    return {rel_.data() + triple(i, j, k) * static_cast<std::size_t>(g_), static_cast<std::size_t>(g_)};
  }
  std::span<const double> nuc(int i, int j, int k) const {
    return {nuc_.data() + triple(i, j, k) * kNumNuclearity, kNumNuclearity};
  }

  double& span_at(int i, int j) { return span_[cell(i, j)]; }
  double& rel_at(int i, int j, int k, int l) {
    check_index(l, g_);
    return rel_[triple(i, j, k) * static_cast<std::size_t>(g_) + static_cast<std::size_t>(l)];
  }
  double& nuc_at(int i, int j, int k, Nuclearity p) {
    return nuc_[triple(i, j, k) * kNumNuclearity + static_cast<std::size_t>(p)];
  }

 private:
  static void check_index(int v, int bound) {
    if (v < 0 || v >= bound) throw std::out_of_range("TableScores: index out of range");
  }
  std::size_t cell(int i, int j) const {
    check_index(i, n_ + 1);
    check_index(j, n_ + 1);
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(j);
  }
  std::size_t triple(int i, int j, int k) const {
    check_index(k, n_ + 1);
    return cell(i, j) * static_cast<std::size_t>(n_ + 1) + static_cast<std::size_t>(k);
  }

  int n_, g_;
  Vec span_, rel_, nuc_;
};

// Fixture text: `span i j value`, `rel i j k l value`, `nuc i j k p value`
// (p as NN/NS/SN/LEAF or 0..3). Blank lines and `#` comments are skipped.
inline TableScores parse_score_table(std::string_view text, int n, int num_relations) {
  struct FixtureError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
  };
  TableScores t(n, num_relations);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw FixtureError("score table line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    int i = 0, j = 0, k = 0;
    double v = 0.0;
    try {
      if (kind == "span") {
        if (!(ls >> i >> j >> v)) fail("expected `span i j value`");
        if (i < 0 || i >= j || j > n) fail("span out of range");
        t.span_at(i, j) = v;
      } else if (kind == "rel") {
        int l = 0;
        if (!(ls >> i >> j >> k >> l >> v)) fail("expected `rel i j k l value`");
        check_split(i, j, k);
        t.rel_at(i, j, k, l) = v;
      } else if (kind == "nuc") {
        std::string p;
        if (!(ls >> i >> j >> k >> p >> v)) fail("expected `nuc i j k p value`");
        check_split(i, j, k);
        auto named = parse_nuclearity(p);
        int idx = -1;
        if (named) idx = static_cast<int>(*named);
        else if (auto r = std::from_chars(p.data(), p.data() + p.size(), idx); r.ec != std::errc{}) idx = -1;
        if (idx < 0 || idx >= kNumNuclearity) fail("bad nuclearity " + p);
        t.nuc_at(i, j, k, static_cast<Nuclearity>(idx)) = v;
      } else {
        fail("unknown entry kind " + kind);
      }
    } catch (const FixtureError&) {
      throw;
    } catch (const std::logic_error& e) {
      fail(e.what());
    }
    std::string extra;
    if (ls >> extra) fail("trailing field " + extra);
  }
  return t;
}

struct ChartTables {
  int n = 0;
  Vec best_score;
  std::vector<int> best_split;  // -1 where undefined (leaves)
  std::vector<Relation> best_relation;
  std::vector<Nuclearity> best_nuclearity;
  bool augmented = false;

  explicit ChartTables(int edus = 0)
      : n(edus),
        best_score(cells(), -std::numeric_limits<double>::infinity()),
        best_split(cells(), -1),
        best_relation(cells()),
        best_nuclearity(cells(), Nuclearity::LEAF) {}

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n + 1) + static_cast<std::size_t>(j);
  }

 private:
  std::size_t cells() const { return static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(n + 1); }
};

struct DecodeResult {
  RstTree tree;
  double score = 0.0;
  ChartTables chart;
};

namespace detail {

struct LabelChoice {
  Relation relation;
  Nuclearity nuclearity;
  double score;
};

// Independent argmax over internal labels; lowest index wins ties.
inline LabelChoice best_labels(std::span<const double> rel, std::span<const double> nuc) {
  int l_best = 1;
  for (int l = 2; l < static_cast<int>(rel.size()); ++l)
    if (rel[static_cast<std::size_t>(l)] > rel[static_cast<std::size_t>(l_best)]) l_best = l;
  int p_best = 0;
  for (int p = 1; p < kNumInternalNuclearity; ++p)
    if (nuc[static_cast<std::size_t>(p)] > nuc[static_cast<std::size_t>(p_best)]) p_best = p;
  return {Relation{l_best}, static_cast<Nuclearity>(p_best),
          rel[static_cast<std::size_t>(l_best)] + nuc[static_cast<std::size_t>(p_best)]};
}

template <ScoreOracle S>
double leaf_score(const S& s, int i) {
  return s.rel(i, i + 1, i)[static_cast<std::size_t>(kLeafRelation.id)] +
         s.nuc(i, i + 1, i)[static_cast<std::size_t>(Nuclearity::LEAF)];
}

template <ScoreOracle S>
void check_decode_args(int n, const S& s) {
  if (n < 1) throw std::invalid_argument("decode: document must have at least one EDU");
  if (n > s.num_edus()) throw std::invalid_argument("decode: n exceeds the score oracle's EDU count");
  if (s.num_relations() < 2) throw std::invalid_argument("decode: need at least one non-leaf relation");
}

inline RstTree backtrack(const ChartTables& c) {
  std::vector<LabeledSpan> spans;
  std::map<Span, int> splits;
  std::vector<Span> todo{{0, c.n}};
  while (!todo.empty()) {
    Span s = todo.back();
    todo.pop_back();
    if (s.is_leaf()) {
      spans.push_back({s.i, s.j, kLeafRelation, Nuclearity::LEAF});
      continue;
    }
    const auto at = c.index(s.i, s.j);
    const int k = c.best_split[at];
    spans.push_back({s.i, s.j, c.best_relation[at], c.best_nuclearity[at]});
    splits[s] = k;
    todo.push_back({k, s.j});
    todo.push_back({s.i, k});
  }
  return RstTree(c.n, std::move(spans), std::move(splits));
}

template <ScoreOracle S>
ChartTables init_leaves(int n, const S& s) {
  ChartTables c(n);
  for (int i = 0; i < n; ++i) c.best_score[c.index(i, i + 1)] = leaf_score(s, i);
  return c;
}

}  // namespace detail

// Sum over non-root spans of span scores, plus relation and nuclearity scores
// of every node at its split (leaves at the (i, i+1, i) convention).
template <ScoreOracle S>
double score_tree(const RstTree& t, const S& s) {
  if (auto err = validate_tree(t)) throw std::invalid_argument("score_tree: " + *err);
  const int n = t.num_edus();
  double total = 0.0;
  for (const auto& sp : t.spans()) {
    if (!(sp.i == 0 && sp.j == n)) total += s.span(sp.i, sp.j);
    const int k = sp.is_leaf() ? sp.i : *t.split(sp.span());
    total += s.rel(sp.i, sp.j, k)[static_cast<std::size_t>(sp.relation.id)];
    total += s.nuc(sp.i, sp.j, k)[static_cast<std::size_t>(sp.nuclearity)];
  }
  return total;
}

// CKY maximizing jointly over (split, relation, nuclearity) in every cell.
// Label pairs are enumerated explicitly, so a cell costs O(n * G) with G the
// number of (relation, nuclearity) pairs.
template <ScoreOracle S>
DecodeResult decode_exact(int n, const S& s) {
  detail::check_decode_args(n, s);
  ChartTables c = detail::init_leaves(n, s);
  const int g = s.num_relations();
  for (int len = 2; len <= n; ++len)
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      const auto at = c.index(i, j);
      double best = -std::numeric_limits<double>::infinity();
      for (int k = i + 1; k < j; ++k) {
        const double base = s.span(i, k) + s.span(k, j) + c.best_score[c.index(i, k)] + c.best_score[c.index(k, j)];
        const auto rel = s.rel(i, j, k);
        const auto nuc = s.nuc(i, j, k);
        for (int l = 1; l < g; ++l) {
          const double with_rel = base + rel[static_cast<std::size_t>(l)];
          for (int p = 0; p < kNumInternalNuclearity; ++p) {
            const double v = with_rel + nuc[static_cast<std::size_t>(p)];
            if (v > best) {
              best = v;
              c.best_split[at] = k;
              c.best_relation[at] = Relation{l};
              c.best_nuclearity[at] = static_cast<Nuclearity>(p);
            }
          }
        }
      }
      c.best_score[at] = best;
    }
  RstTree tree = detail::backtrack(c);
  const double score = c.best_score[c.index(0, n)];
  return {std::move(tree), score, std::move(c)};
}

// Partial independence: the split is chosen from span and subtree scores
// alone, then the labels are chosen given that split.
template <ScoreOracle S>
DecodeResult decode_partial(int n, const S& s) {
  detail::check_decode_args(n, s);
  ChartTables c = detail::init_leaves(n, s);
  for (int len = 2; len <= n; ++len)
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      const auto at = c.index(i, j);
      double best = -std::numeric_limits<double>::infinity();
      int k_best = i + 1;
      for (int k = i + 1; k < j; ++k) {
        const double v = s.span(i, k) + s.span(k, j) + c.best_score[c.index(i, k)] + c.best_score[c.index(k, j)];
        if (v > best) {
          best = v;
          k_best = k;
        }
      }
      const auto labels = detail::best_labels(s.rel(i, j, k_best), s.nuc(i, j, k_best));
      c.best_split[at] = k_best;
      c.best_relation[at] = labels.relation;
      c.best_nuclearity[at] = labels.nuclearity;
      c.best_score[at] = best + labels.score;
    }
  RstTree tree = detail::backtrack(c);
  const double score = c.best_score[c.index(0, n)];
  return {std::move(tree), score, std::move(c)};
}

// Complete independence: structure from span scores only, labels assigned
// afterwards at the chosen splits. The returned score is the full tree score.
template <ScoreOracle S>
DecodeResult decode_complete(int n, const S& s) {
  detail::check_decode_args(n, s);
  ChartTables c(n);
  for (int i = 0; i < n; ++i) c.best_score[c.index(i, i + 1)] = 0.0;
  for (int len = 2; len <= n; ++len)
    for (int i = 0; i + len <= n; ++i) {
      const int j = i + len;
      const auto at = c.index(i, j);
      double best = -std::numeric_limits<double>::infinity();
      for (int k = i + 1; k < j; ++k) {
        const double v = s.span(i, k) + s.span(k, j) + c.best_score[c.index(i, k)] + c.best_score[c.index(k, j)];
        if (v > best) {
          best = v;
          c.best_split[at] = k;
        }
      }
      c.best_score[at] = best;
    }
  // Label only the cells on the chosen structure.
  std::vector<Span> todo{{0, n}};
  while (!todo.empty()) {
    Span sp = todo.back();
    todo.pop_back();
    if (sp.is_leaf()) continue;
    const auto at = c.index(sp.i, sp.j);
    const int k = c.best_split[at];
    const auto labels = detail::best_labels(s.rel(sp.i, sp.j, k), s.nuc(sp.i, sp.j, k));
    c.best_relation[at] = labels.relation;
    c.best_nuclearity[at] = labels.nuclearity;
    todo.push_back({sp.i, k});
    todo.push_back({k, sp.j});
  }
  RstTree tree = detail::backtrack(c);
  const double score = score_tree(tree, s);
  return {std::move(tree), score, std::move(c)};
}

template <ScoreOracle S>
DecodeResult decode(Decoder d, int n, const S& s) {
  switch (d) {
    case Decoder::Exact: return decode_exact(n, s);
    case Decoder::Partial: return decode_partial(n, s);
    case Decoder::Complete: return decode_complete(n, s);
  }
  throw std::invalid_argument("unknown decoder");
}

// Per-decision Hamming distance: a predicted span absent from the reference
// costs 1; a shared span costs 1 per mismatched label.
inline int hamming(const RstTree& predicted, const RstTree& reference) {
  if (predicted.num_edus() != reference.num_edus()) throw std::invalid_argument("hamming: EDU counts differ");
  int d = 0;
  for (const auto& s : predicted.spans()) {
    const auto* r = reference.find(s.span());
    if (r == nullptr) {
      ++d;
      continue;
    }
    d += (r->relation != s.relation) + (r->nuclearity != s.nuclearity);
  }
  return d;
}

// Scores shifted so that score_tree(T, augmented) = score_tree(T, base) + hamming(T, gold).
template <ScoreOracle S>
class AugmentedScores {
 public:
  AugmentedScores(const S& base, const RstTree& gold) : base_(&base), gold_(&gold) {
    if (gold.num_edus() != base.num_edus()) throw std::invalid_argument("augmented scores: EDU counts differ");
    rel_buf_.resize(static_cast<std::size_t>(base.num_relations()));
  }

  int num_edus() const { return base_->num_edus(); }
  int num_relations() const { return base_->num_relations(); }

  double span(int i, int j) const { return base_->span(i, j) + (gold_->contains({i, j}) ? 0.0 : 1.0); }

  std::span<const double> rel(int i, int j, int k) const {
    auto r = base_->rel(i, j, k);
    std::copy(r.begin(), r.end(), rel_buf_.begin());
    if (const auto* g = gold_->find({i, j}))
      for (std::size_t l = 0; l < rel_buf_.size(); ++l)
        if (static_cast<int>(l) != g->relation.id) rel_buf_[l] += 1.0;
    return rel_buf_;
  }

  std::span<const double> nuc(int i, int j, int k) const {
    auto u = base_->nuc(i, j, k);
    std::copy(u.begin(), u.end(), nuc_buf_.begin());
    if (const auto* g = gold_->find({i, j}))
      for (std::size_t p = 0; p < nuc_buf_.size(); ++p)
        if (static_cast<int>(p) != static_cast<int>(g->nuclearity)) nuc_buf_[p] += 1.0;
    return nuc_buf_;
  }

 private:
  const S* base_;
  const RstTree* gold_;
  mutable Vec rel_buf_;
  mutable std::array<double, kNumNuclearity> nuc_buf_{};
};

// Returns the argmax of score + hamming under the chosen decoder, with the
// augmented score as the scalar.
template <ScoreOracle S>
DecodeResult decode_loss_augmented(int n, const S& s, const RstTree& gold, Decoder d = Decoder::Partial) {
  if (gold.num_edus() != n) throw std::invalid_argument("loss-augmented decode: gold EDU count differs");
  if (auto err = validate_tree(gold)) throw std::invalid_argument("loss-augmented decode: gold tree invalid: " + *err);
  AugmentedScores<S> aug(s, gold);
  DecodeResult r = decode(d, n, aug);
  r.chart.augmented = true;
  return r;
}

// True when the plain decode scores strictly below the gold tree.
template <ScoreOracle S>
bool is_missing_prediction(const S& s, const RstTree& gold, Decoder d) {
  const DecodeResult r = decode(d, gold.num_edus(), s);
  return score_tree(r.tree, s) < score_tree(gold, s);
}

// --- neural chart loss -----------------------------------------------------

// Recorded S_tree(T) over the neural scorers.
inline Var tree_score(Tape& tape, Model& m, const TapedEncoding& enc, const RstTree& t, const DropoutMasks* masks) {
  const int n = t.num_edus();
  std::vector<Var> terms;
  for (const auto& sp : t.spans()) {
    if (!(sp.i == 0 && sp.j == n)) terms.push_back(span_score(tape, m, enc, sp.i, sp.j, masks));
    const int k = sp.is_leaf() ? sp.i : *t.split(sp.span());
    terms.push_back(tape.pick(rel_scores(tape, m, enc, sp.i, sp.j, k, masks), static_cast<std::size_t>(sp.relation.id)));
    terms.push_back(tape.pick(nuc_scores(tape, m, enc, sp.i, sp.j, k, masks), static_cast<std::size_t>(sp.nuclearity)));
  }
  return tape.sum(terms);
}

struct ChartLoss {
  Var loss;             // recorded scalar; constant zero when the hinge is inactive
  double value = 0.0;
  RstTree predicted;    // loss-augmented decode
  int hamming = 0;
  double predicted_score = 0.0;  // plain score of the predicted tree
  double gold_score = 0.0;
  bool missing_prediction = false;
};

// max(0, S(T̂) + Δ(T̂, T*) − S(T*)) with T̂ from loss-augmented decoding.
inline ChartLoss chart_loss(Tape& tape, Model& m, const TapedEncoding& enc, const RstTree& gold, Decoder d,
                            const DropoutMasks* masks = nullptr) {
  if (auto err = validate_tree(gold)) throw std::invalid_argument("chart_loss: invalid gold tree: " + *err);
  const NeuralScores scores(m, enc.values, masks);
  const int n = gold.num_edus();
  DecodeResult r = decode_loss_augmented(n, scores, gold, d);
  ChartLoss out;
  out.hamming = hamming(r.tree, gold);
  out.predicted_score = score_tree(r.tree, scores);
  out.gold_score = score_tree(gold, scores);
  out.missing_prediction = out.predicted_score < out.gold_score;
  out.predicted = std::move(r.tree);
  if (out.predicted_score + out.hamming - out.gold_score <= 0.0) {
    out.loss = tape.scalar_constant(0.0);
    return out;
  }
  Var margin = tape.add_constant(
      tape.sub(tree_score(tape, m, enc, out.predicted, masks), tree_score(tape, m, enc, gold, masks)),
      static_cast<double>(out.hamming));
  out.loss = tape.relu(margin);
  out.value = tape.scalar(out.loss);
  return out;
}

}  // namespace rstparse
