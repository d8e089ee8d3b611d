#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rstparse/autodiff.hpp"
#include "rstparse/core.hpp"
#include "rstparse/encoder.hpp"
#include "rstparse/vocab.hpp"

namespace rstparse {

// Shift-reduce configuration: a stack of adjacent subtrees and the next
// unread EDU. The spans built so far travel with the state.
class ParserState {
 public:
  explicit ParserState(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("ParserState: document must have at least one EDU");
  }

  int num_edus() const { return n_; }
  const std::vector<Span>& stack() const { return stack_; }
  int queue_front() const { return queue_front_; }  // 1-based; > n when exhausted
  int queue_size() const { return n_ - queue_front_ + 1; }
  bool queue_empty() const { return queue_front_ > n_; }

  bool is_terminal() const {
    return queue_empty() && stack_.size() == 1 && stack_.front() == Span{0, n_};
  }

  bool can_shift() const { return !queue_empty(); }
  bool can_reduce() const { return stack_.size() >= 2; }

  ParserState apply(const Action& a) const {
    ParserState next = *this;
    if (a.is_shift()) {
      if (!can_shift()) throw std::logic_error("SHIFT with an empty queue");
      const int q = queue_front_;
      next.stack_.push_back({q - 1, q});
      next.built_.push_back({q - 1, q, kLeafRelation, Nuclearity::LEAF});
      ++next.queue_front_;
    } else {
      if (!can_reduce()) throw std::logic_error("REDUCE with fewer than two stack items");
      if (a.relation == kLeafRelation || a.nuclearity == Nuclearity::LEAF)
        throw std::logic_error("REDUCE cannot carry the LEAF label");
      const Span right = next.stack_.back();
      next.stack_.pop_back();
      const Span left = next.stack_.back();
      next.stack_.pop_back();
      next.stack_.push_back({left.i, right.j});
      next.built_.push_back({left.i, right.j, a.relation, a.nuclearity});
      next.splits_[{left.i, right.j}] = left.j;
    }
    return next;
  }

  // Tree of a terminal state.
  RstTree tree() const {
    if (!is_terminal()) throw std::logic_error("tree(): state is not terminal");
    return RstTree(n_, built_, splits_);
  }

  bool operator==(const ParserState&) const = default;

 private:
  int n_;
  std::vector<Span> stack_;
  int queue_front_ = 1;
  std::vector<LabeledSpan> built_;
  std::map<Span, int> splits_;
};

struct LegalActions {
  bool shift = false;
  bool reduce = false;  // the whole REDUCE(l, p) family
};

inline LegalActions legal_actions(const ParserState& s) {
  if (s.is_terminal()) throw std::logic_error("legal_actions: terminal state");
  return {s.can_shift(), s.can_reduce()};
}

inline bool is_legal(const LegalActions& legal, const Action& a) { return a.is_shift() ? legal.shift : legal.reduce; }

inline ParserState apply_action(const ParserState& s, const Action& a) {
  if (!is_legal(legal_actions(s), a)) throw std::logic_error("illegal action");
  return s.apply(a);
}

// Static oracle: left-to-right post-order, reducing as soon as the top two
// stack items are siblings.
inline std::vector<Action> oracle_actions(const RstTree& t) {
  if (auto err = validate_tree(t)) throw std::invalid_argument("oracle_actions: " + *err);
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(2 * t.num_edus() - 1));
  // Iterative post-order over (span, children-visited) frames.
  std::vector<std::pair<Span, bool>> todo{{{0, t.num_edus()}, false}};
  while (!todo.empty()) {
    auto [s, expanded] = todo.back();
    todo.pop_back();
    if (s.is_leaf()) {
      out.push_back(Action::shift());
    } else if (expanded) {
      const auto* node = t.find(s);
      out.push_back(Action::reduce(node->relation, node->nuclearity));
    } else {
      const int k = *t.split(s);
      todo.push_back({s, true});
      todo.push_back({{k, s.j}, false});
      todo.push_back({{s.i, k}, false});
    }
  }
  return out;
}

struct DerivationStep {
  ParserState state;
  Action action;
};

using Derivation = std::vector<DerivationStep>;

inline Derivation derive(const RstTree& t) {
  Derivation out;
  ParserState s(t.num_edus());
  for (const Action& a : oracle_actions(t)) {
    out.push_back({s, a});
    s = apply_action(s, a);
  }
  return out;
}

inline RstTree replay(int n, const std::vector<Action>& actions) {
  ParserState s(n);
  for (const Action& a : actions) s = apply_action(s, a);
  if (!s.is_terminal()) throw std::invalid_argument("replay: action sequence does not reach a terminal state");
  return s.tree();
}

inline std::string format_action(const Action& a, const RelationVocab& rels) {
  if (a.is_shift()) return "SHIFT";
  return "REDUCE:" + rels.name(a.relation) + ":" + std::string(to_string(a.nuclearity));
}

inline std::string format_derivation(const std::vector<Action>& actions, const RelationVocab& rels) {
  std::string out;
  for (const Action& a : actions) {
    if (!out.empty()) out += ' ';
    out += format_action(a, rels);
  }
  return out;
}

// Parses `SHIFT` / `REDUCE:<relation>:<NN|NS|SN>` tokens. Unknown relations
// are added when `extend` is set, rejected otherwise.
inline std::vector<Action> parse_derivation(std::string_view text, RelationVocab& rels, bool extend = false) {
  std::vector<Action> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    if (tok == "SHIFT") {
      out.push_back(Action::shift());
      continue;
    }
    const auto first = tok.find(':');
    const auto last = tok.rfind(':');
    if (tok.rfind("REDUCE:", 0) != 0 || first == last)
      throw std::invalid_argument("bad action token: " + tok);
    const std::string rel = tok.substr(first + 1, last - first - 1);
    const auto nuc = parse_nuclearity(tok.substr(last + 1));
    if (!nuc || *nuc == Nuclearity::LEAF || rel.empty() || rel == RelationVocab::kLeafName)
      throw std::invalid_argument("bad action token: " + tok);
    auto r = rels.find(rel);
    if (!r) {
      if (!extend) throw std::invalid_argument("unknown relation in action: " + rel);
      r = rels.add(rel);
    }
    out.push_back(Action::reduce(*r, *nuc));
  }
  return out;
}

// h_sub0 ⊕ h_sub1 ⊕ h_sub2 ⊕ h_q0 ⊕ h_q1 ⊕ h_q2; sub0 is the stack top,
// q0 the queue front. Absent slots are zero.
inline Vec state_rep(const ParserState& s, const EncodedDocument& enc) {
  const std::size_t edu = enc.dim();
  Vec out;
  out.reserve(9 * edu);
  const auto& st = s.stack();
  for (std::size_t slot = 0; slot < 3; ++slot) {
    if (slot < st.size()) {
      const Span sp = st[st.size() - 1 - slot];
      Vec r = span_rep(enc, sp.i, sp.j);
      out.insert(out.end(), r.begin(), r.end());
    } else {
      out.insert(out.end(), 2 * edu, 0.0);
    }
  }
  for (int slot = 0; slot < 3; ++slot) {
    const int q = s.queue_front() + slot;
    if (q <= s.num_edus()) {
      const Vec& e = enc.edu_reps[static_cast<std::size_t>(q - 1)];
      out.insert(out.end(), e.begin(), e.end());
    } else {
      out.insert(out.end(), edu, 0.0);
    }
  }
  return out;
}

inline Var state_rep(Tape& tape, const ParserState& s, const TapedEncoding& enc) {
  const std::size_t edu = enc.values.dim();
  std::vector<Var> parts;
  const auto& st = s.stack();
  for (std::size_t slot = 0; slot < 3; ++slot) {
    if (slot < st.size()) {
      const Span sp = st[st.size() - 1 - slot];
      parts.push_back(span_rep(tape, enc, sp.i, sp.j));
    } else {
      parts.push_back(tape.zeros(2 * edu));
    }
  }
  for (int slot = 0; slot < 3; ++slot) {
    const int q = s.queue_front() + slot;
    parts.push_back(q <= s.num_edus() ? enc.edu_reps[static_cast<std::size_t>(q - 1)] : tape.zeros(edu));
  }
  return tape.concat(parts);
}

inline Vec score_actions(const ParserState& s, const EncodedDocument& enc, const Model& m,
                         const DropoutMasks* masks = nullptr) {
  const bool drop = detail::has_masks(masks);
  return feed_forward(m.params.action, state_rep(s, enc),
                      drop ? std::span<const double>(masks->action) : std::span<const double>{});
}

inline Var score_actions(Tape& tape, const ParserState& s, const TapedEncoding& enc, Model& m,
                         const DropoutMasks* masks = nullptr) {
  const bool drop = detail::has_masks(masks);
  return feed_forward(tape, m.params.action, state_rep(tape, s, enc),
                      drop ? std::span<const double>(masks->action) : std::span<const double>{});
}

// Highest-scoring legal action; lowest index on ties.
inline Action best_legal_action(const ParserState& s, std::span<const double> scores, int num_relations) {
  const LegalActions legal = legal_actions(s);
  int best = -1;
  for (int a = 0; a < static_cast<int>(scores.size()); ++a) {
    if (a == 0 ? !legal.shift : !legal.reduce) continue;
    if (best < 0 || scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(best)]) best = a;
  }
  return action_from_index(best, num_relations);
}

inline RstTree greedy_parse(const EncodedDocument& enc, const Model& m) {
  ParserState s(enc.num_edus());
  while (!s.is_terminal()) {
    const Vec scores = score_actions(s, enc, m);
    s = s.apply(best_legal_action(s, scores, m.dims.num_relations));
  }
  return s.tree();
}

inline RstTree greedy_parse(const Document& doc, const Model& m) { return greedy_parse(encode_document(m, doc), m); }

struct TransitionLoss {
  Var loss;
  double value = 0.0;
  int states = 0;
};

// (1/N) Σ_{gold (s, a*)} Σ_{legal a} max(0, 1 + S(s,a) − S(s,a*)), N = |A|,
// over states visited by the static oracle.
inline TransitionLoss transition_loss(Tape& tape, Model& m, const TapedEncoding& enc, const RstTree& gold,
                                      const DropoutMasks* masks = nullptr) {
  if (auto err = validate_tree(gold)) throw std::invalid_argument("transition_loss: invalid gold tree: " + *err);
  const int num = m.dims.action_count();
  std::vector<Var> terms;
  int states = 0;
  for (const auto& step : derive(gold)) {
    ++states;
    const LegalActions legal = legal_actions(step.state);
    Var scores = score_actions(tape, step.state, enc, m, masks);
    Var gold_score = tape.pick(scores, static_cast<std::size_t>(action_index(step.action)));
    for (int a = 0; a < num; ++a) {
      if (a == 0 ? !legal.shift : !legal.reduce) continue;
      Var margin = tape.add_constant(tape.sub(tape.pick(scores, static_cast<std::size_t>(a)), gold_score), 1.0);
      terms.push_back(tape.relu(margin));
    }
  }
  TransitionLoss out;
  out.loss = tape.scale(tape.sum(terms), 1.0 / num);
  out.value = tape.scalar(out.loss);
  out.states = states;
  return out;
}

}  // namespace rstparse
