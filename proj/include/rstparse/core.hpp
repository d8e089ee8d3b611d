#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rstparse {

// Index into a relation vocabulary. Id 0 is the reserved leaf relation.
struct Relation {
  int id = 0;

  constexpr Relation() = default;
  constexpr explicit Relation(int value) : id(value) {}
  constexpr auto operator<=>(const Relation&) const = default;
};

inline constexpr Relation kLeafRelation{0};

enum class Nuclearity : std::uint8_t { NN = 0, NS = 1, SN = 2, LEAF = 3 };

inline constexpr int kNumNuclearity = 4;
inline constexpr int kNumInternalNuclearity = 3;

inline std::string_view to_string(Nuclearity p) {
  switch (p) {
    case Nuclearity::NN: return "NN";
    case Nuclearity::NS: return "NS";
    case Nuclearity::SN: return "SN";
    case Nuclearity::LEAF: return "LEAF";
  }
  return "?";
}

inline std::optional<Nuclearity> parse_nuclearity(std::string_view s) {
  if (s == "NN") return Nuclearity::NN;
  if (s == "NS") return Nuclearity::NS;
  if (s == "SN") return Nuclearity::SN;
  if (s == "LEAF") return Nuclearity::LEAF;
  return std::nullopt;
}

struct Edu {
  std::vector<std::string> tokens;
  std::vector<std::string> pos_tags;
  int index = 0;  // 1-based position in the document
};

// Fencepost span: (i, j) covers EDUs i+1..j.
struct Span {
  int i = 0;
  int j = 0;

  constexpr bool is_leaf() const { return j == i + 1; }
  constexpr auto operator<=>(const Span&) const = default;
};

struct LabeledSpan {
  int i = 0;
  int j = 0;
  Relation relation;
  Nuclearity nuclearity = Nuclearity::LEAF;

  constexpr Span span() const { return {i, j}; }
  constexpr bool is_leaf() const { return j == i + 1; }
  bool operator==(const LabeledSpan&) const = default;
};

// Canonical pre-order: left edge ascending, wider spans first.
inline bool preorder_less(const LabeledSpan& a, const LabeledSpan& b) {
  if (a.i != b.i) return a.i < b.i;
  return a.j > b.j;
}

// A binary discourse tree stored as its set of labeled spans plus the split
// fencepost of every internal span.
class RstTree {
 public:
  RstTree() = default;
  RstTree(int n, std::vector<LabeledSpan> spans, std::map<Span, int> splits)
      : n_(n), spans_(std::move(spans)), splits_(std::move(splits)) {
    std::sort(spans_.begin(), spans_.end(), preorder_less);
  }

  static RstTree single_leaf() {
    return RstTree(1, {{0, 1, kLeafRelation, Nuclearity::LEAF}}, {});
  }

  int num_edus() const { return n_; }
  const std::vector<LabeledSpan>& spans() const { return spans_; }
  const std::map<Span, int>& splits() const { return splits_; }

  const LabeledSpan* find(Span s) const {
    LabeledSpan key{s.i, s.j, kLeafRelation, Nuclearity::LEAF};
    auto it = std::lower_bound(spans_.begin(), spans_.end(), key, preorder_less);
    if (it != spans_.end() && it->i == s.i && it->j == s.j) return &*it;
    return nullptr;
  }
  bool contains(Span s) const { return find(s) != nullptr; }

  std::optional<int> split(Span s) const {
    auto it = splits_.find(s);
    if (it == splits_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const RstTree&) const = default;

 private:
  int n_ = 0;
  std::vector<LabeledSpan> spans_;
  std::map<Span, int> splits_;
};

struct Document {
  std::string doc_id;
  std::vector<Edu> edus;
  std::optional<RstTree> gold;

  int num_edus() const { return static_cast<int>(edus.size()); }
};

enum class ActionKind : std::uint8_t { Shift, Reduce };

struct Action {
  ActionKind kind = ActionKind::Shift;
  Relation relation;
  Nuclearity nuclearity = Nuclearity::LEAF;

  static Action shift() { return {}; }
  static Action reduce(Relation l, Nuclearity p) {
    if (l == kLeafRelation || p == Nuclearity::LEAF)
      throw std::invalid_argument("REDUCE cannot carry the LEAF label");
    return {ActionKind::Reduce, l, p};
  }
  bool is_shift() const { return kind == ActionKind::Shift; }
  bool operator==(const Action&) const = default;
};

// Number of scorable actions: SHIFT plus REDUCE over every (non-leaf
// relation, internal nuclearity) pair.
inline int num_actions(int num_relations) {
  return 1 + kNumInternalNuclearity * (num_relations - 1);
}

inline int action_index(const Action& a) {
  if (a.is_shift()) return 0;
  return 1 + (a.relation.id - 1) * kNumInternalNuclearity +
         static_cast<int>(a.nuclearity);
}

inline Action action_from_index(int index, int num_relations) {
  if (index < 0 || index >= num_actions(num_relations))
    throw std::out_of_range("action index out of range");
  if (index == 0) return Action::shift();
  const int r = index - 1;
  return Action::reduce(Relation{1 + r / kNumInternalNuclearity},
                        static_cast<Nuclearity>(r % kNumInternalNuclearity));
}

// Returns nullopt when every structural invariant holds, otherwise a
// description of the first violated one.
inline std::optional<std::string> validate_tree(const RstTree& t) {
  const int n = t.num_edus();
  if (n < 1) return "tree has no EDUs";
  const auto& spans = t.spans();
  for (const auto& s : spans) {
    if (s.i < 0 || s.i >= s.j || s.j > n)
      return "span (" + std::to_string(s.i) + "," + std::to_string(s.j) + ") out of range";
    const bool leaf_rel = s.relation == kLeafRelation;
    const bool leaf_nuc = s.nuclearity == Nuclearity::LEAF;
    if (s.is_leaf() != leaf_rel || s.is_leaf() != leaf_nuc)
      return "span (" + std::to_string(s.i) + "," + std::to_string(s.j) +
             ") has labels inconsistent with its leaf status";
    if (s.relation.id < 0) return "negative relation id";
  }
  for (std::size_t a = 1; a < spans.size(); ++a)
    if (spans[a - 1].span() == spans[a].span())
      return "duplicate span (" + std::to_string(spans[a].i) + "," + std::to_string(spans[a].j) + ")";
  if (!t.contains({0, n})) return "root absent";
  for (int k = 1; k <= n; ++k)
    if (!t.contains({k - 1, k})) return "leaf (" + std::to_string(k - 1) + "," + std::to_string(k) + ") absent";
  if (static_cast<int>(spans.size()) != 2 * n - 1)
    return "expected " + std::to_string(2 * n - 1) + " spans, found " + std::to_string(spans.size());
  for (const auto& s : spans) {
    if (s.is_leaf()) continue;
    const auto k = t.split(s.span());
    const std::string name = "(" + std::to_string(s.i) + "," + std::to_string(s.j) + ")";
    if (!k) return "internal span " + name + " has no split";
    if (*k <= s.i || *k >= s.j) return "split of " + name + " outside the span";
    if (!t.contains({s.i, *k}) || !t.contains({*k, s.j}))
      return "child of " + name + " absent";
  }
  for (const auto& [span, k] : t.splits()) {
    const auto* s = t.find(span);
    if (s == nullptr || s->is_leaf()) return "split recorded for a non-internal span";
  }
  return std::nullopt;
}

// Builds a tree from its span set, deriving each internal span's split from
// the widest proper left child present. Structure is not validated here.
inline RstTree tree_from_spans(int n, std::vector<LabeledSpan> spans) {
  std::sort(spans.begin(), spans.end(), preorder_less);
  std::map<Span, int> splits;
  for (std::size_t a = 0; a < spans.size(); ++a) {
    const auto& s = spans[a];
    if (s.is_leaf()) continue;
    for (std::size_t b = a + 1; b < spans.size() && spans[b].i == s.i; ++b) {
      if (spans[b].j < s.j) {
        splits[s.span()] = spans[b].j;
        break;
      }
    }
  }
  return RstTree(n, std::move(spans), std::move(splits));
}

inline int span_count(int n) {
  if (n < 1) throw std::invalid_argument("span_count: n must be >= 1");
  return 2 * n - 1;
}

// Catalan(n-1): number of binary bracketings over n leaves.
inline std::uint64_t tree_structures_count(int n) {
  if (n < 1 || n > 16) throw std::out_of_range("tree_structures_count: n must be in [1, 16]");
  std::vector<std::uint64_t> c(n, 0);
  c[0] = 1;
  for (int m = 1; m < n; ++m)
    for (int a = 0; a < m; ++a) c[m] += c[a] * c[m - 1 - a];
  return c[n - 1];
}

}  // namespace rstparse
