#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "rstparse/rstparse.hpp"

namespace rstparse::testing {

inline RstTree right_branching(int n, int rel = 1, Nuclearity p = Nuclearity::NS) {
  std::vector<LabeledSpan> spans;
  std::map<Span, int> splits;
  for (int k = 0; k < n; ++k) spans.push_back({k, k + 1, kLeafRelation, Nuclearity::LEAF});
  for (int i = 0; i + 1 < n; ++i) {
    spans.push_back({i, n, Relation{rel}, p});
    splits[{i, n}] = i + 1;
  }
  return RstTree(n, spans, splits);
}

inline RstTree left_branching(int n, int rel = 1, Nuclearity p = Nuclearity::NS) {
  std::vector<LabeledSpan> spans;
  std::map<Span, int> splits;
  for (int k = 0; k < n; ++k) spans.push_back({k, k + 1, kLeafRelation, Nuclearity::LEAF});
  for (int j = 2; j <= n; ++j) {
    spans.push_back({0, j, Relation{rel}, p});
    splits[{0, j}] = j - 1;
  }
  return RstTree(n, spans, splits);
}

// Every unlabeled binary bracketing of (i, j), as lists of (span, split).
using Structure = std::vector<std::pair<Span, int>>;

inline std::vector<Structure> all_structures(int i, int j) {
  if (j == i + 1) return {Structure{}};
  std::vector<Structure> out;
  for (int k = i + 1; k < j; ++k)
    for (const auto& left : all_structures(i, k))
      for (const auto& right : all_structures(k, j)) {
        Structure s{{{i, j}, k}};
        s.insert(s.end(), left.begin(), left.end());
        s.insert(s.end(), right.begin(), right.end());
        out.push_back(std::move(s));
      }
  return out;
}

// Exhaustive maximum of the tree score over every structure and every
// labeling of its internal nodes, scored directly from the tables.
inline double brute_force_best(const TableScores& s) {
  const int n = s.num_edus();
  const int g = s.num_relations();
  double leaves = 0.0;
  for (int i = 0; i < n; ++i)
    leaves += s.rel(i, i + 1, i)[0] + s.nuc(i, i + 1, i)[static_cast<std::size_t>(Nuclearity::LEAF)];
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& st : all_structures(0, n)) {
    double spans = 0.0;
    std::vector<std::pair<Span, int>> nodes(st.begin(), st.end());
    for (const auto& [sp, k] : nodes) {
      // both children of every internal node, root excluded automatically
      spans += s.span(sp.i, k) + s.span(k, sp.j);
    }
    // enumerate all labelings as a mixed-radix counter
    const std::size_t m = nodes.size();
    const int radix = (g - 1) * 3;
    std::vector<int> digit(m, 0);
    while (true) {
      double labels = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        const auto [sp, k] = nodes[a];
        const int l = 1 + digit[a] / 3, p = digit[a] % 3;
        labels += s.rel(sp.i, sp.j, k)[static_cast<std::size_t>(l)] + s.nuc(sp.i, sp.j, k)[static_cast<std::size_t>(p)];
      }
      best = std::max(best, leaves + spans + labels);
      std::size_t a = 0;
      while (a < m && ++digit[a] == radix) digit[a++] = 0;
      if (a == m) break;
    }
  }
  return best;
}

// Maximum over every structure of its span total plus, at each internal
// node, the best (relation, nuclearity) pair chosen independently.
inline double brute_force_argmax_labels(const TableScores& s) {
  const int n = s.num_edus();
  double leaves = 0.0;
  for (int i = 0; i < n; ++i)
    leaves += s.rel(i, i + 1, i)[0] + s.nuc(i, i + 1, i)[static_cast<std::size_t>(Nuclearity::LEAF)];
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& st : all_structures(0, n)) {
    double total = leaves;
    for (const auto& [sp, k] : st) {
      total += s.span(sp.i, k) + s.span(k, sp.j);
      const auto rel = s.rel(sp.i, sp.j, k);
      const auto nuc = s.nuc(sp.i, sp.j, k);
      total += *std::max_element(rel.begin() + 1, rel.end()) + *std::max_element(nuc.begin(), nuc.begin() + 3);
    }
    best = std::max(best, total);
  }
  return best;
}

// Random tables with entries drawn from `value`.
template <class Draw>
TableScores random_table(int n, int g, std::mt19937_64& rng, Draw value) {
  TableScores t(n, g);
  for (int i = 0; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      t.span_at(i, j) = value(rng);
      for (int k = i; k < j; ++k) {
        if (k == i && j != i + 1) continue;
        for (int l = 0; l < g; ++l) t.rel_at(i, j, k, l) = value(rng);
        for (int p = 0; p < kNumNuclearity; ++p) t.nuc_at(i, j, k, static_cast<Nuclearity>(p)) = value(rng);
      }
    }
  return t;
}

inline TableScores random_table(int n, int g, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return random_table(n, g, rng, [&](std::mt19937_64& r) { return d(r); });
}

// Multiples of 1/1024 in [-8, 8]: sums of a few hundred stay exact in binary.
inline TableScores dyadic_table(int n, int g, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-8192, 8192);
  return random_table(n, g, rng, [&](std::mt19937_64& r) { return d(r) / 1024.0; });
}

// The three-EDU instance where span scores prefer left branching but a
// relation score only available under right branching dominates.
inline TableScores crafted_gap_instance() {
  TableScores t(3, 2);
  t.span_at(0, 2) = 1.0;
  t.rel_at(0, 3, 1, 1) = 10.0;
  return t;
}

inline Model tiny_model(int num_relations = 3, std::uint64_t seed = 7, std::size_t hidden = 3) {
  Vocabulary words, tags;
  for (const char* w : {"a", "b", "c", "d"}) words.add(w);
  for (const char* t : {"X", "Y"}) tags.add(t);
  RelationVocab rels;
  for (int r = 1; r < num_relations; ++r) rels.add("r" + std::to_string(r));
  ModelDims dims{3, 2, 0, hidden, 4, num_relations};
  return make_model(dims, words, tags, rels, seed);
}

inline Document tiny_document(int n, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  const char* words[] = {"a", "b", "c", "d", "zz"};
  const char* tags[] = {"X", "Y"};
  Document d;
  d.doc_id = "tiny";
  for (int e = 1; e <= n; ++e) {
    Edu edu;
    edu.index = e;
    const int len = 1 + static_cast<int>(rng() % 3);
    for (int t = 0; t < len; ++t) {
      edu.tokens.push_back(words[rng() % 5]);
      edu.pos_tags.push_back(tags[rng() % 2]);
    }
    d.edus.push_back(edu);
  }
  return d;
}

struct GradCheck {
  double max_rel_error = 0.0;  // worst tensor, norm-wise
  std::string worst;
  std::size_t checked = 0;
};

// Central finite differences on every trainable element against the analytic
// gradient `loss` leaves in Parameter::grad. Norm-wise relative error per tensor,
// with an absolute floor: tensors whose gradient cancels exactly only carry
// finite-difference roundoff (about 1e-10 per element), compared absolutely.
inline GradCheck check_gradients(Model& m, const std::function<double(bool)>& loss, double eps = 1e-5) {
  m.params.zero_grad();
  loss(true);
  GradCheck out;
  m.params.for_each([&](Parameter& p) {
    if (!p.trainable || p.size() == 0) return;
    double diff = 0.0, scale = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
      const double orig = p.value[a];
      p.value[a] = orig + eps;
      const double up = loss(false);
      p.value[a] = orig - eps;
      const double down = loss(false);
      p.value[a] = orig;
      const double numeric = (up - down) / (2 * eps);
      diff += (numeric - p.grad[a]) * (numeric - p.grad[a]);
      scale += numeric * numeric + p.grad[a] * p.grad[a];
      ++out.checked;
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(scale), 1e-4);
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = p.name;
    }
  });
  return out;
}

inline double grad_abs_sum(const Parameter& p) {
  double s = 0.0;
  for (double g : p.grad) s += std::abs(g);
  return s;
}

}  // namespace rstparse::testing
