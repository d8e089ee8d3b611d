#pragma once

#include <array>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rstparse/core.hpp"

namespace rstparse {

enum class Metric { Span = 0, Nuclearity = 1, Relation = 2 };
inline constexpr std::array<Metric, 3> kMetrics{Metric::Span, Metric::Nuclearity, Metric::Relation};

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Span: return "Span";
    case Metric::Nuclearity: return "Nuclearity";
    case Metric::Relation: return "Relation";
  }
  return "?";
}

struct Counts {
  int matched = 0;
  int predicted = 0;
  int gold = 0;

  Counts& operator+=(const Counts& o) {
    matched += o.matched;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  bool empty() const { return predicted == 0 && gold == 0; }

  // F1 on a 0-100 scale; 0 when either side is empty.
  double f1() const {
    if (predicted == 0 || gold == 0) return 0.0;
    const double p = static_cast<double>(matched) / predicted;
    const double r = static_cast<double>(matched) / gold;
    return p + r == 0.0 ? 0.0 : 100.0 * 2.0 * p * r / (p + r);
  }
};

struct PairCounts {
  std::array<Counts, 3> by_metric;

  const Counts& operator[](Metric m) const { return by_metric[static_cast<std::size_t>(m)]; }
  Counts& operator[](Metric m) { return by_metric[static_cast<std::size_t>(m)]; }
};

// Span matches are on (i, j) over all spans; nuclearity and relation matches
// additionally require the label and skip leaves on both sides.
inline PairCounts score_pair(const RstTree& pred, const RstTree& gold) {
  if (pred.num_edus() != gold.num_edus()) throw std::invalid_argument("score_pair: EDU counts differ");
  PairCounts c;
  for (const auto& s : gold.spans()) {
    ++c[Metric::Span].gold;
    if (!s.is_leaf()) {
      ++c[Metric::Nuclearity].gold;
      ++c[Metric::Relation].gold;
    }
  }
  for (const auto& s : pred.spans()) {
    ++c[Metric::Span].predicted;
    if (!s.is_leaf()) {
      ++c[Metric::Nuclearity].predicted;
      ++c[Metric::Relation].predicted;
    }
    const auto* g = gold.find(s.span());
    if (g == nullptr) continue;
    ++c[Metric::Span].matched;
    if (s.is_leaf()) continue;
    if (g->nuclearity == s.nuclearity) ++c[Metric::Nuclearity].matched;
    if (g->relation == s.relation) ++c[Metric::Relation].matched;
  }
  return c;
}

struct EvalReport {
  std::array<double, 3> micro{};
  std::array<double, 3> macro{};
  PairCounts totals;
  int documents = 0;

  double micro_f1(Metric m) const { return micro[static_cast<std::size_t>(m)]; }
  double macro_f1(Metric m) const { return macro[static_cast<std::size_t>(m)]; }
};

// Micro: F1 of pooled counts. Macro: mean of per-document F1, skipping
// documents with nothing to count for that metric.
inline EvalReport aggregate(const std::vector<PairCounts>& docs) {
  if (docs.empty()) throw std::invalid_argument("aggregate: no documents");
  EvalReport r;
  r.documents = static_cast<int>(docs.size());
  for (Metric m : kMetrics) {
    const auto idx = static_cast<std::size_t>(m);
    double sum = 0.0;
    int counted = 0;
    for (const auto& d : docs) {
      r.totals[m] += d[m];
      if (d[m].empty()) continue;
      sum += d[m].f1();
      ++counted;
    }
    r.micro[idx] = r.totals[m].f1();
    r.macro[idx] = counted ? sum / counted : 0.0;
    // All-vacuous metrics (every document single-EDU) score as perfect.
    if (r.totals[m].empty()) r.micro[idx] = r.macro[idx] = 100.0;
  }
  return r;
}

inline std::string format_f1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

inline void print_report(std::ostream& out, const EvalReport& r) {
  out << std::left << std::setw(8) << "Average" << std::right;
  for (Metric m : kMetrics) out << std::setw(12) << metric_name(m);
  out << '\n';
  out << std::left << std::setw(8) << "micro" << std::right;
  for (Metric m : kMetrics) out << std::setw(12) << format_f1(r.micro_f1(m));
  out << '\n';
  out << std::left << std::setw(8) << "macro" << std::right;
  for (Metric m : kMetrics) out << std::setw(12) << format_f1(r.macro_f1(m));
  out << '\n';
}

// doc_id, metric, matched, total, f1 (tab separated).
inline void print_rows(std::ostream& out, const std::vector<std::string>& ids, const std::vector<PairCounts>& docs) {
  out << "doc_id\tmetric\tmatched\ttotal\tf1\n";
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (Metric m : kMetrics)
      out << ids[d] << '\t' << metric_name(m) << '\t' << docs[d][m].matched << '\t' << docs[d][m].gold << '\t'
          << format_f1(docs[d][m].f1()) << '\n';
}

}  // namespace rstparse
