#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support.hpp"

using namespace rstparse;
using namespace rstparse::testing;

TEST(ScorePair, IdenticalTreesArePerfect) {
  const RstTree t = left_branching(3);
  const PairCounts c = score_pair(t, t);
  EXPECT_EQ(c[Metric::Span].matched, 5);
  EXPECT_EQ(c[Metric::Span].gold, 5);
  EXPECT_EQ(c[Metric::Nuclearity].matched, 2);
  EXPECT_EQ(c[Metric::Relation].gold, 2);
  for (Metric m : kMetrics) EXPECT_DOUBLE_EQ(c[m].f1(), 100.0);
}

TEST(ScorePair, BranchingPairHandCount) {
  const PairCounts c = score_pair(left_branching(3), right_branching(3));
  EXPECT_EQ(c[Metric::Span].matched, 4);
  EXPECT_EQ(c[Metric::Span].predicted, 5);
  EXPECT_EQ(c[Metric::Nuclearity].matched, 1);
  EXPECT_EQ(c[Metric::Relation].matched, 1);
  EXPECT_DOUBLE_EQ(c[Metric::Span].f1(), 80.0);
  EXPECT_DOUBLE_EQ(c[Metric::Relation].f1(), 50.0);
  const EvalReport r = aggregate({c});
  EXPECT_EQ(format_f1(r.micro_f1(Metric::Span)), "80.0");
  EXPECT_DOUBLE_EQ(r.micro_f1(Metric::Span), r.macro_f1(Metric::Span));
}

TEST(ScorePair, SingleEduIsVacuousForLabels) {
  const PairCounts c = score_pair(RstTree::single_leaf(), RstTree::single_leaf());
  EXPECT_EQ(c[Metric::Span].matched, 1);
  EXPECT_TRUE(c[Metric::Nuclearity].empty());
  EXPECT_TRUE(c[Metric::Relation].empty());
}

TEST(ScorePair, Properties) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 9;
    const RstTree a = random_tree(n, 4, rng), b = random_tree(n, 4, rng);
    const PairCounts ab = score_pair(a, b), ba = score_pair(b, a);
    EXPECT_EQ(ab[Metric::Span].matched, ba[Metric::Span].matched);
    EXPECT_LE(ab[Metric::Relation].matched, ab[Metric::Span].matched);
    EXPECT_LE(ab[Metric::Nuclearity].matched, ab[Metric::Span].matched);
    for (Metric m : kMetrics) {
      EXPECT_GE(ab[m].f1(), 0.0);
      EXPECT_LE(ab[m].f1(), 100.0);
    }
  }
  EXPECT_THROW(score_pair(left_branching(2), left_branching(3)), std::invalid_argument);
}

TEST(Aggregate, MicroAndMacroDiverge) {
  PairCounts big, small;
  big[Metric::Span] = {9, 9, 9};
  small[Metric::Span] = {0, 3, 3};
  const EvalReport r = aggregate({big, small});
  EXPECT_DOUBLE_EQ(r.micro_f1(Metric::Span), 75.0);
  EXPECT_DOUBLE_EQ(r.macro_f1(Metric::Span), 50.0);
  EXPECT_EQ(r.documents, 2);
}

TEST(Aggregate, EqualSizesAgree) {
  PairCounts good, bad;
  good[Metric::Span] = {3, 3, 3};
  bad[Metric::Span] = {0, 3, 3};
  const EvalReport r = aggregate({good, bad});
  EXPECT_DOUBLE_EQ(r.micro_f1(Metric::Span), 50.0);
  EXPECT_DOUBLE_EQ(r.macro_f1(Metric::Span), 50.0);
}

TEST(Aggregate, MacroSkipsVacuousDocuments) {
  const PairCounts one = score_pair(RstTree::single_leaf(), RstTree::single_leaf());
  const PairCounts three = score_pair(left_branching(3), right_branching(3));
  const EvalReport r = aggregate({one, three});
  EXPECT_DOUBLE_EQ(r.macro_f1(Metric::Relation), 50.0);
  EXPECT_DOUBLE_EQ(r.macro_f1(Metric::Span), (100.0 + 80.0) / 2);
  EXPECT_THROW(aggregate({}), std::invalid_argument);
}

TEST(Report, FormatsTables) {
  const PairCounts c = score_pair(left_branching(3), right_branching(3));
  std::ostringstream out;
  print_report(out, aggregate({c}));
  EXPECT_EQ(out.str(),
            "Average         Span  Nuclearity    Relation\n"
            "micro           80.0        50.0        50.0\n"
            "macro           80.0        50.0        50.0\n");
  std::ostringstream rows;
  print_rows(rows, {"d1"}, {c});
  EXPECT_EQ(rows.str(),
            "doc_id\tmetric\tmatched\ttotal\tf1\n"
            "d1\tSpan\t4\t5\t80.0\n"
            "d1\tNuclearity\t1\t2\t50.0\n"
            "d1\tRelation\t1\t2\t50.0\n");
}
