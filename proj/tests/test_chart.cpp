#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace rstparse;
using namespace rstparse::testing;

namespace {

// Every labeled tree over n EDUs with internal labels from [1, g) x {NN, NS, SN}.
std::vector<RstTree> all_labeled_trees(int n, int g) {
  std::vector<RstTree> out;
  for (const auto& st : all_structures(0, n)) {
    const std::size_t m = st.size();
    const int radix = (g - 1) * 3;
    std::vector<int> digit(m, 0);
    while (true) {
      std::vector<LabeledSpan> spans;
      std::map<Span, int> splits;
      for (int k = 0; k < n; ++k) spans.push_back({k, k + 1, kLeafRelation, Nuclearity::LEAF});
      for (std::size_t a = 0; a < m; ++a) {
        spans.push_back({st[a].first.i, st[a].first.j, Relation{1 + digit[a] / 3}, static_cast<Nuclearity>(digit[a] % 3)});
        splits[st[a].first] = st[a].second;
      }
      out.emplace_back(n, spans, splits);
      std::size_t a = 0;
      while (a < m && ++digit[a] == radix) digit[a++] = 0;
      if (a == m) break;
    }
  }
  return out;
}

RstTree random_labeled_tree(int n, int g, std::mt19937_64& rng) { return random_tree(n, g, rng); }

}  // namespace

TEST(ScoreTree, SingleLeafIsTheLeafLabelScore) {
  TableScores t(1, 3);
  t.rel_at(0, 1, 0, 0) = 0.25;
  t.nuc_at(0, 1, 0, Nuclearity::LEAF) = 0.5;
  t.rel_at(0, 1, 0, 2) = 9.0;  // not a leaf label
  EXPECT_DOUBLE_EQ(score_tree(RstTree::single_leaf(), t), 0.75);
  const DecodeResult r = decode_exact(1, t);
  EXPECT_EQ(r.tree, RstTree::single_leaf());
  EXPECT_DOUBLE_EQ(r.score, 0.75);
}

TEST(ScoreTree, AllZeroOracleScoresZero) {
  TableScores t(5, 4);
  EXPECT_EQ(score_tree(left_branching(5), t), 0.0);
  EXPECT_EQ(score_tree(right_branching(5, 3, Nuclearity::SN), t), 0.0);
}

TEST(ScoreTree, HandComputedTwoEduTree) {
  TableScores t(2, 3);
  t.span_at(0, 1) = 1.0;
  t.span_at(1, 2) = 2.0;
  t.span_at(0, 2) = 100.0;  // root span is never scored
  t.rel_at(0, 2, 1, 2) = 0.5;
  t.nuc_at(0, 2, 1, Nuclearity::SN) = 0.25;
  t.rel_at(1, 2, 1, 0) = -1.0;
  const RstTree tree = right_branching(2, 2, Nuclearity::SN);
  EXPECT_DOUBLE_EQ(score_tree(tree, t), 1.0 + 2.0 + 0.5 + 0.25 - 1.0);
}

TEST(DecodeExact, MatchesBruteForceOverStructuresAndLabels) {
  for (int n = 1; n <= 6; ++n)
    for (unsigned seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(1000 * n + seed);
      const TableScores t = random_table(n, 3, rng);
      const DecodeResult r = decode_exact(n, t);
      EXPECT_FALSE(validate_tree(r.tree).has_value());
      EXPECT_NEAR(r.score, brute_force_best(t), 1e-9) << "n=" << n << " seed=" << seed;
      EXPECT_NEAR(score_tree(r.tree, t), r.score, 1e-9);
      EXPECT_NEAR(r.chart.best_score[r.chart.index(0, n)], r.score, 0.0);
    }
}

TEST(DecodeExact, TwoEdusUseArgmaxLabels) {
  std::mt19937_64 rng(3);
  const TableScores t = random_table(2, 5, rng);
  const DecodeResult r = decode_exact(2, t);
  const auto* root = r.tree.find({0, 2});
  ASSERT_NE(root, nullptr);
  int best_l = 1;
  for (int l = 2; l < 5; ++l)
    if (t.rel(0, 2, 1)[l] > t.rel(0, 2, 1)[best_l]) best_l = l;
  int best_p = 0;
  for (int p = 1; p < 3; ++p)
    if (t.nuc(0, 2, 1)[p] > t.nuc(0, 2, 1)[best_p]) best_p = p;
  EXPECT_EQ(root->relation, Relation{best_l});
  EXPECT_EQ(root->nuclearity, static_cast<Nuclearity>(best_p));
}

TEST(DecodeExact, TiesBreakTowardsLowestSplitAndLabel) {
  const TableScores t(4, 3);
  const DecodeResult r = decode_exact(4, t);
  EXPECT_EQ(r.tree, right_branching(4, 1, Nuclearity::NN));
  EXPECT_EQ(decode_partial(4, t).tree, r.tree);
  EXPECT_EQ(decode_complete(4, t).tree, r.tree);
}

TEST(DecodePartial, ScoreIsTheTreeScoreAndBoundedByExact) {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 3 + seed % 6;
    const TableScores t = random_table(n, 4, rng);
    const double exact = decode_exact(n, t).score;
    const DecodeResult p = decode_partial(n, t);
    EXPECT_NEAR(score_tree(p.tree, t), p.score, 1e-9);
    EXPECT_LE(p.score, exact + 1e-9);
    const DecodeResult c = decode_complete(n, t);
    EXPECT_NEAR(score_tree(c.tree, t), c.score, 1e-12);
    EXPECT_LE(c.score, exact + 1e-9);
  }
}

TEST(DecodePartial, SmallDocumentsMatchExact) {
  for (int n = 1; n <= 2; ++n)
    for (unsigned seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed);
      const TableScores t = random_table(n, 4, rng);
      EXPECT_EQ(decode_partial(n, t).tree, decode_exact(n, t).tree);
      EXPECT_EQ(decode_complete(n, t).tree.splits(), decode_exact(n, t).tree.splits());
    }
}

TEST(DecodePartial, CraftedInstanceShowsAStrictGap) {
  const TableScores t = crafted_gap_instance();
  const DecodeResult exact = decode_exact(3, t);
  const DecodeResult partial = decode_partial(3, t);
  EXPECT_EQ(exact.tree.split({0, 3}), 1);
  EXPECT_EQ(partial.tree.split({0, 3}), 2);
  EXPECT_DOUBLE_EQ(exact.score, 10.0);
  EXPECT_DOUBLE_EQ(partial.score, 1.0);
}

TEST(DecodeComplete, StructureMaximizesTheSpanOnlyTotal) {
  for (int n = 2; n <= 6; ++n)
    for (unsigned seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(77 + seed * 13 + n);
      const TableScores t = random_table(n, 3, rng);
      const RstTree c = decode_complete(n, t).tree;
      auto span_total = [&](const std::vector<std::pair<Span, int>>& st) {
        double s = 0.0;
        for (const auto& [sp, k] : st) s += t.span(sp.i, k) + t.span(k, sp.j);
        return s;
      };
      std::vector<std::pair<Span, int>> chosen(c.splits().begin(), c.splits().end());
      const double mine = span_total(chosen);
      for (const auto& st : all_structures(0, n)) EXPECT_GE(mine, span_total(st) - 1e-12);
    }
}

TEST(Hamming, HandCounts) {
  const RstTree a = left_branching(3), b = right_branching(3);
  EXPECT_EQ(hamming(a, a), 0);
  EXPECT_EQ(hamming(a, b), 1);
  EXPECT_EQ(hamming(b, a), 1);
  EXPECT_EQ(hamming(left_branching(3, 2, Nuclearity::SN), b), 1 + 2);  // absent span, root relation and nuclearity
  auto spans = a.spans();
  for (auto& s : spans)
    if (s.i == 0 && s.j == 2) s.relation = Relation{2};
  EXPECT_EQ(hamming(RstTree(3, spans, a.splits()), a), 1);
  EXPECT_THROW(hamming(a, left_branching(4)), std::invalid_argument);
}

TEST(Augmentation, AddsExactlyTheHammingDistance) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 8;
    const TableScores t = dyadic_table(n, 4, rng);
    const RstTree gold = random_labeled_tree(n, 4, rng);
    const RstTree tree = random_labeled_tree(n, 4, rng);
    const AugmentedScores<TableScores> aug(t, gold);
    EXPECT_EQ(score_tree(tree, aug) - score_tree(tree, t), static_cast<double>(hamming(tree, gold)));
  }
}

TEST(Augmentation, DecodeMaximizesScorePlusHamming) {
  for (int n = 2; n <= 4; ++n)
    for (unsigned seed = 0; seed < 4; ++seed) {
      std::mt19937_64 rng(500 + seed + 10 * n);
      const TableScores t = random_table(n, 3, rng);
      const RstTree gold = random_labeled_tree(n, 3, rng);
      const DecodeResult r = decode_loss_augmented(n, t, gold, Decoder::Exact);
      EXPECT_TRUE(r.chart.augmented);
      double best = -1e300;
      for (const auto& cand : all_labeled_trees(n, 3)) best = std::max(best, score_tree(cand, t) + hamming(cand, gold));
      EXPECT_NEAR(r.score, best, 1e-9);
      EXPECT_NEAR(score_tree(r.tree, t) + hamming(r.tree, gold), best, 1e-9);
    }
}

TEST(Augmentation, AugmentedBestIsAtLeastTheGoldScore) {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 4000);
    const int n = 1 + seed % 6;
    const TableScores t = random_table(n, 4, rng);
    const RstTree gold = random_labeled_tree(n, 4, rng);
    for (Decoder d : {Decoder::Exact, Decoder::Partial}) {
      const DecodeResult r = decode_loss_augmented(n, t, gold, d);
      if (d == Decoder::Exact) EXPECT_GE(r.score, score_tree(gold, t) - 1e-9);
      EXPECT_NEAR(r.score, score_tree(r.tree, t) + hamming(r.tree, gold), 1e-9);
    }
  }
}

TEST(Augmentation, ZeroOracleReturnsTheHammingDistance) {
  const TableScores t(4, 3);
  const RstTree gold = left_branching(4, 2, Nuclearity::SN);
  const DecodeResult r = decode_loss_augmented(4, t, gold, Decoder::Exact);
  EXPECT_DOUBLE_EQ(r.score, hamming(r.tree, gold));
  EXPECT_GT(r.score, 0.0);
}

TEST(Augmentation, GoldWinsWhenItsLabelsDominate) {
  TableScores t(2, 3);
  t.rel_at(0, 2, 1, 2) = 100.0;
  t.nuc_at(0, 2, 1, Nuclearity::SN) = 100.0;
  const RstTree gold = right_branching(2, 2, Nuclearity::SN);
  const DecodeResult r = decode_loss_augmented(2, t, gold);
  EXPECT_EQ(r.tree, gold);
  EXPECT_DOUBLE_EQ(r.score, score_tree(gold, t));
}

TEST(MissingPrediction, ExactNeverMissesCompleteCanMiss) {
  const TableScores t = crafted_gap_instance();
  const RstTree gold = right_branching(3, 1, Nuclearity::NN);
  EXPECT_FALSE(is_missing_prediction(t, gold, Decoder::Exact));
  EXPECT_TRUE(is_missing_prediction(t, gold, Decoder::Complete));
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 1 + seed % 7;
    const TableScores r = random_table(n, 3, rng);
    EXPECT_FALSE(is_missing_prediction(r, random_labeled_tree(n, 3, rng), Decoder::Exact));
  }
}

TEST(ScoreTable, ParsesFixtureText) {
  const TableScores t = parse_score_table(
      "# crafted\n"
      "span 0 2 1.0\n"
      "\n"
      "rel 0 3 1 1 10\n"
      "nuc 0 3 2 NS -0.5\n"
      "nuc 1 2 1 3 0.25\n",
      3, 2);
  EXPECT_EQ(t.span(0, 2), 1.0);
  EXPECT_EQ(t.rel(0, 3, 1)[1], 10.0);
  EXPECT_EQ(t.nuc(0, 3, 2)[1], -0.5);
  EXPECT_EQ(t.nuc(1, 2, 1)[3], 0.25);
  EXPECT_DOUBLE_EQ(decode_exact(3, t).score, 10.0 + 0.25);
}

TEST(ScoreTable, ErrorsNameTheLine) {
  try {
    parse_score_table("span 0 1 1\nspan 0 9 1\n", 3, 2);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_score_table("bogus 1 2\n", 3, 2), std::exception);
  EXPECT_THROW(parse_score_table("rel 0 3 0 1 1\n", 3, 2), std::exception);
  EXPECT_THROW(parse_score_table("span 0 1\n", 3, 2), std::exception);
}

TEST(DecodeArgs, Rejected) {
  const TableScores t(3, 2);
  EXPECT_THROW(decode_exact(0, t), std::invalid_argument);
  EXPECT_THROW(decode_partial(4, t), std::invalid_argument);
  EXPECT_EQ(parse_decoder("complete"), Decoder::Complete);
  EXPECT_FALSE(parse_decoder("greedy").has_value());
}
