#include <gtest/gtest.h>

#include "support.hpp"

using namespace rstparse;
using rstparse::testing::left_branching;
using rstparse::testing::right_branching;

TEST(Tree, SingleLeafIsValid) {
  const RstTree t = RstTree::single_leaf();
  EXPECT_EQ(t.num_edus(), 1);
  EXPECT_FALSE(validate_tree(t).has_value());
  EXPECT_EQ(t.spans().size(), 1u);
}

TEST(Tree, BranchingTreesAreValidWithTwoNMinusOneSpans) {
  for (int n = 1; n <= 8; ++n) {
    for (const RstTree& t : {left_branching(n), right_branching(n)}) {
      EXPECT_FALSE(validate_tree(t).has_value()) << n;
      EXPECT_EQ(static_cast<int>(t.spans().size()), span_count(n));
    }
  }
}

TEST(Tree, SpansAreInPreorder) {
  const RstTree t = right_branching(3);
  const std::vector<std::pair<int, int>> want{{0, 3}, {0, 1}, {1, 3}, {1, 2}, {2, 3}};
  ASSERT_EQ(t.spans().size(), want.size());
  for (std::size_t a = 0; a < want.size(); ++a) {
    EXPECT_EQ(t.spans()[a].i, want[a].first);
    EXPECT_EQ(t.spans()[a].j, want[a].second);
  }
}

TEST(Tree, ValidationRejectsMissingRoot) {
  RstTree t(2, {{0, 1, kLeafRelation, Nuclearity::LEAF}, {1, 2, kLeafRelation, Nuclearity::LEAF}}, {});
  ASSERT_TRUE(validate_tree(t).has_value());
  EXPECT_EQ(*validate_tree(t), "root absent");
}

TEST(Tree, ValidationRejectsLeafLabelOnInternalSpan) {
  RstTree t(2,
            {{0, 2, kLeafRelation, Nuclearity::NS},
             {0, 1, kLeafRelation, Nuclearity::LEAF},
             {1, 2, kLeafRelation, Nuclearity::LEAF}},
            {{{0, 2}, 1}});
  EXPECT_TRUE(validate_tree(t).has_value());
}

TEST(Tree, ValidationRejectsRealLabelOnLeaf) {
  RstTree t(1, {{0, 1, Relation{1}, Nuclearity::LEAF}}, {});
  EXPECT_TRUE(validate_tree(t).has_value());
}

TEST(Tree, ValidationRejectsCrossingSpans) {
  // (0,2) and (1,3) cannot coexist in a binary tree over 3 EDUs
  RstTree t(3,
            {{0, 3, Relation{1}, Nuclearity::NN},
             {0, 2, Relation{1}, Nuclearity::NN},
             {1, 3, Relation{1}, Nuclearity::NN},
             {0, 1, kLeafRelation, Nuclearity::LEAF},
             {1, 2, kLeafRelation, Nuclearity::LEAF},
             {2, 3, kLeafRelation, Nuclearity::LEAF}},
            {{{0, 3}, 1}, {{0, 2}, 1}, {{1, 3}, 2}});
  EXPECT_TRUE(validate_tree(t).has_value());
}

TEST(Tree, ValidationRejectsBadSplit) {
  RstTree good = right_branching(3);
  auto splits = good.splits();
  splits[{0, 3}] = 2;  // child (0,2) does not exist
  RstTree bad(3, good.spans(), splits);
  EXPECT_TRUE(validate_tree(bad).has_value());
}

TEST(Tree, TreeFromSpansRecoversSplits) {
  const RstTree t = right_branching(5);
  const RstTree back = tree_from_spans(5, t.spans());
  EXPECT_EQ(back, t);
}

TEST(Tree, FindAndSplit) {
  const RstTree t = left_branching(4, 2, Nuclearity::SN);
  ASSERT_NE(t.find({0, 3}), nullptr);
  EXPECT_EQ(t.find({0, 3})->relation, Relation{2});
  EXPECT_EQ(t.find({0, 3})->nuclearity, Nuclearity::SN);
  EXPECT_EQ(t.find({1, 3}), nullptr);
  EXPECT_EQ(t.split({0, 4}), 3);
  EXPECT_FALSE(t.split({0, 1}).has_value());
}

TEST(Counting, SpanCountAndCatalan) {
  EXPECT_EQ(span_count(1), 1);
  EXPECT_EQ(span_count(10), 19);
  EXPECT_THROW(span_count(0), std::invalid_argument);
  const std::uint64_t catalan[] = {1, 1, 2, 5, 14, 42, 132, 429};
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(tree_structures_count(n), catalan[n - 1]);
  for (int n = 1; n <= 7; ++n)
    EXPECT_EQ(rstparse::testing::all_structures(0, n).size(), tree_structures_count(n));
}

TEST(Actions, IndexRoundTrip) {
  const int g = 5;
  EXPECT_EQ(num_actions(g), 13);
  for (int a = 0; a < num_actions(g); ++a) EXPECT_EQ(action_index(action_from_index(a, g)), a);
  EXPECT_EQ(action_index(Action::shift()), 0);
  EXPECT_EQ(action_index(Action::reduce(Relation{1}, Nuclearity::NN)), 1);
  EXPECT_EQ(action_index(Action::reduce(Relation{2}, Nuclearity::SN)), 6);
  EXPECT_THROW(action_from_index(13, g), std::out_of_range);
  EXPECT_THROW(Action::reduce(kLeafRelation, Nuclearity::NS), std::invalid_argument);
  EXPECT_THROW(Action::reduce(Relation{1}, Nuclearity::LEAF), std::invalid_argument);
}

TEST(Labels, NuclearityNames) {
  for (Nuclearity p : {Nuclearity::NN, Nuclearity::NS, Nuclearity::SN, Nuclearity::LEAF})
    EXPECT_EQ(parse_nuclearity(to_string(p)), p);
  EXPECT_FALSE(parse_nuclearity("SS").has_value());
}

TEST(Vocab, UnknownFallback) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 1);
  EXPECT_EQ(v.add("x"), 1);
  EXPECT_EQ(v.add("x"), 1);
  EXPECT_EQ(v.index("y"), Vocabulary::kUnk);
  EXPECT_EQ(Vocabulary::from_tokens(v.tokens()).tokens(), v.tokens());
  EXPECT_THROW(Vocabulary::from_tokens({"x"}), std::invalid_argument);
}

TEST(Vocab, RelationsReserveLeaf) {
  RelationVocab r;
  EXPECT_EQ(r.size(), 1);
  EXPECT_EQ(r.add("Elaboration"), Relation{1});
  EXPECT_EQ(r.find("Elaboration"), Relation{1});
  EXPECT_EQ(r.find("LEAF"), kLeafRelation);
  EXPECT_THROW(r.add("LEAF"), std::invalid_argument);
  EXPECT_EQ(r.labels(), std::vector<std::string>{"Elaboration"});
}
