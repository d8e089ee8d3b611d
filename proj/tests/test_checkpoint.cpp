#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"

using namespace rstparse;
namespace fs = std::filesystem;

TEST(Checkpoint, RoundTripIsBitExact) {
  Model m = rstparse::testing::tiny_model(4, 123, 5);
  m.params.word_emb.value[0] = 0.1 + 0.2;  // not representable in short decimal
  m.params.fwd.b.value[1] = -1e-300;
  const fs::path path = fs::temp_directory_path() / "rstparse_checkpoint_test.json";
  save_model(path, m);
  const Model back = load_model(path);
  EXPECT_EQ(back.dims, m.dims);
  EXPECT_EQ(back.words.tokens(), m.words.tokens());
  EXPECT_EQ(back.tags.tokens(), m.tags.tokens());
  EXPECT_EQ(back.relations, m.relations);
  std::vector<const Parameter*> a, b;
  m.params.for_each([&](const Parameter& p) { a.push_back(&p); });
  back.params.for_each([&](const Parameter& p) { b.push_back(&p); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t]->name, b[t]->name);
    EXPECT_EQ(a[t]->value, b[t]->value) << a[t]->name;
    EXPECT_EQ(a[t]->trainable, b[t]->trainable);
  }
  const Document d = rstparse::testing::tiny_document(4);
  EXPECT_EQ(parse_with(m, d, Parser::Exact).tree, parse_with(back, d, Parser::Exact).tree);
  fs::remove(path);
}

TEST(Checkpoint, PretrainedTableSurvives) {
  Vocabulary words, tags;
  words.add("a");
  tags.add("X");
  RelationVocab rels;
  rels.add("R");
  Model m = make_model(ModelDims{2, 2, 3, 2, 2, 2}, words, tags, rels, 1);
  m.params.pretrained.value = {0, 0, 0, 1.5, 2.5, -3.5};
  const Model back = model_from_json(to_json(m));
  EXPECT_EQ(back.params.pretrained.value, m.params.pretrained.value);
  EXPECT_FALSE(back.params.pretrained.trainable);
}

TEST(Checkpoint, MalformedInputsAreDataErrors) {
  const fs::path path = fs::temp_directory_path() / "rstparse_checkpoint_bad.json";
  write_file(path, "{not json");
  EXPECT_THROW(load_model(path), DataError);
  Model m = rstparse::testing::tiny_model();
  auto j = to_json(m);
  j["tensors"]["span_scorer.w1"]["rows"] = 99;
  write_file(path, j.dump());
  EXPECT_THROW(load_model(path), DataError);
  j = to_json(m);
  j["relations"].push_back("extra");
  write_file(path, j.dump());
  EXPECT_THROW(load_model(path), DataError);
  EXPECT_THROW(load_model(path.string() + ".absent"), DataError);
  fs::remove(path);
}

TEST(Checkpoint, NonFiniteParametersAreRefused) {
  Model m = rstparse::testing::tiny_model();
  m.params.nuc.b2.value[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(to_json(m), std::runtime_error);
}
