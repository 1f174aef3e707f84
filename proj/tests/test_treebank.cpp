#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "synprobe/error.hpp"
#include "synprobe/log.hpp"
#include "synprobe/treebank.hpp"

using namespace synprobe;
using namespace synprobe::testing;

namespace {

const char* kTwoWords =
    "# sent_id = s1\n"
    "# text = Dogs bark\n"
    "1\tDogs\tdog\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n"
    "2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t_\t_\n"
    "\n";

}  // namespace

TEST(Conllu, TwoTokenSentence) {
  const auto parses = parse_conllu(kTwoWords);
  ASSERT_EQ(parses.size(), 1u);
  const auto& p = parses[0];
  EXPECT_EQ(p.id(), "s1");
  EXPECT_EQ(p.text(), "Dogs bark");
  ASSERT_EQ(p.gold_edges().size(), 1u);
  EXPECT_EQ(p.gold_edges()[0], (UndirectedEdge{1, 2}));
  EXPECT_EQ(p.distance(1, 2), 1);
  EXPECT_EQ(p.root_count(), 1);
}

TEST(Conllu, PunctFromUpos) {
  const auto parses = parse_conllu(
      "1\tHi\t_\tINTJ\tUH\t_\t0\troot\t_\t_\n"
      "2\t!\t_\tPUNCT\t.\t_\t1\tpunct\t_\t_\n");
  ASSERT_EQ(parses.size(), 1u);
  EXPECT_FALSE(parses[0].token(1).is_punct);
  EXPECT_TRUE(parses[0].token(2).is_punct);
  EXPECT_EQ(parses[0].id(), "0");
}

TEST(Conllu, MultiwordRangeAndEmptyNodesSkipped) {
  // "du" = "de le"; 3-4 is the surface range, 4.1 an empty node
  const auto parses = parse_conllu(
      "# sent_id = mw\n"
      "1\tIl\til\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n"
      "2\tparle\tparler\tVERB\tVB\t_\t0\troot\t_\t_\n"
      "3-4\tdu\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "3\tde\tde\tADP\tIN\t_\t5\tcase\t_\t_\n"
      "4\tle\tle\tDET\tDT\t_\t5\tdet\t_\t_\n"
      "4.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "5\tfilm\tfilm\tNOUN\tNN\t_\t2\tobl\t_\t_\n"
      "\n");
  ASSERT_EQ(parses.size(), 1u);
  const auto& p = parses[0];
  ASSERT_EQ(p.size(), 5u);
  for (int i = 1; i <= 5; ++i) EXPECT_EQ(p.token(i).index, i);
  EXPECT_EQ(p.token(3).form, "de");
  EXPECT_EQ(p.token(4).form, "le");
}

TEST(Conllu, MetadataAndRoundTrip) {
  const std::string doc =
      "# sent_id = a\n"
      "# text = Dogs bark .\n"
      "# target_word = dogs\n"
      "1\tDogs\t_\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n"
      "2\tbark\t_\tVERB\tVBP\t_\t0\troot\t_\t_\n"
      "3\t.\t_\tPUNCT\t.\t_\t2\tpunct\t_\t_\n"
      "\n";
  const auto parses = parse_conllu(doc);
  ASSERT_EQ(parses.size(), 1u);
  EXPECT_EQ(parses[0].metadata().at("target_word"), "dogs");
  EXPECT_EQ(write_conllu(parses), doc);
}

TEST(Conllu, CrLfAndTrailingBlockWithoutBlankLine) {
  const auto parses = parse_conllu("1\tA\t_\tX\tX\t_\t0\troot\t_\t_\r\n\r\n1\tB\t_\tX\tX\t_\t0\troot\t_\t_");
  EXPECT_EQ(parses.size(), 2u);
}

TEST(Conllu, Errors) {
  EXPECT_THROW(parse_conllu("1\tA\t_\tX\n"), ParseError);
  EXPECT_THROW(parse_conllu("x\tA\t_\tX\tX\t_\t0\troot\t_\t_\n"), ParseError);
  EXPECT_THROW(parse_conllu("2\tA\t_\tX\tX\t_\t0\troot\t_\t_\n"), ParseError);
  try {
    parse_conllu("1\tA\t_\tX\tX\t_\t0\troot\t_\t_\n2\tB\t_\tX\tX\t_\tq\tdep\t_\t_\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  // cycle 1 -> 2 -> 1
  EXPECT_THROW(parse_conllu("1\tA\t_\tX\tX\t_\t2\tdep\t_\t_\n2\tB\t_\tX\tX\t_\t1\tdep\t_\t_\n"), StructureError);
  // head out of range, self head
  EXPECT_THROW(parse_conllu("1\tA\t_\tX\tX\t_\t5\tdep\t_\t_\n"), StructureError);
  EXPECT_THROW(parse_conllu("1\tA\t_\tX\tX\t_\t1\tdep\t_\t_\n"), StructureError);
}

TEST(Conllu, OverLongSentenceRejected) {
  std::vector<Row> rows;
  for (std::size_t i = 1; i <= kMaxSentenceLength + 1; ++i) rows.push_back({"w", "NN", i == 1 ? 0 : 1, "dep"});
  EXPECT_THROW(make_parse("long", rows), StructureError);
}

TEST(TreeDistance, Basics) {
  const auto p = relational_noun_parse();
  EXPECT_EQ(tree_distance(p, 2, 6), 1);
  for (int i = 1; i <= int(p.size()); ++i) EXPECT_EQ(tree_distance(p, i, i), 0);
  // The -> prints -> aggravate -> Nina
  EXPECT_EQ(tree_distance(p, 1, 7), 3);
}

TEST(TreeDistance, MatchesFloydWarshallOnRandomTrees) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + int(rng() % 12);
    const auto p = random_tree("t", n, rng);
    const auto fw = floyd_warshall(p);
    for (int i = 1; i <= n; ++i) {
      for (int j = 1; j <= n; ++j) ASSERT_EQ(p.distance(i, j), fw(i - 1, j - 1));
    }
    EXPECT_EQ(p.root_count(), 1);
    EXPECT_EQ(int(p.gold_edges().size()), n - p.root_count());
  }
}

TEST(TreeDistance, MultiRootedPassesThroughRoot) {
  set_warnings_enabled(false);
  const auto p = make_parse("two", {{"a", "X", 0, "root"}, {"b", "X", 0, "root"}});
  set_warnings_enabled(true);
  EXPECT_EQ(p.root_count(), 2);
  EXPECT_TRUE(p.gold_edges().empty());
  EXPECT_EQ(p.distance(1, 2), 2);
  EXPECT_EQ(floyd_warshall(p)(0, 1), 2);
}

TEST(SameXpos, Examples) {
  EXPECT_TRUE(same_xpos_pairs(make_parse("d", {{"a", "A", 0, "root"}, {"b", "B", 1, "dep"}})).empty());
  const auto three = make_parse("n", {{"a", "NN", 0, "root"}, {"b", "NN", 1, "dep"}, {"c", "NN", 1, "dep"}});
  EXPECT_EQ(same_xpos_pairs(three).size(), 3u);
  const auto mixed = make_parse("m", {{"dogs", "NNS", 2, "nsubj"},
                                      {"chased", "VBD", 0, "root"},
                                      {"cats", "NNS", 2, "obj"},
                                      {"and", "CC", 5, "cc"},
                                      {"barked", "VBD", 2, "conj"}});
  const auto pairs = same_xpos_pairs(mixed);
  // brute-force enumeration
  std::vector<std::pair<int, int>> expected;
  for (int i = 1; i <= 5; ++i) {
    for (int j = i + 1; j <= 5; ++j) {
      if (mixed.token(i).xpos == mixed.token(j).xpos) expected.emplace_back(i, j);
    }
  }
  EXPECT_EQ(pairs, expected);
  EXPECT_EQ(pairs.size(), 2u);
}
