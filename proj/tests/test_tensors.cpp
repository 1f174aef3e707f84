#include <gtest/gtest.h>

#include <cstring>
#include <nlohmann/json.hpp>
#include <random>

#include "support.hpp"
#include "synprobe/error.hpp"
#include "synprobe/hashing.hpp"
#include "synprobe/tensors.hpp"

using namespace synprobe;
using namespace synprobe::testing;

namespace {

HiddenStateSet random_set(std::mt19937_64& rng, std::vector<int> rows, std::uint32_t dim, std::uint32_t layer = 3) {
  std::normal_distribution<float> normal(0.f, 1.f);
  HiddenStateSet s;
  s.model_id = "toy";
  s.parse_file = "train.conllu";
  s.layer = layer;
  s.dim = dim;
  for (int n : rows) {
    StateMatrix m(n, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    s.sentences.push_back(m);
  }
  return s;
}

void expect_equal_sets(const HiddenStateSet& a, const HiddenStateSet& b) {
  EXPECT_EQ(a.model_id, b.model_id);
  EXPECT_EQ(a.parse_file, b.parse_file);
  EXPECT_EQ(a.layer, b.layer);
  EXPECT_EQ(a.dim, b.dim);
  ASSERT_EQ(a.sentences.size(), b.sentences.size());
  for (std::size_t s = 0; s < a.sentences.size(); ++s) {
    ASSERT_EQ(a.sentences[s].rows(), b.sentences[s].rows());
    EXPECT_EQ(std::memcmp(a.sentences[s].data(), b.sentences[s].data(), sizeof(float) * a.sentences[s].size()), 0);
  }
}

}  // namespace

TEST(Hsb1, FileRoundTrip) {
  std::mt19937_64 rng(1);
  TempDir dir("hsb");
  const auto set = random_set(rng, {3, 4}, 5);
  write_hidden_states(dir.file("a.hsb"), set);
  const auto back = read_hidden_states(dir.file("a.hsb"));
  expect_equal_sets(set, back);
  EXPECT_EQ(serialize_hidden_states(back), read_file_bytes(dir.file("a.hsb")));
}

TEST(Hsb1, LayoutIsLittleEndianHeaderThenPayload) {
  HiddenStateSet s;
  s.model_id = "m";
  s.parse_file = "p";
  s.layer = 2;
  s.dim = 1;
  s.sentences.push_back(StateMatrix::Constant(1, 1, 1.5f));
  const auto bytes = serialize_hidden_states(s);
  // magic, version, len+"m", len+"p", layer, dim, count, rows[1], one float
  ASSERT_EQ(bytes.size(), 4u + 4 + 5 + 5 + 4 + 4 + 4 + 4 + 4);
  EXPECT_EQ(bytes.substr(0, 4), "HSB1");
  EXPECT_EQ(std::uint8_t(bytes[4]), 1);
  EXPECT_EQ(std::uint8_t(bytes[8]), 1);
  EXPECT_EQ(bytes[12], 'm');
  float tail;
  std::memcpy(&tail, bytes.data() + bytes.size() - 4, 4);
  EXPECT_EQ(tail, 1.5f);
}

TEST(Hsb1, PropertyRoundTripArbitraryPayloads) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> rows(rng() % 6);
    for (auto& r : rows) r = int(rng() % 7);
    const auto set = random_set(rng, rows, 1 + std::uint32_t(rng() % 9), std::uint32_t(rng() % 40));
    expect_equal_sets(set, deserialize_hidden_states(serialize_hidden_states(set)));
  }
}

TEST(Hsb1, TruncatedPayload) {
  std::mt19937_64 rng(3);
  const auto bytes = serialize_hidden_states(random_set(rng, {3, 4}, 2));
  // header says 7 rows; drop one row of payload so only 6 remain
  EXPECT_THROW(deserialize_hidden_states(std::string_view(bytes).substr(0, bytes.size() - 2 * sizeof(float))),
               TruncationError);
  EXPECT_THROW(deserialize_hidden_states(bytes + "x"), TruncationError);
  EXPECT_THROW(deserialize_hidden_states(std::string_view(bytes).substr(0, 10)), TruncationError);
}

TEST(Hsb1, BadMagicAndVersion) {
  std::mt19937_64 rng(4);
  auto bytes = serialize_hidden_states(random_set(rng, {1}, 2));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_hidden_states(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(deserialize_hidden_states(bad), FormatError);
}

TEST(Hsb1, ColumnMismatchOnWrite) {
  HiddenStateSet s;
  s.dim = 3;
  s.sentences.push_back(StateMatrix::Zero(2, 4));
  EXPECT_THROW(serialize_hidden_states(s), ShapeError);
}

TEST(Alignment, RowCountMismatchNamesSentence) {
  std::mt19937_64 rng(5);
  const std::vector<SentenceParse> parses{
      make_parse("a", {{"x", "X", 0, "root"}, {"y", "X", 1, "dep"}, {"z", "X", 1, "dep"}})};
  EXPECT_NO_THROW(check_alignment(random_set(rng, {3}, 2), parses));
  try {
    check_alignment(random_set(rng, {4}, 2), parses);
    FAIL();
  } catch (const AlignmentError& e) {
    EXPECT_EQ(e.sentence(), 0u);
  }
  EXPECT_THROW(check_alignment(random_set(rng, {3, 3}, 2), parses), AlignmentError);
}

TEST(Subtract, SelfIsZeroAndZeroIsNegation) {
  std::mt19937_64 rng(6);
  auto emb = random_set(rng, {2, 3}, 4, 0);
  const auto zero = subtract_embeddings(emb, emb);
  for (const auto& m : zero.sentences) EXPECT_TRUE((m.array() == 0.f).all());

  auto layer = emb;
  layer.layer = 5;
  for (auto& m : layer.sentences) m.setZero();
  const auto neg = subtract_embeddings(layer, emb);
  EXPECT_EQ(neg.layer, 5u);
  for (std::size_t s = 0; s < emb.sentences.size(); ++s) EXPECT_TRUE((neg.sentences[s].array() == -emb.sentences[s].array()).all());
}

TEST(Subtract, MatchesScalarLoopBitwise) {
  std::mt19937_64 rng(7);
  const auto emb = random_set(rng, {3, 1, 5}, 6, 0);
  const auto layer = random_set(rng, {3, 1, 5}, 6, 2);
  const auto diff = subtract_embeddings(layer, emb);
  for (std::size_t s = 0; s < emb.sentences.size(); ++s) {
    for (Eigen::Index r = 0; r < emb.sentences[s].rows(); ++r) {
      for (Eigen::Index c = 0; c < 6; ++c) {
        const float expected = layer.sentences[s](r, c) - emb.sentences[s](r, c);
        // (a - b) + b == a is not an IEEE identity, so the exactness check is
        // bitwise agreement with one rounded float subtraction per element
        ASSERT_EQ(diff.sentences[s](r, c), expected);
      }
    }
  }
}

TEST(Subtract, Mismatches) {
  std::mt19937_64 rng(8);
  const auto emb = random_set(rng, {2}, 3, 0);
  EXPECT_THROW(subtract_embeddings(random_set(rng, {2}, 4, 1), emb), AlignmentError);
  EXPECT_THROW(subtract_embeddings(random_set(rng, {3}, 3, 1), emb), AlignmentError);
  EXPECT_THROW(subtract_embeddings(random_set(rng, {2, 2}, 3, 1), emb), AlignmentError);
  EXPECT_THROW(subtract_embeddings(emb, random_set(rng, {2}, 3, 1)), AlignmentError);
}

TEST(Glove, LoadAndLookup) {
  TempDir dir("glove");
  write_text(dir.file("g.txt"), "the 0.1 0.2 0.3\nCat 1 2 3\n");
  const auto g = load_glove(dir.file("g.txt"));
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.dim(), 3u);
  ASSERT_TRUE(g.lookup("THE"));
  EXPECT_FLOAT_EQ((*g.lookup("the"))[2], 0.3f);
  ASSERT_TRUE(g.lookup("cat"));
  EXPECT_FALSE(g.lookup("dog").has_value());
}

TEST(Glove, FormatErrors) {
  try {
    parse_glove("a 1 2 3\nb 1 2 3 4\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_glove("a 1 x 3\n"), ParseError);
  EXPECT_THROW(parse_glove("lonely\n"), ParseError);
}

TEST(Glove, DuplicateKeepsFirst) {
  const auto g = parse_glove("a 1\nA 2\n");
  EXPECT_EQ(g.size(), 1u);
  EXPECT_FLOAT_EQ((*g.lookup("a"))[0], 1.f);
}

TEST(Manifest, LoadResolvesPathsAndVerifiesChecksums) {
  TempDir dir("manifest");
  std::mt19937_64 rng(9);
  write_text(dir.file("train.conllu"), "1\ta\t_\tX\tX\t_\t0\troot\t_\t_\n\n");
  write_hidden_states(dir.file("l0.hsb"), random_set(rng, {1}, 2, 0));
  write_hidden_states(dir.file("l1.hsb"), random_set(rng, {1}, 2, 1));
  nlohmann::json j = {{"model_id", "toy"},
                      {"architecture", "decoder"},
                      {"num_layers", 1},
                      {"dim", 2},
                      {"exports",
                       {{{"split", "train"}, {"parse_file", "train.conllu"}, {"layers", {{"0", "l0.hsb"}, {"1", "l1.hsb"}}}}}},
                      {"scores_file", "scores.csv"},
                      {"checksums", {{"l0.hsb", sha256_file(dir.file("l0.hsb"))}}}};
  write_text(dir.file("manifest.json"), j.dump());
  const auto m = load_manifest(dir.file("manifest.json"));
  EXPECT_EQ(m.model_id, "toy");
  EXPECT_EQ(m.scoring, "causal");
  EXPECT_EQ(m.pooling, "mean");
  EXPECT_EQ(m.split("train").layer_files.at(1), dir.file("l1.hsb"));
  EXPECT_EQ(m.scores_file, dir.file("scores.csv"));
  EXPECT_THROW(m.split("dev"), ValidationError);
  EXPECT_NO_THROW(verify_manifest_checksums(m));

  write_hidden_states(dir.file("l0.hsb"), random_set(rng, {1}, 2, 0));
  EXPECT_THROW(verify_manifest_checksums(m), FormatError);

  j["exports"][0]["layers"].erase("1");
  write_text(dir.file("manifest.json"), j.dump());
  EXPECT_THROW(load_manifest(dir.file("manifest.json")), FormatError);
  write_text(dir.file("manifest.json"), "{");
  EXPECT_THROW(load_manifest(dir.file("manifest.json")), FormatError);
}

TEST(Hashing, KnownDigestAndSeeds) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(seed_from_label("x"), seed_from_label("x"));
  EXPECT_NE(seed_from_label("x"), seed_from_label("y"));
  // first 8 bytes of sha256("abc"), big-endian
  EXPECT_EQ(seed_from_label("abc"), 0xba7816bf8f01cfeaULL);
}
