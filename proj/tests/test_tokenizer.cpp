#include <gtest/gtest.h>

#include <filesystem>

#include "afg/errors.hpp"
#include "afg/tokenizer.hpp"

namespace afg {
namespace {

TEST(SplitTokens, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(split_tokens("Hello, World!"), (std::vector<std::string>{"hello", ",", "world", "!"}));
  EXPECT_EQ(split_tokens("  a\tb\n"), (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(split_tokens("").empty());
}

TEST(SplitTokens, KeepsNonAsciiBytesInWords) {
  EXPECT_EQ(split_tokens("Caf\xc3\xa9 ok"), (std::vector<std::string>{"caf\xc3\xa9", "ok"}));
}

TEST(Vocab, SpecialsComeFirst) {
  const Vocab v;
  ASSERT_EQ(v.size(), kNumSpecials);
  EXPECT_EQ(v.token(kPadId), "<pad>");
  EXPECT_EQ(v.token(kBosId), "<bos>");
  EXPECT_EQ(v.token(kEosId), "<eos>");
  EXPECT_EQ(v.token(kUnkId), "<unk>");
}

TEST(BuildVocab, FrequencyThenLexicographic) {
  const Vocab v = build_vocab({"a a b"}, 1, 100);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a", "b"}));
  const Vocab ties = build_vocab({"c b a b c"}, 1, 100);
  EXPECT_EQ(ties.token(4), "b");
  EXPECT_EQ(ties.token(5), "c");
  EXPECT_EQ(ties.token(6), "a");
}

TEST(BuildVocab, MinFrequencyCutoff) { EXPECT_EQ(build_vocab({"x"}, 2, 100).size(), kNumSpecials); }

TEST(BuildVocab, MaxSizeKeepsMostFrequent) {
  const Vocab v = build_vocab({"a a a b b c"}, 1, 6);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_FALSE(v.contains("c"));
}

TEST(BuildVocab, Deterministic) {
  const std::vector<std::string> corpus{"the cat sat", "on the mat", "The end."};
  EXPECT_EQ(build_vocab(corpus, 1, 50), build_vocab(corpus, 1, 50));
}

TEST(BuildVocab, Errors) {
  EXPECT_THROW(build_vocab({}, 1, 100), DataError);
  EXPECT_THROW(build_vocab({"a"}, 0, 100), ConfigError);
  EXPECT_THROW(build_vocab({"a"}, 1, 4), ConfigError);
}

TEST(Encode, EmptyTextIsBosEos) {
  const Vocab v;
  EXPECT_EQ(encode(v, "", true), (std::vector<TokenId>{kBosId, kEosId}));
  EXPECT_TRUE(encode(v, "", false).empty());
}

TEST(Encode, UnknownWordsMapToUnk) {
  const Vocab v(std::vector<std::string>{"world", ","});
  const TokenId world = v.id("world"), comma = v.id(",");
  EXPECT_EQ(encode(v, "Hello, world", true), (std::vector<TokenId>{kBosId, kUnkId, comma, world, kEosId}));
}

TEST(Decode, DropsSpecialsAndRendersUnk) {
  const Vocab v(std::vector<std::string>{"a", "b"});
  EXPECT_EQ(decode(v, {kBosId, kEosId}), "");
  EXPECT_EQ(decode(v, encode(v, "a b", true)), "a b");
  EXPECT_EQ(decode(v, {kUnkId}), "<unk>");
  EXPECT_THROW(decode(v, {99}), IndexError);
}

TEST(Decode, RoundTripsNormalizedText) {
  const std::string text = "The Model, trained once.";
  const Vocab v = build_vocab({text}, 1, 100);
  EXPECT_EQ(decode(v, encode(v, text, true)), "the model , trained once .");
}

TEST(Vocab, SerializeParseRoundTrip) {
  const Vocab v = build_vocab({"b a c a"}, 1, 100);
  EXPECT_EQ(Vocab::parse(v.serialize()), v);
  const auto path = (std::filesystem::temp_directory_path() / "afg_vocab_test.txt").string();
  v.save(path);
  EXPECT_EQ(Vocab::load(path), v);
  std::filesystem::remove(path);
}

TEST(Vocab, ParseRejectsBadFiles) {
  EXPECT_THROW(Vocab::parse("<pad>\n<bos>\n"), DataError);
  EXPECT_THROW(Vocab::parse("<bos>\n<pad>\n<eos>\n<unk>\n"), DataError);
  EXPECT_THROW(Vocab::parse("<pad>\n<bos>\n<eos>\n<unk>\na\na\n"), DataError);
}

}  // namespace
}  // namespace afg
