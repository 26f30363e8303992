#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "inflect/data_io.hpp"
#include "inflect/errors.hpp"
#include "inflect/utf8.hpp"

using namespace inflect;

namespace {

std::string random_word(std::mt19937_64& rng, std::size_t max_len) {
  // Mix of ASCII, Latin-1, Cyrillic, CJK and astral codepoints; no tabs, newlines or spaces.
  static const std::vector<char32_t> pool = {U'a', U'z', U'ø', U'ß', U'ж', U'ш', U'漢', U'字', U'𝔘', U'é', U'-', U'\''};
  std::uniform_int_distribution<std::size_t> len(1, max_len), pick(0, pool.size() - 1);
  std::u32string s;
  for (std::size_t n = len(rng); n > 0; --n) s.push_back(pool[pick(rng)]);
  return utf8::encode(s);
}

}  // namespace

TEST_CASE("parse_train_tsv reads three-column rows") {
  auto rows = parse_train_tsv("hug\thugged\tV;PST\nseel\tseels\tV;3;SG;PRS\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == InflectionExample{"hug", "hugged", {"V", "PST"}});
  CHECK(rows[1] == InflectionExample{"seel", "seels", {"V", "3", "SG", "PRS"}});
  CHECK(parse_train_tsv("").empty());
}

TEST_CASE("parse_train_tsv trims fields and skips blank lines") {
  auto rows = parse_train_tsv("\n  hug \thugged\t V;PST \r\n\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0] == InflectionExample{"hug", "hugged", {"V", "PST"}});
}

TEST_CASE("parse errors carry the line number") {
  try {
    parse_train_tsv("hug\thugged\tV;PST\nbad\tline\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_train_tsv("hug\thugged\t\n"), ParseError);
  CHECK_THROWS_AS(parse_train_tsv("a\tb\tc\td\n"), ParseError);
  CHECK_THROWS_AS(parse_train_tsv("\thugged\tV\n"), ParseError);
}

TEST_CASE("parse_test_tsv accepts two or three columns") {
  auto rows = parse_test_tsv("hug\tV;PST\nhug\thugged\tV;PST\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == InflectionExample{"hug", "", {"V", "PST"}});
  CHECK(rows[1] == InflectionExample{"hug", "hugged", {"V", "PST"}});
  CHECK_THROWS_AS(parse_test_tsv("hug\n"), ParseError);
  CHECK_THROWS_AS(parse_test_tsv("a\tb\tc\td\n"), ParseError);
}

TEST_CASE("invalid UTF-8 is a data error") {
  CHECK_THROWS_AS(parse_train_tsv("h\xffg\thugged\tV\n"), DataError);
  CHECK_THROWS_AS(utf8::decode("\xe2\x82"), DataError);
}

TEST_CASE("write_predictions emits the train format") {
  CHECK(write_predictions({{InflectionExample{"hug", "", {"V", "PST"}}, "hugged"}}) == "hug\thugged\tV;PST\n");
  CHECK(write_predictions({}).empty());
}

TEST_CASE("write then parse is the identity on random Unicode data") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PredictedItem> items;
    std::vector<InflectionExample> expected;
    for (int i = 0; i < 5; ++i) {
      InflectionExample ex{random_word(rng, 8), "", {}};
      for (int t = std::uniform_int_distribution<int>(1, 4)(rng); t > 0; --t) ex.tags.push_back(random_word(rng, 3));
      const auto form = random_word(rng, 10);
      items.emplace_back(ex, form);
      ex.form = form;
      expected.push_back(ex);
    }
    CHECK(parse_train_tsv(write_predictions(items)) == expected);
  }
}

TEST_CASE("write_predictions reports a failing sink") {
  std::ostringstream sink;
  sink.setstate(std::ios::badbit);
  CHECK_THROWS_AS(write_predictions({{InflectionExample{"a", "", {"V"}}, "b"}}, sink), DataError);
}

TEST_CASE("vocabulary layout") {
  const auto vocab = build_vocabulary({{"hug", "hugged", {"V", "PST"}}});
  // oracle: distinct characters and tags enumerated by hand
  const std::vector<std::string> expected = {"<pad>", "<s>", "</s>", "<unk>", "d",    "e",
                                             "g",     "h",   "u",    "TAG:PST", "TAG:V"};
  CHECK(vocab.tokens() == expected);
  CHECK(vocab.size() == 11);
  CHECK(vocab.num_characters() == 5);
  CHECK(vocab.num_tags() == 2);
  for (std::size_t i = 0; i < vocab.size(); ++i) CHECK(vocab.find(vocab.token(static_cast<TokenId>(i))) == TokenId(i));
  CHECK(vocab.char_id("h") == 7);
  CHECK(vocab.tag_id("V") == 10);
  CHECK(vocab.char_id("ø") == Vocabulary::kUnk);
  CHECK(vocab.is_output_token(Vocabulary::kEos));
  CHECK(vocab.is_output_token(Vocabulary::kUnk));
  CHECK_FALSE(vocab.is_output_token(Vocabulary::kBos));
  CHECK_FALSE(vocab.is_output_token(Vocabulary::kPad));
  CHECK_FALSE(vocab.is_output_token(10));
  CHECK_THROWS_AS(build_vocabulary({}), DataError);
}

TEST_CASE("characters and tags do not collide") {
  const auto vocab = build_vocabulary({{"V", "VV", {"V"}}});
  CHECK(vocab.char_id("V") != vocab.tag_id("V"));
  CHECK(vocab.is_character(vocab.char_id("V")));
  CHECK(vocab.is_tag(vocab.tag_id("V")));
}

TEST_CASE("vocabulary is idempotent and order-invariant") {
  const InflectionExample a{"grip", "grips", {"V", "SG", "3", "PRS"}}, b{"grips", "grip", {"V", "LEMMA"}},
      c{"ßø", "ßøe", {"N"}};
  const auto base = build_vocabulary({a, b, c});
  CHECK(build_vocabulary({a, a, b, c, c}) == base);
  CHECK(build_vocabulary({c, b, a}) == base);
  CHECK(base.hash() == build_vocabulary({b, c, a}).hash());
  CHECK(base.find("TAG:LEMMA").has_value());
}

TEST_CASE("vocabulary hash distinguishes token lists") {
  CHECK(build_vocabulary({{"ab", "ab", {"V"}}}).hash() != build_vocabulary({{"a", "a", {"V"}}}).hash());
  CHECK(build_vocabulary({{"ab", "ab", {"V"}}}).hash() != build_vocabulary({{"ab", "ab", {"N"}}}).hash());
}

TEST_CASE("from_tokens rebuilds and validates") {
  const auto vocab = build_vocabulary({{"hug", "hugged", {"V", "PST"}}});
  CHECK(Vocabulary::from_tokens(vocab.tokens()) == vocab);
  CHECK(Vocabulary::from_tokens(vocab.tokens()).num_tags() == 2);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), DataError);
  auto dup = vocab.tokens();
  dup.push_back("h");
  CHECK_THROWS_AS(Vocabulary::from_tokens(dup), DataError);
}

TEST_CASE("encode_source") {
  const auto vocab = build_vocabulary({{"hug", "hugged", {"V", "PST"}}, {"seel", "seels", {"V", "3", "SG", "PRS"}}});
  const auto seq = encode_source({"hug", "", {"V", "PST"}}, vocab);
  const std::vector<std::string> surface = {"<s>", "h", "u", "g", "TAG:V", "TAG:PST", "</s>"};
  CHECK(seq.surface == surface);
  CHECK(seq.ids.size() == seq.surface.size());
  CHECK(seq.ids.front() == Vocabulary::kBos);
  CHECK(seq.ids.back() == Vocabulary::kEos);
  CHECK(seq.ids[1] == vocab.char_id("h"));
  CHECK(seq.ids[4] == vocab.tag_id("V"));
  CHECK(encode_source({"seel", "", {"V", "3", "SG", "PRS"}}, vocab).size() == 10);

  const auto oov = encode_source({"høg", "", {"V"}}, vocab);
  CHECK(oov.ids[2] == Vocabulary::kUnk);
  CHECK(oov.surface[2] == "ø");
}

TEST_CASE("encode_source places BOS and EOS exactly once and no PAD") {
  std::mt19937_64 rng(5);
  std::vector<InflectionExample> data;
  for (int i = 0; i < 50; ++i) data.push_back({random_word(rng, 6), random_word(rng, 6), {random_word(rng, 2)}});
  const auto vocab = build_vocabulary(data);
  for (int i = 0; i < 100; ++i) {
    const auto seq = encode_source({random_word(rng, 9), "", {random_word(rng, 2), random_word(rng, 2)}}, vocab);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocabulary::kBos) == 1);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocabulary::kEos) == 1);
    CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocabulary::kPad) == 0);
    for (auto id : seq.ids) CHECK(static_cast<std::size_t>(id) < vocab.size());
  }
}

TEST_CASE("encode_target ends with EOS") {
  const auto vocab = build_vocabulary({{"hug", "hugged", {"V", "PST"}}});
  const auto seq = encode_target("hugged", vocab);
  CHECK(seq.ids.size() == 7);
  CHECK(seq.ids.back() == Vocabulary::kEos);
  CHECK(seq.ids[0] == vocab.char_id("h"));
}
