#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "inflect/augmentation.hpp"
#include "inflect/errors.hpp"
#include "inflect/utf8.hpp"

using namespace inflect;

namespace {

// Ordered-pair enumeration written independently of the converter.
std::vector<InflectionExample> enumerate_pairs(const std::vector<InflectionExample>& rows) {
  std::vector<std::string> lemmas;
  for (const auto& r : rows) {
    if (std::find(lemmas.begin(), lemmas.end(), r.lemma) == lemmas.end()) lemmas.push_back(r.lemma);
  }
  std::vector<InflectionExample> out;
  auto emit = [&](InflectionExample e) {
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(std::move(e));
  };
  for (const auto& lemma : lemmas) {
    std::vector<InflectionExample> slots;
    for (const auto& r : rows) {
      if (r.lemma == lemma) slots.push_back(r);
    }
    for (const auto& s : slots) emit(s);
    for (std::size_t a = 0; a < slots.size(); ++a) {
      emit({slots[a].form, lemma, {slots[a].tags.front(), "LEMMA"}});
      for (std::size_t b = 0; b < slots.size(); ++b) {
        if (a != b) emit({slots[a].form, slots[b].form, slots[b].tags});
      }
    }
  }
  return out;
}

// Longest common substring by exhaustive search over lemma substrings.
std::size_t brute_lcs(const std::u32string& a, const std::u32string& b) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t len = a.size() - i; len > best; --len) {
      if (b.find(a.substr(i, len)) != std::u32string::npos) {
        best = len;
        break;
      }
    }
  }
  return best;
}

std::string random_string(std::mt19937_64& rng, std::string_view alphabet, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> len(lo, hi), pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t n = len(rng); n > 0; --n) s.push_back(alphabet[pick(rng)]);
  return s;
}

}  // namespace

TEST_CASE("group_by_lemma keeps input order") {
  const std::vector<InflectionExample> rows = {
      {"grip", "grips", {"V", "SG", "3", "PRS"}}, {"hug", "hugged", {"V", "PST"}}, {"grip", "gripped", {"V", "PST"}}};
  const auto groups = group_by_lemma(rows);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].lemma == "grip");
  REQUIRE(groups[0].slots.size() == 2);
  CHECK(groups[0].slots[0].form == "grips");
  CHECK(groups[0].slots[1].form == "gripped");
  CHECK(groups[1].lemma == "hug");
  CHECK(group_by_lemma({}).empty());
}

TEST_CASE("multitask rows for the grip paradigm") {
  const std::vector<InflectionExample> rows = {{"grip", "grips", {"V", "SG", "3", "PRS"}},
                                               {"grip", "gripped", {"V", "PST"}}};
  const auto out = to_reinflection(group_by_lemma(rows));
  auto has = [&](const InflectionExample& e) { return std::find(out.begin(), out.end(), e) != out.end(); };
  CHECK(has({"grips", "grip", {"V", "LEMMA"}}));
  CHECK(has({"grips", "gripped", {"V", "PST"}}));
  CHECK(has({"gripped", "grip", {"V", "LEMMA"}}));
  CHECK(has({"gripped", "grips", {"V", "SG", "3", "PRS"}}));
  CHECK(has(rows[0]));
  CHECK(has(rows[1]));
  CHECK(out.size() == 6);
}

TEST_CASE("single-slot group") {
  const auto out = to_reinflection(group_by_lemma({{"hug", "hugged", {"V", "PST"}}}));
  const std::vector<InflectionExample> expected = {{"hug", "hugged", {"V", "PST"}}, {"hugged", "hug", {"V", "LEMMA"}}};
  CHECK(out == expected);
}

TEST_CASE("converter matches the brute-force pair enumerator") {
  std::mt19937_64 rng(2024);
  const std::vector<std::vector<std::string>> tag_pool = {{"V", "PST"}, {"V", "PRS"}, {"N", "PL"}, {"N", "SG"},
                                                          {"V", "3", "SG"}};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<InflectionExample> rows;
    const int groups = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int g = 0; g < groups; ++g) {
      const auto lemma = random_string(rng, "abc", 1, 3);
      const int k = std::uniform_int_distribution<int>(1, 5)(rng);
      for (int s = 0; s < k; ++s) {
        // small alphabets force syncretism and duplicate rows
        rows.push_back({lemma, random_string(rng, "ab", 1, 3),
                        tag_pool[std::uniform_int_distribution<std::size_t>(0, tag_pool.size() - 1)(rng)]});
      }
    }
    CHECK(to_reinflection(group_by_lemma(rows)) == enumerate_pairs(rows));
  }
}

TEST_CASE("converter size for distinct forms is k + k(k-1) + k") {
  for (std::size_t k = 1; k <= 5; ++k) {
    std::vector<InflectionExample> rows;
    for (std::size_t i = 0; i < k; ++i) rows.push_back({"lem", "form" + std::to_string(i), {"V", std::to_string(i)}});
    CHECK(to_reinflection(group_by_lemma(rows)).size() == k + k * (k - 1) + k);
  }
}

TEST_CASE("align_affixes") {
  auto a = align_affixes("hug", "hugged");
  REQUIRE(a);
  CHECK(*a == AffixAlignment{"", "", "", "ged", "hug"});
  a = align_affixes("seel", "seels");
  REQUIRE(a);
  CHECK(*a == AffixAlignment{"", "", "", "s", "seel"});
  CHECK_FALSE(align_affixes("go", "went"));
  CHECK_FALSE(align_affixes("ab", "ab"));
  a = align_affixes("machen", "gemacht");
  REQUIRE(a);
  CHECK(*a == AffixAlignment{"", "en", "ge", "t", "mach"});
  a = align_affixes("ødelægge", "ødelagt");
  REQUIRE(a);
  CHECK(a->stem == "ødel");
}

TEST_CASE("alignment reconstructs both strings around a longest common substring") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto lemma = random_string(rng, "abcd", 1, 9), form = random_string(rng, "abcd", 1, 9);
    const auto lcs = brute_lcs(utf8::decode(lemma), utf8::decode(form));
    const auto a = align_affixes(lemma, form);
    if (lcs < kMinStemLength) {
      CHECK_FALSE(a);
      continue;
    }
    REQUIRE(a);
    CHECK(utf8::length(a->stem) == lcs);
    CHECK(a->lemma_prefix + a->stem + a->lemma_suffix == lemma);
    CHECK(a->form_prefix + a->stem + a->form_suffix == form);
    // first occurrence in both strings
    CHECK(lemma.find(a->stem) == a->lemma_prefix.size());
    CHECK(form.find(a->stem) == a->form_prefix.size());
  }
}

TEST_CASE("hallucinate substitutes the stem") {
  const std::vector<InflectionExample> src = {{"hug", "hugged", {"V", "PST"}}};
  const std::vector<std::string> alphabet = {"z", "e", "k"};
  const auto out = hallucinate_with_provenance(src, 50, alphabet, 3);
  REQUIRE(out.size() == 50);
  for (const auto& h : out) {
    CHECK(h.example.lemma == h.new_stem);
    CHECK(h.example.form == h.new_stem + "ged");
    CHECK(h.example.tags == src[0].tags);
    CHECK(utf8::length(h.new_stem) == 3);
  }
  CHECK(hallucinate(src, 0, alphabet, 3).empty());
  CHECK(hallucinate(src, 20, alphabet, 8) == hallucinate(src, 20, alphabet, 8));
  CHECK(hallucinate(src, 20, alphabet, 8) != hallucinate(src, 20, alphabet, 9));
}

TEST_CASE("hallucinate needs an alignable source") {
  CHECK_THROWS_AS(hallucinate({{"go", "went", {"V", "PST"}}}, 5, {"a"}, 1), DataError);
  CHECK(hallucinate({{"go", "went", {"V", "PST"}}}, 0, {"a"}, 1).empty());
  CHECK_THROWS_AS(hallucinate({{"hug", "hugged", {"V"}}}, 5, {}, 1), DataError);
}

TEST_CASE("hallucinated examples keep source affixes and stay within the alphabet") {
  std::mt19937_64 rng(17);
  std::vector<InflectionExample> src;
  for (int i = 0; i < 60; ++i) {
    const auto stem = random_string(rng, "ptkaeiou", 3, 6);
    src.push_back({random_string(rng, "xy", 0, 1) + stem + random_string(rng, "n", 0, 2),
                   random_string(rng, "qg", 0, 2) + stem + random_string(rng, "sd", 0, 3),
                   {"V", std::to_string(i % 3)}});
  }
  const auto alphabet = character_alphabet(src);
  std::set<std::string> allowed(alphabet.begin(), alphabet.end());
  const auto out = hallucinate_with_provenance(src, 1000, alphabet, 5);
  for (const auto& h : out) {
    const auto& a = h.source_alignment;
    CHECK(align_affixes(src[h.source_index].lemma, src[h.source_index].form) == a);
    CHECK(h.example.lemma == a.lemma_prefix + h.new_stem + a.lemma_suffix);
    CHECK(h.example.form == a.form_prefix + h.new_stem + a.form_suffix);
    CHECK(h.example.tags == src[h.source_index].tags);
    CHECK(utf8::length(h.new_stem) == utf8::length(a.stem));
    for (const auto& c : utf8::split_codepoints(h.new_stem)) CHECK(allowed.count(c));
  }
}

TEST_CASE("character_alphabet is sorted and distinct") {
  const auto a = character_alphabet({{"bé", "ab", {"V"}}, {"zb", "bé", {"N"}}});
  const std::vector<std::string> expected = {"a", "b", "z", "é"};
  CHECK(a == expected);
}
