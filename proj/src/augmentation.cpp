#include "inflect/augmentation.hpp"

#include <map>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>

#include "inflect/errors.hpp"
#include "inflect/utf8.hpp"

namespace inflect {

std::vector<ParadigmGroup> group_by_lemma(const std::vector<InflectionExample>& examples) {
  std::vector<ParadigmGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& ex : examples) {
    auto [it, inserted] = index.emplace(ex.lemma, groups.size());
    if (inserted) groups.push_back({ex.lemma, {}});
    groups[it->second].slots.push_back({ex.form, ex.tags});
  }
  return groups;
}

std::vector<InflectionExample> to_reinflection(const std::vector<ParadigmGroup>& groups) {
  std::vector<InflectionExample> out;
  std::set<std::tuple<std::string, std::string, std::vector<std::string>>> seen;
  auto emit = [&](const std::string& source, const std::string& target, const std::vector<std::string>& tags) {
    if (seen.emplace(source, target, tags).second) out.push_back({source, target, tags});
  };
  for (const auto& group : groups) {
    for (const auto& slot : group.slots) emit(group.lemma, slot.form, slot.tags);
    for (std::size_t a = 0; a < group.slots.size(); ++a) {
      const auto& from = group.slots[a];
      emit(from.form, group.lemma, {from.tags.front(), std::string(Vocabulary::kLemmaTag)});
      for (std::size_t b = 0; b < group.slots.size(); ++b) {
        if (a != b) emit(from.form, group.slots[b].form, group.slots[b].tags);
      }
    }
  }
  return out;
}

std::optional<AffixAlignment> align_affixes(const std::string& lemma, const std::string& form) {
  const auto l = utf8::decode(lemma);
  const auto f = utf8::decode(form);
  // run[j] = length of the common suffix of l[..i) and f[..j).
  std::vector<std::size_t> prev(f.size() + 1, 0), cur(f.size() + 1, 0);
  std::size_t best_len = 0, best_end = 0;
  for (std::size_t i = 1; i <= l.size(); ++i) {
    for (std::size_t j = 1; j <= f.size(); ++j) {
      cur[j] = l[i - 1] == f[j - 1] ? prev[j - 1] + 1 : 0;
      // strict '>' keeps the earliest end in the lemma, hence the earliest start
      if (cur[j] > best_len) {
        best_len = cur[j];
        best_end = i;
      }
    }
    std::swap(prev, cur);
  }
  if (best_len < kMinStemLength) return std::nullopt;
  const std::u32string stem = l.substr(best_end - best_len, best_len);
  const auto lpos = l.find(stem);
  const auto fpos = f.find(stem);
  AffixAlignment a;
  a.stem = utf8::encode(stem);
  a.lemma_prefix = utf8::encode(std::u32string_view(l).substr(0, lpos));
  a.lemma_suffix = utf8::encode(std::u32string_view(l).substr(lpos + stem.size()));
  a.form_prefix = utf8::encode(std::u32string_view(f).substr(0, fpos));
  a.form_suffix = utf8::encode(std::u32string_view(f).substr(fpos + stem.size()));
  return a;
}

std::vector<HallucinatedExample> hallucinate_with_provenance(const std::vector<InflectionExample>& examples,
                                                             std::size_t n, const std::vector<std::string>& alphabet,
                                                             std::uint64_t seed) {
  std::vector<HallucinatedExample> out;
  if (n == 0) return out;
  if (alphabet.empty()) throw DataError("hallucination alphabet is empty");

  std::vector<std::pair<std::size_t, AffixAlignment>> sources;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (auto a = align_affixes(examples[i].lemma, examples[i].form)) sources.emplace_back(i, std::move(*a));
  }
  if (sources.empty()) throw DataError("no hallucination source");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_source(0, sources.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_char(0, alphabet.size() - 1);
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& [index, align] = sources[pick_source(rng)];
    const auto stem_len = utf8::length(align.stem);
    std::string stem;
    for (std::size_t c = 0; c < stem_len; ++c) stem += alphabet[pick_char(rng)];
    HallucinatedExample h;
    h.example.lemma = align.lemma_prefix + stem + align.lemma_suffix;
    h.example.form = align.form_prefix + stem + align.form_suffix;
    h.example.tags = examples[index].tags;
    h.source_index = index;
    h.source_alignment = align;
    h.new_stem = std::move(stem);
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<InflectionExample> hallucinate(const std::vector<InflectionExample>& examples, std::size_t n,
                                           const std::vector<std::string>& alphabet, std::uint64_t seed) {
  std::vector<InflectionExample> out;
  for (auto& h : hallucinate_with_provenance(examples, n, alphabet, seed)) out.push_back(std::move(h.example));
  return out;
}

std::vector<std::string> character_alphabet(const std::vector<InflectionExample>& examples) {
  std::set<char32_t> chars;
  for (const auto& ex : examples) {
    for (char32_t cp : utf8::decode(ex.lemma)) chars.insert(cp);
    for (char32_t cp : utf8::decode(ex.form)) chars.insert(cp);
  }
  std::vector<std::string> out;
  for (char32_t cp : chars) out.push_back(utf8::encode(cp));
  return out;
}

}  // namespace inflect
