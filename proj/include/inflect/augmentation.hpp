#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inflect/data_io.hpp"

namespace inflect {

struct ParadigmSlot {
  std::string form;
  std::vector<std::string> tags;

  bool operator==(const ParadigmSlot&) const = default;
};

// All inflected forms sharing one lemma, in input order.
struct ParadigmGroup {
  std::string lemma;
  std::vector<ParadigmSlot> slots;
};

std::vector<ParadigmGroup> group_by_lemma(const std::vector<InflectionExample>& examples);

// Expands groups into a multitask inflection + reinflection set. Rows are
// InflectionExample values whose `lemma` field holds the source form.
// Per group: the original rows, then for each slot A the row A -> lemma
// tagged [POS, LEMMA] followed by A -> B for every other slot B.
// Identical rows are emitted once.
std::vector<InflectionExample> to_reinflection(const std::vector<ParadigmGroup>& groups);

// lemma = lemma_prefix + stem + lemma_suffix, form = form_prefix + stem + form_suffix.
struct AffixAlignment {
  std::string lemma_prefix;
  std::string lemma_suffix;
  std::string form_prefix;
  std::string form_suffix;
  std::string stem;

  bool operator==(const AffixAlignment&) const = default;
};

inline constexpr std::size_t kMinStemLength = 3;

// Longest common substring (in codepoints) of lemma and form used as the
// stem; none when it is shorter than kMinStemLength. Among equally long
// candidates the earliest in the lemma wins, and both strings are split
// around the first occurrence of the stem.
std::optional<AffixAlignment> align_affixes(const std::string& lemma, const std::string& form);

inline constexpr std::size_t kDefaultHallucinationSize = 10000;
inline constexpr std::size_t kLowResourceThreshold = 1000;

struct HallucinatedExample {
  InflectionExample example;
  std::size_t source_index = 0;  // index into the input example list
  AffixAlignment source_alignment;
  std::string new_stem;
};

// Generates `n` pseudo-examples by replacing the aligned stem of a uniformly
// sampled alignable example with a random string of equal length over
// `alphabet` (one codepoint per entry). Deterministic in `seed`.
std::vector<HallucinatedExample> hallucinate_with_provenance(const std::vector<InflectionExample>& examples,
                                                             std::size_t n, const std::vector<std::string>& alphabet,
                                                             std::uint64_t seed);

std::vector<InflectionExample> hallucinate(const std::vector<InflectionExample>& examples, std::size_t n,
                                           const std::vector<std::string>& alphabet, std::uint64_t seed);

// Distinct codepoints of all lemmas and forms, in codepoint order.
std::vector<std::string> character_alphabet(const std::vector<InflectionExample>& examples);

}  // namespace inflect
