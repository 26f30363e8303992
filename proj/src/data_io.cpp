#include "inflect/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "inflect/errors.hpp"
#include "inflect/utf8.hpp"

namespace inflect {
namespace {

constexpr std::string_view kWhitespace = " \t\r\n\v\f";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kWhitespace);
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Visits each non-blank line with its 1-based line number.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!trim(line).empty()) fn(line_no, line);
    start = end + 1;
  }
}

std::vector<std::string> parse_tag_field(std::size_t line_no, std::string_view field) {
  const auto trimmed = trim(field);
  if (trimmed.empty()) throw ParseError(line_no, "empty tag field");
  std::vector<std::string> tags;
  for (auto tag : split(trimmed, ';')) {
    tag = trim(tag);
    if (tag.empty()) throw ParseError(line_no, "empty tag in '" + std::string(trimmed) + "'");
    tags.emplace_back(tag);
  }
  return tags;
}

InflectionExample make_example(std::size_t line_no, std::string_view lemma, std::string_view form,
                               std::string_view tags) {
  InflectionExample ex;
  ex.lemma = std::string(trim(lemma));
  ex.form = std::string(trim(form));
  ex.tags = parse_tag_field(line_no, tags);
  if (ex.lemma.empty()) throw ParseError(line_no, "empty lemma");
  try {
    utf8::decode(ex.lemma);
    utf8::decode(ex.form);
  } catch (const DataError& e) {
    throw ParseError(line_no, e.what());
  }
  return ex;
}

}  // namespace

std::string join_tags(const std::vector<std::string>& tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out += ';';
    out += tags[i];
  }
  return out;
}

std::vector<std::string> split_tags(std::string_view tags) { return parse_tag_field(0, tags); }

std::vector<InflectionExample> parse_train_tsv(std::string_view text) {
  std::vector<InflectionExample> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    out.push_back(make_example(line_no, fields[0], fields[1], fields[2]));
  });
  return out;
}

std::vector<InflectionExample> parse_test_tsv(std::string_view text) {
  std::vector<InflectionExample> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = split(line, '\t');
    if (fields.size() == 2) {
      out.push_back(make_example(line_no, fields[0], {}, fields[1]));
    } else if (fields.size() == 3) {
      out.push_back(make_example(line_no, fields[0], fields[1], fields[2]));
    } else {
      throw ParseError(line_no, "expected 2 or 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
  });
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<InflectionExample> read_train_file(const std::string& path) {
  try {
    return parse_train_tsv(read_file(path));
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::vector<InflectionExample> read_test_file(const std::string& path) {
  try {
    return parse_test_tsv(read_file(path));
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_predictions(const std::vector<PredictedItem>& items, std::ostream& sink) {
  for (const auto& [example, predicted] : items) {
    sink << example.lemma << '\t' << predicted << '\t' << join_tags(example.tags) << '\n';
  }
  if (!sink) throw DataError("failed writing predictions");
}

std::string write_predictions(const std::vector<PredictedItem>& items) {
  std::ostringstream out;
  write_predictions(items, out);
  return out.str();
}

std::string write_examples(const std::vector<InflectionExample>& examples) {
  std::ostringstream out;
  for (const auto& ex : examples) out << ex.lemma << '\t' << ex.form << '\t' << join_tags(ex.tags) << '\n';
  return out.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

// --- Vocabulary -------------------------------------------------------------

std::string tag_token(std::string_view tag) { return std::string(Vocabulary::kTagPrefix) + std::string(tag); }

std::string_view special_token_name(TokenId id) {
  static constexpr std::string_view kNames[] = {"<pad>", "<s>", "</s>", "<unk>"};
  return kNames[id];
}

Vocabulary::Vocabulary() {
  for (TokenId id = 0; id < static_cast<TokenId>(kNumSpecials); ++id) append(std::string(special_token_name(id)));
}

void Vocabulary::append(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  if (!index_.emplace(token, id).second) throw DataError("duplicate vocabulary token '" + token + "'");
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumSpecials) throw DataError("vocabulary is missing special tokens");
  for (TokenId id = 0; id < static_cast<TokenId>(kNumSpecials); ++id) {
    if (tokens[id] != special_token_name(id)) throw DataError("vocabulary specials out of place");
  }
  Vocabulary v;
  bool in_tags = false;
  for (std::size_t i = kNumSpecials; i < tokens.size(); ++i) {
    const bool tag = tokens[i].starts_with(kTagPrefix);
    if (tag) {
      in_tags = true;
      ++v.num_tags_;
    } else {
      if (in_tags) throw DataError("character token after tag tokens in vocabulary");
      if (utf8::length(tokens[i]) != 1) throw DataError("character token '" + tokens[i] + "' is not one codepoint");
      ++v.num_chars_;
    }
    v.append(std::move(tokens[i]));
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::char_id(std::string_view character) const {
  if (character.starts_with(kTagPrefix)) return kUnk;
  return find(character).value_or(kUnk);
}

TokenId Vocabulary::tag_id(std::string_view tag) const { return find(tag_token(tag)).value_or(kUnk); }

bool Vocabulary::is_character(TokenId id) const noexcept {
  return id >= static_cast<TokenId>(kNumSpecials) && id < static_cast<TokenId>(kNumSpecials + num_chars_);
}

bool Vocabulary::is_tag(TokenId id) const noexcept {
  return id >= static_cast<TokenId>(kNumSpecials + num_chars_) && id < static_cast<TokenId>(tokens_.size());
}

bool Vocabulary::is_output_token(TokenId id) const noexcept { return id == kEos || id == kUnk || is_character(id); }

std::uint64_t Vocabulary::hash() const noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& tok : tokens_) {
    for (unsigned char c : tok) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;  // separator byte, never valid inside UTF-8
    h *= 1099511628211ULL;
  }
  return h;
}

Vocabulary build_vocabulary(const std::vector<InflectionExample>& examples) {
  if (examples.empty()) throw DataError("cannot build a vocabulary from an empty example list");
  std::set<char32_t> chars;
  std::set<std::string> tags;
  for (const auto& ex : examples) {
    for (char32_t cp : utf8::decode(ex.lemma)) chars.insert(cp);
    for (char32_t cp : utf8::decode(ex.form)) chars.insert(cp);
    for (const auto& tag : ex.tags) tags.insert(tag_token(tag));
  }
  Vocabulary v;
  for (char32_t cp : chars) v.append(utf8::encode(cp));
  v.num_chars_ = chars.size();
  for (const auto& tag : tags) v.append(tag);
  v.num_tags_ = tags.size();
  return v;
}

EncodedSequence encode_source(const InflectionExample& example, const Vocabulary& vocab) {
  EncodedSequence seq;
  const auto chars = utf8::split_codepoints(example.lemma);
  seq.ids.reserve(chars.size() + example.tags.size() + 2);
  seq.ids.push_back(Vocabulary::kBos);
  seq.surface.emplace_back(special_token_name(Vocabulary::kBos));
  for (const auto& ch : chars) {
    seq.ids.push_back(vocab.char_id(ch));
    seq.surface.push_back(ch);
  }
  for (const auto& tag : example.tags) {
    seq.ids.push_back(vocab.tag_id(tag));
    seq.surface.push_back(tag_token(tag));
  }
  seq.ids.push_back(Vocabulary::kEos);
  seq.surface.emplace_back(special_token_name(Vocabulary::kEos));
  return seq;
}

EncodedSequence encode_target(std::string_view form, const Vocabulary& vocab) {
  EncodedSequence seq;
  for (auto& ch : utf8::split_codepoints(form)) {
    seq.ids.push_back(vocab.char_id(ch));
    seq.surface.push_back(std::move(ch));
  }
  seq.ids.push_back(Vocabulary::kEos);
  seq.surface.emplace_back(special_token_name(Vocabulary::kEos));
  return seq;
}

}  // namespace inflect
