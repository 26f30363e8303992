#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace inflect {

// A (lemma, inflected form, tags) triple. `form` is empty for uncovered test items.
struct InflectionExample {
  std::string lemma;
  std::string form;
  std::vector<std::string> tags;

  bool operator==(const InflectionExample&) const = default;
};

std::string join_tags(const std::vector<std::string>& tags);
std::vector<std::string> split_tags(std::string_view tags);

// Three columns per line: lemma, form, semicolon-joined tags.
std::vector<InflectionExample> parse_train_tsv(std::string_view text);

// Two columns (lemma, tags) or three (covered test with gold form).
std::vector<InflectionExample> parse_test_tsv(std::string_view text);

std::string read_file(const std::string& path);
std::vector<InflectionExample> read_train_file(const std::string& path);
std::vector<InflectionExample> read_test_file(const std::string& path);

using PredictedItem = std::pair<InflectionExample, std::string>;

// Writes "lemma\tpredicted\ttags" lines in the train-file format.
void write_predictions(const std::vector<PredictedItem>& items, std::ostream& sink);
std::string write_predictions(const std::vector<PredictedItem>& items);

// Serializes examples with their own forms (augmentation output).
std::string write_examples(const std::vector<InflectionExample>& examples);
void write_file(const std::string& path, std::string_view contents);

using TokenId = std::int32_t;

// Token <-> index map over characters, namespaced tags and four specials.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;
  static constexpr std::string_view kTagPrefix = "TAG:";
  static constexpr std::string_view kLemmaTag = "LEMMA";

  // Rebuilds a vocabulary from its token list (checkpoint loading).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  Vocabulary();

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t num_characters() const noexcept { return num_chars_; }
  std::size_t num_tags() const noexcept { return num_tags_; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::optional<TokenId> find(std::string_view token) const;

  TokenId char_id(std::string_view character) const;
  TokenId tag_id(std::string_view tag) const;

  bool is_special(TokenId id) const noexcept { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }
  bool is_tag(TokenId id) const noexcept;
  bool is_character(TokenId id) const noexcept;

  // Tokens the decoder may emit: characters, EOS and UNK.
  bool is_output_token(TokenId id) const noexcept;

  // FNV-1a over the token list; identifies compatible checkpoints.
  std::uint64_t hash() const noexcept;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  friend Vocabulary build_vocabulary(const std::vector<InflectionExample>&);
  void append(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t num_chars_ = 0;
  std::size_t num_tags_ = 0;
};

std::string tag_token(std::string_view tag);
std::string_view special_token_name(TokenId id);

// Specials, then characters by codepoint, then tag tokens lexicographically.
Vocabulary build_vocabulary(const std::vector<InflectionExample>& examples);

struct EncodedSequence {
  std::vector<TokenId> ids;
  // Original token strings, kept for unknown characters so they can still be copied.
  std::vector<std::string> surface;

  std::size_t size() const noexcept { return ids.size(); }
  bool operator==(const EncodedSequence&) const = default;
};

// [BOS] + lemma characters + tag tokens + [EOS].
EncodedSequence encode_source(const InflectionExample& example, const Vocabulary& vocab);

// Target characters followed by EOS, without BOS.
EncodedSequence encode_target(std::string_view form, const Vocabulary& vocab);

}  // namespace inflect
