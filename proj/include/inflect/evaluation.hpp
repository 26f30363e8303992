#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "inflect/augmentation.hpp"
#include "inflect/data_io.hpp"
#include "inflect/model.hpp"
#include "inflect/training.hpp"

namespace inflect {

// Fraction of positions whose strings are byte-identical (no normalization).
double exact_match_accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& predicted);

struct LanguageResult {
  std::string language;
  std::size_t train_size = 0;  // original, before augmentation
  double accuracy = 0.0;
};

struct GroupSummary {
  std::optional<double> mean;  // empty for an empty group
  std::size_t count = 0;
};

struct EvalReport {
  std::vector<LanguageResult> languages;
  GroupSummary low, other, all;
};

// Unweighted means; a language is Low when its train size is below `threshold`.
EvalReport macro_report(const std::vector<LanguageResult>& results,
                        std::size_t threshold = kLowResourceThreshold);

// language, size, group, accuracy
std::string format_report_tsv(const EvalReport& report, std::size_t threshold = kLowResourceThreshold);
std::string format_report_summary(const EvalReport& report);

// --- low-resource comparison ------------------------------------------------------

inline constexpr std::size_t kLowResourceSampleSize = 100;

// `n` examples drawn without replacement, in their original order.
std::vector<InflectionExample> subsample(const std::vector<InflectionExample>& examples, std::size_t n,
                                         std::uint64_t seed);

struct LanguageData {
  std::string language;
  std::vector<InflectionExample> train;
  std::vector<InflectionExample> dev;
};

struct ArmResult {
  double accuracy = 0.0;
  // Correct predictions whose gold form has a character missing from the
  // training sample.
  std::size_t oov_correct = 0;
  std::size_t unk_emitted = 0;
  std::vector<std::string> predictions;
};

struct LowResourceCell {
  std::string language;
  std::uint64_t seed = 0;
  std::uint64_t shared_parameter_hash = 0;  // identical for both arms at initialization
  ArmResult vanilla;                        // copy disabled
  ArmResult pointer_generator;              // copy enabled
};

struct LowResourceReport {
  std::vector<LowResourceCell> cells;
  double mean_vanilla = 0.0;
  double mean_pointer_generator = 0.0;
  double mean_delta = 0.0;  // pointer-generator minus vanilla
  std::size_t oov_correct_vanilla = 0;
  std::size_t oov_correct_pointer_generator = 0;
};

struct LowResourceOptions {
  ModelConfig model;
  TrainConfig train;            // `copy` and `seed` are set per arm and cell
  std::size_t sample_size = kLowResourceSampleSize;
  std::size_t ensemble_size = 1;
  std::ostream* log = nullptr;
};

// Hash over all initial parameters except the copy switch, for `config` with
// parameters drawn from `seed`.
std::uint64_t shared_parameter_hash(const ModelConfig& config, std::uint64_t seed);

// For every language and seed: subsample the training set, train a
// copy-disabled and a copy-enabled model that differ in nothing else, and
// score both on the full dev set.
LowResourceReport low_resource_experiment(const std::vector<LanguageData>& languages,
                                          const std::vector<std::uint64_t>& seeds, const LowResourceOptions& options);

std::string format_low_resource_report(const LowResourceReport& report);

}  // namespace inflect
