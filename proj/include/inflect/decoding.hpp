#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "inflect/data_io.hpp"
#include "inflect/model.hpp"

namespace inflect {

// Rendered in place of an UNK argmax.
inline constexpr std::string_view kUnkReplacement = "□";

struct Prediction {
  std::string form;
  std::size_t model_id = 0;
  double score = 0.0;        // sum of token log-probabilities, EOS included
  std::size_t length = 0;    // generated tokens, EOS included
  std::size_t unk_count = 0;
  bool finished = true;      // false when the length bound cut generation short

  double normalized_score() const { return length == 0 ? score : score / static_cast<double>(length); }
};

// Maps equal-length prefixes (each starting with BOS) to log-probabilities
// over the output space, one vector per prefix.
using StepFunction = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<TokenId>>&)>;

struct SearchResult {
  std::vector<TokenId> tokens;  // generated tokens without BOS
  double log_prob = 0.0;
  bool finished = false;        // ended with EOS

  double normalized() const { return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size()); }
};

// Repeated argmax; ties go to the lowest token index.
SearchResult greedy_search(const StepFunction& step, std::size_t max_length);

// Beam search ranked by cumulative log-probability, final choice by
// length-normalized score. Width 1 reproduces greedy_search; for wider beams
// the greedy hypothesis is kept as a candidate so the result never scores
// below it.
SearchResult beam_search(const StepFunction& step, std::size_t width, std::size_t max_length);

template <class Real>
Prediction greedy_decode(const InflectionExample& example, const InflectionModel<Real>& model,
                         std::size_t model_id = 0);

// Greedy decoding of many examples in lockstep batches.
template <class Real>
std::vector<Prediction> greedy_decode_batch(const std::vector<InflectionExample>& examples,
                                            const InflectionModel<Real>& model, std::size_t batch_size = 64,
                                            std::size_t model_id = 0);

template <class Real>
Prediction beam_decode(const InflectionExample& example, const InflectionModel<Real>& model, std::size_t width,
                       std::size_t model_id = 0);

// Model-backed step function for one source (exposed for tests and tools).
template <class Real>
StepFunction model_step_function(const InflectionExample& example, const InflectionModel<Real>& model,
                                 const ForwardOptions& options = {});

// Most frequent form; ties are broken uniformly at random from `seed`.
std::string majority_vote(const std::vector<Prediction>& predictions, std::uint64_t seed);

// Per-item majority vote over the outputs of several models (each inner
// vector covers the same items in the same order). Item i votes with a seed
// derived from `seed` and i.
std::vector<std::string> ensemble_vote(const std::vector<std::vector<Prediction>>& per_model, std::uint64_t seed);

}  // namespace inflect
