#include "inflect/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "inflect/errors.hpp"
#include "inflect/random.hpp"

namespace inflect {
namespace {

std::size_t argmax(const std::vector<double>& values, std::size_t limit) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < std::min(limit, values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<TokenId> with_bos(const std::vector<TokenId>& tokens) {
  std::vector<TokenId> prefix{Vocabulary::kBos};
  prefix.insert(prefix.end(), tokens.begin(), tokens.end());
  return prefix;
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

Prediction render(const SearchResult& result, const ExtendedVocabulary& extended, const Vocabulary& vocab,
                  std::size_t model_id) {
  Prediction p;
  p.model_id = model_id;
  p.score = result.log_prob;
  p.length = result.tokens.size();
  p.finished = result.finished;
  for (TokenId id : result.tokens) {
    if (id == Vocabulary::kEos) break;
    if (id == Vocabulary::kUnk) {
      p.form += kUnkReplacement;
      ++p.unk_count;
    } else if (vocab.is_special(id) || vocab.is_tag(id)) {
      // unreachable: the output distribution gives these zero mass
      ++p.unk_count;
    } else {
      p.form += extended.render(id, vocab);
    }
  }
  return p;
}

}  // namespace

SearchResult greedy_search(const StepFunction& step, std::size_t max_length) {
  SearchResult result;
  while (result.tokens.size() < max_length) {
    const auto log_probs = step({with_bos(result.tokens)}).front();
    const auto best = argmax(log_probs, log_probs.size());
    result.tokens.push_back(static_cast<TokenId>(best));
    result.log_prob += log_probs[best];
    if (static_cast<TokenId>(best) == Vocabulary::kEos) {
      result.finished = true;
      break;
    }
  }
  return result;
}

SearchResult beam_search(const StepFunction& step, std::size_t width, std::size_t max_length) {
  if (width == 0) throw ConfigError("beam width must be at least 1");
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double score;
  };
  std::vector<SearchResult> live{SearchResult{}};
  std::vector<SearchResult> finished;
  for (std::size_t t = 0; t < max_length && !live.empty(); ++t) {
    std::vector<std::vector<TokenId>> prefixes;
    for (const auto& h : live) prefixes.push_back(with_bos(h.tokens));
    const auto log_probs = step(prefixes);
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < live.size(); ++h) {
      for (std::size_t c = 0; c < log_probs[h].size(); ++c) {
        if (std::isfinite(log_probs[h][c])) {
          candidates.push_back({h, static_cast<TokenId>(c), live[h].log_prob + log_probs[h][c]});
        }
      }
    }
    const std::size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<SearchResult> next;
    for (std::size_t k = 0; k < keep; ++k) {
      SearchResult h = live[candidates[k].parent];
      h.tokens.push_back(candidates[k].token);
      h.log_prob = candidates[k].score;
      if (candidates[k].token == Vocabulary::kEos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }
  for (auto& h : live) finished.push_back(std::move(h));
  if (width > 1) finished.push_back(greedy_search(step, max_length));
  if (finished.empty()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].normalized() > finished[best].normalized()) best = i;
  }
  return finished[best];
}

template <class Real>
StepFunction model_step_function(const InflectionExample& example, const InflectionModel<Real>& model,
                                 const ForwardOptions& options) {
  const auto source = encode_source(example, model.vocab());
  const auto single = model.make_source_batch(std::span(&source, 1));
  const auto encoded = model.encode(single, options);
  return [&model, source, single, encoded, options](const std::vector<std::vector<TokenId>>& prefixes) {
    const std::size_t n = prefixes.size();
    std::vector<EncodedSequence> copies(n, source);
    const auto batch = model.make_source_batch(copies);
    const auto& states = encoded.states.value();
    nn::Tensor<Real> repeated({n, states.shape[1], states.shape[2]});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(states.data.begin(), states.data.end(),
                repeated.data.begin() + static_cast<std::ptrdiff_t>(i * states.size()));
    }
    const EncoderOutput<Real> enc{nn::Var<Real>::constant(std::move(repeated))};
    const auto out = model.decode(enc, batch, prefixes, options);
    const std::size_t Ty = prefixes.front().size(), C = out.probs.shape().back();
    const std::size_t limit = batch.extended.front().size();
    std::vector<std::vector<double>> result(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto* row = out.probs.value().data.data() + (i * Ty + Ty - 1) * C;
      for (std::size_t c = 0; c < std::min(C, limit); ++c) result[i].push_back(safe_log(static_cast<double>(row[c])));
    }
    return result;
  };
}

template <class Real>
std::vector<Prediction> greedy_decode_batch(const std::vector<InflectionExample>& examples,
                                            const InflectionModel<Real>& model, std::size_t batch_size,
                                            std::size_t model_id) {
  if (batch_size == 0) batch_size = 1;
  std::vector<Prediction> predictions;
  predictions.reserve(examples.size());
  const auto& vocab = model.vocab();
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<EncodedSequence> sources;
    for (std::size_t i = start; i < end; ++i) sources.push_back(encode_source(examples[i], vocab));
    const auto batch = model.make_source_batch(sources);
    const auto encoded = model.encode(batch);
    const std::size_t B = sources.size();
    std::vector<std::size_t> limits(B);
    std::size_t longest = 0;
    for (std::size_t b = 0; b < B; ++b) {
      limits[b] = model.max_decode_length(sources[b]);
      longest = std::max(longest, limits[b]);
    }
    std::vector<SearchResult> results(B);
    std::vector<std::vector<TokenId>> inputs(B, std::vector<TokenId>{Vocabulary::kBos});
    std::size_t active = B;
    for (std::size_t t = 0; t < longest && active > 0; ++t) {
      const auto out = model.decode(encoded, batch, inputs);
      const std::size_t Ty = t + 1, C = out.probs.shape().back();
      for (std::size_t b = 0; b < B; ++b) {
        auto& r = results[b];
        TokenId next = Vocabulary::kEos;
        if (!r.finished && r.tokens.size() < limits[b]) {
          const auto* row = out.probs.value().data.data() + (b * Ty + t) * C;
          const std::size_t limit = model.config().copy_enabled ? batch.extended[b].size() : vocab.size();
          std::size_t best = 0;
          for (std::size_t c = 1; c < limit; ++c) {
            if (row[c] > row[best]) best = c;
          }
          next = static_cast<TokenId>(best);
          r.tokens.push_back(next);
          r.log_prob += safe_log(static_cast<double>(row[best]));
          if (next == Vocabulary::kEos) r.finished = true;
          if (r.finished || r.tokens.size() == limits[b]) --active;
        }
        inputs[b].push_back(next);
      }
    }
    for (std::size_t b = 0; b < B; ++b) predictions.push_back(render(results[b], batch.extended[b], vocab, model_id));
  }
  return predictions;
}

template <class Real>
Prediction greedy_decode(const InflectionExample& example, const InflectionModel<Real>& model, std::size_t model_id) {
  return greedy_decode_batch(std::vector<InflectionExample>{example}, model, 1, model_id).front();
}

template <class Real>
Prediction beam_decode(const InflectionExample& example, const InflectionModel<Real>& model, std::size_t width,
                       std::size_t model_id) {
  if (width == 0) throw ConfigError("beam width must be at least 1");
  const auto source = encode_source(example, model.vocab());
  const auto extended = model.make_source_batch(std::span(&source, 1)).extended.front();
  const auto result = beam_search(model_step_function(example, model), width, model.max_decode_length(source));
  return render(result, extended, model.vocab(), model_id);
}

std::string majority_vote(const std::vector<Prediction>& predictions, std::uint64_t seed) {
  if (predictions.empty()) throw DataError("majority vote over no predictions");
  std::vector<std::string> forms;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& p : predictions) {
    if (counts[p.form]++ == 0) forms.push_back(p.form);
  }
  std::size_t top = 0;
  for (const auto& f : forms) top = std::max(top, counts[f]);
  std::vector<std::string> tied;
  for (const auto& f : forms) {
    if (counts[f] == top) tied.push_back(f);
  }
  if (tied.size() == 1) return tied.front();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng)];
}

std::vector<std::string> ensemble_vote(const std::vector<std::vector<Prediction>>& per_model, std::uint64_t seed) {
  if (per_model.empty()) throw DataError("ensemble of no models");
  const std::size_t items = per_model.front().size();
  for (const auto& preds : per_model) {
    if (preds.size() != items) throw DataError("ensemble members predicted different numbers of items");
  }
  const auto base = derive_seed(seed, stream::kVote);
  std::vector<std::string> forms;
  forms.reserve(items);
  for (std::size_t i = 0; i < items; ++i) {
    std::vector<Prediction> votes;
    for (const auto& preds : per_model) votes.push_back(preds[i]);
    forms.push_back(majority_vote(votes, derive_seed(base, i)));
  }
  return forms;
}

template Prediction greedy_decode(const InflectionExample&, const InflectionModel<float>&, std::size_t);
template Prediction greedy_decode(const InflectionExample&, const InflectionModel<double>&, std::size_t);
template std::vector<Prediction> greedy_decode_batch(const std::vector<InflectionExample>&,
                                                     const InflectionModel<float>&, std::size_t, std::size_t);
template std::vector<Prediction> greedy_decode_batch(const std::vector<InflectionExample>&,
                                                     const InflectionModel<double>&, std::size_t, std::size_t);
template Prediction beam_decode(const InflectionExample&, const InflectionModel<float>&, std::size_t, std::size_t);
template Prediction beam_decode(const InflectionExample&, const InflectionModel<double>&, std::size_t, std::size_t);
template StepFunction model_step_function(const InflectionExample&, const InflectionModel<float>&,
                                          const ForwardOptions&);
template StepFunction model_step_function(const InflectionExample&, const InflectionModel<double>&,
                                          const ForwardOptions&);

}  // namespace inflect
