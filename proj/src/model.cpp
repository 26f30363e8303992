#include "inflect/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "inflect/errors.hpp"
#include "inflect/utf8.hpp"

namespace inflect {

using nn::Shape;
using nn::Tensor;
using nn::Var;

void ModelConfig::validate() const {
  if (embedding_dim == 0 || encoder_layers == 0 || decoder_layers == 0 || feed_forward_dim == 0 ||
      attention_heads == 0 || max_length == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (embedding_dim % attention_heads != 0) {
    throw ConfigError("embedding_dim " + std::to_string(embedding_dim) + " is not divisible by " +
                      std::to_string(attention_heads) + " attention heads");
  }
  if (vocab_size <= Vocabulary::kNumSpecials) throw ConfigError("vocabulary size must exceed the special tokens");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

// --- extended vocabulary ------------------------------------------------------------

bool is_copyable_position(const EncodedSequence& source, std::size_t position, const Vocabulary& base) {
  const TokenId id = source.ids.at(position);
  if (base.is_character(id)) return true;
  return id == Vocabulary::kUnk && !source.surface.at(position).starts_with(Vocabulary::kTagPrefix);
}

ExtendedVocabulary build_extended_vocabulary(const EncodedSequence& source, const Vocabulary& base) {
  ExtendedVocabulary ext;
  ext.base_size = base.size();
  ext.copy_targets.assign(source.size(), -1);
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!is_copyable_position(source, i, base)) continue;
    const TokenId id = source.ids[i];
    if (base.is_character(id)) {
      ext.copy_targets[i] = id;
      continue;
    }
    const auto& surface = source.surface[i];
    auto it = std::find(ext.extension.begin(), ext.extension.end(), surface);
    if (it == ext.extension.end()) {
      ext.extension.push_back(surface);
      it = ext.extension.end() - 1;
    }
    ext.copy_targets[i] = static_cast<TokenId>(ext.base_size + static_cast<std::size_t>(it - ext.extension.begin()));
  }
  return ext;
}

TokenId ExtendedVocabulary::lookup(std::string_view character, const Vocabulary& base) const {
  const TokenId id = base.char_id(character);
  if (id != Vocabulary::kUnk) return id;
  const auto it = std::find(extension.begin(), extension.end(), character);
  if (it == extension.end()) return Vocabulary::kUnk;
  return static_cast<TokenId>(base_size + static_cast<std::size_t>(it - extension.begin()));
}

std::string ExtendedVocabulary::render(TokenId id, const Vocabulary& base) const {
  if (id < 0) throw DataError("negative token id");
  if (static_cast<std::size_t>(id) < base_size) return base.token(id);
  return extension.at(static_cast<std::size_t>(id) - base_size);
}

TrainingPair make_training_pair(const InflectionExample& example, const Vocabulary& vocab) {
  return {encode_source(example, vocab), utf8::split_codepoints(example.form)};
}

// --- parameters ---------------------------------------------------------------------

template <class Real>
void ModelParameters<Real>::visit(const Visitor& fn) {
  fn("embedding", embedding);
  auto attention = [&](const std::string& prefix, nn::AttentionParams<Real>& a) {
    fn(prefix + ".wq", a.wq);
    fn(prefix + ".bq", a.bq);
    fn(prefix + ".wk", a.wk);
    fn(prefix + ".bk", a.bk);
    fn(prefix + ".wv", a.wv);
    fn(prefix + ".bv", a.bv);
    fn(prefix + ".wo", a.wo);
    fn(prefix + ".bo", a.bo);
  };
  auto norm = [&](const std::string& prefix, NormParams<Real>& n) {
    fn(prefix + ".gain", n.gain);
    fn(prefix + ".bias", n.bias);
  };
  auto feed_forward = [&](const std::string& prefix, FeedForwardParams<Real>& f) {
    fn(prefix + ".w1", f.w1);
    fn(prefix + ".b1", f.b1);
    fn(prefix + ".w2", f.w2);
    fn(prefix + ".b2", f.b2);
  };
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const auto p = "encoder." + std::to_string(i);
    attention(p + ".self_attention", encoder[i].self_attention);
    norm(p + ".norm1", encoder[i].norm1);
    feed_forward(p + ".feed_forward", encoder[i].feed_forward);
    norm(p + ".norm2", encoder[i].norm2);
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const auto p = "decoder." + std::to_string(i);
    attention(p + ".self_attention", decoder[i].self_attention);
    norm(p + ".norm1", decoder[i].norm1);
    attention(p + ".cross_attention", decoder[i].cross_attention);
    norm(p + ".norm2", decoder[i].norm2);
    feed_forward(p + ".feed_forward", decoder[i].feed_forward);
    norm(p + ".norm3", decoder[i].norm3);
  }
  fn("output.weight", output_weight);
  fn("output.bias", output_bias);
  if (copy_weight.defined()) {
    fn("copy.weight", copy_weight);
    fn("copy.bias", copy_bias);
  }
}

template <class Real>
std::vector<Var<Real>> ModelParameters<Real>::list() {
  std::vector<Var<Real>> out;
  visit([&](const std::string&, Var<Real>& v) { out.push_back(v); });
  return out;
}

template <class Real>
std::vector<std::string> ModelParameters<Real>::names() {
  std::vector<std::string> out;
  visit([&](const std::string& name, Var<Real>&) { out.push_back(name); });
  return out;
}

namespace {

template <class Real>
Var<Real> zeros(Shape shape) {
  return Var<Real>::parameter(Tensor<Real>(std::move(shape)));
}

template <class Real>
nn::AttentionParams<Real> alloc_attention(std::size_t d) {
  return {zeros<Real>({d, d}), zeros<Real>({d}), zeros<Real>({d, d}), zeros<Real>({d}),
          zeros<Real>({d, d}), zeros<Real>({d}), zeros<Real>({d, d}), zeros<Real>({d})};
}

template <class Real>
NormParams<Real> alloc_norm(std::size_t d) {
  return {zeros<Real>({d}), zeros<Real>({d})};
}

template <class Real>
FeedForwardParams<Real> alloc_feed_forward(std::size_t d, std::size_t ff) {
  return {zeros<Real>({d, ff}), zeros<Real>({ff}), zeros<Real>({ff, d}), zeros<Real>({d})};
}

template <class Real>
ModelParameters<Real> allocate_parameters(const ModelConfig& config) {
  const std::size_t d = config.embedding_dim, ff = config.feed_forward_dim;
  ModelParameters<Real> p;
  p.embedding = zeros<Real>({config.vocab_size, d});
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    p.encoder.push_back({alloc_attention<Real>(d), alloc_norm<Real>(d), alloc_feed_forward<Real>(d, ff),
                         alloc_norm<Real>(d)});
  }
  for (std::size_t i = 0; i < config.decoder_layers; ++i) {
    p.decoder.push_back({alloc_attention<Real>(d), alloc_norm<Real>(d), alloc_attention<Real>(d),
                         alloc_norm<Real>(d), alloc_feed_forward<Real>(d, ff), alloc_norm<Real>(d)});
  }
  p.output_weight = zeros<Real>({d, config.vocab_size});
  p.output_bias = zeros<Real>({config.vocab_size});
  if (config.copy_enabled) {
    p.copy_weight = zeros<Real>({3 * d, 1});
    p.copy_bias = zeros<Real>({1});
  }
  return p;
}

}  // namespace

template <class Real>
ModelParameters<Real> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  auto params = allocate_parameters<Real>(config);
  std::mt19937_64 rng(seed);
  params.visit([&](const std::string& name, Var<Real>& v) {
    auto& t = v.mutable_value();
    if (name.ends_with(".gain")) {
      std::fill(t.data.begin(), t.data.end(), Real(1));
    } else if (t.rank() == 2) {
      const double bound = std::sqrt(6.0 / static_cast<double>(t.shape[0] + t.shape[1]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& x : t.data) x = static_cast<Real>(dist(rng));
    }
  });
  return params;
}

// --- model -----------------------------------------------------------------------------

template <class Real>
InflectionModel<Real>::InflectionModel(ModelConfig config, Vocabulary vocab, std::uint64_t seed)
    : InflectionModel(config, vocab, init_parameters<Real>([&] {
                        if (config.vocab_size == 0) config.vocab_size = vocab.size();
                        return config;
                      }(),
                                                           seed)) {}

template <class Real>
InflectionModel<Real>::InflectionModel(ModelConfig config, Vocabulary vocab, ModelParameters<Real> params)
    : config_(config), vocab_(std::move(vocab)), params_(std::move(params)) {
  if (config_.vocab_size == 0) config_.vocab_size = vocab_.size();
  config_.validate();
  if (config_.vocab_size != vocab_.size()) {
    throw ConfigError("config vocab_size " + std::to_string(config_.vocab_size) + " does not match vocabulary of " +
                      std::to_string(vocab_.size()));
  }
  const std::size_t d = config_.embedding_dim;
  positions_ = Tensor<Real>({config_.max_length, d});
  for (std::size_t pos = 0; pos < config_.max_length; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      positions_[pos * d + i] = static_cast<Real>(std::sin(angle));
      if (i + 1 < d) positions_[pos * d + i + 1] = static_cast<Real>(std::cos(angle));
    }
  }
  output_mask_.resize(vocab_.size());
  for (std::size_t id = 0; id < vocab_.size(); ++id) output_mask_[id] = vocab_.is_output_token(static_cast<TokenId>(id));
}

template <class Real>
SourceBatch InflectionModel<Real>::make_source_batch(std::span<const EncodedSequence> sources) const {
  SourceBatch batch;
  batch.batch = sources.size();
  for (const auto& s : sources) {
    if (s.size() < 3) throw DataError("source sequence needs BOS, at least one symbol and EOS");
    if (s.size() > config_.max_length) {
      throw DataError("source sequence of length " + std::to_string(s.size()) + " exceeds the maximum of " +
                      std::to_string(config_.max_length));
    }
    batch.length = std::max(batch.length, s.size());
  }
  batch.ids.assign(batch.batch * batch.length, Vocabulary::kPad);
  batch.key_valid.assign(batch.batch * batch.length, 0);
  batch.extended_size = vocab_.size();
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const auto& s = sources[b];
    for (std::size_t i = 0; i < s.size(); ++i) {
      batch.ids[b * batch.length + i] = s.ids[i];
      batch.key_valid[b * batch.length + i] = 1;
    }
    batch.extended.push_back(build_extended_vocabulary(s, vocab_));
    if (config_.copy_enabled) batch.extended_size = std::max(batch.extended_size, batch.extended.back().size());
  }
  return batch;
}

template <class Real>
Var<Real> InflectionModel<Real>::embed(const std::vector<TokenId>& ids, std::size_t batch, std::size_t length,
                                       const ForwardOptions& options) const {
  if (length > config_.max_length) {
    throw DataError("sequence of length " + std::to_string(length) + " exceeds the maximum of " +
                    std::to_string(config_.max_length));
  }
  const std::size_t d = config_.embedding_dim;
  auto x = nn::scale(nn::embedding(params_.embedding, ids), std::sqrt(static_cast<double>(d)));
  Tensor<Real> pos({batch, length, d});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(positions_.data.begin(), length * d, pos.data.begin() + static_cast<std::ptrdiff_t>(b * length * d));
  }
  auto summed = nn::add(nn::reshape(x, {batch, length, d}), Var<Real>::constant(std::move(pos)));
  return nn::dropout(summed, options.dropout);
}

namespace {

template <class Real>
Var<Real> feed_forward(const Var<Real>& x, const FeedForwardParams<Real>& p, const nn::DropoutContext* drop) {
  auto hidden = nn::dropout(nn::relu(nn::add_bias(nn::matmul(x, p.w1), p.b1)), drop);
  return nn::add_bias(nn::matmul(hidden, p.w2), p.b2);
}

template <class Real>
Var<Real> add_norm(const Var<Real>& x, const Var<Real>& sublayer, const NormParams<Real>& n) {
  return nn::layer_norm(nn::add(x, sublayer), n.gain, n.bias);
}

}  // namespace

template <class Real>
EncoderOutput<Real> InflectionModel<Real>::encode(const SourceBatch& batch, const ForwardOptions& options) const {
  const std::size_t B = batch.batch, T = batch.length;
  auto x = embed(batch.ids, B, T, options);
  std::vector<std::uint8_t> mask(B * T * T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < T; ++i) {
      std::copy_n(batch.key_valid.begin() + static_cast<std::ptrdiff_t>(b * T), T,
                  mask.begin() + static_cast<std::ptrdiff_t>((b * T + i) * T));
    }
  }
  for (const auto& layer : params_.encoder) {
    auto att = nn::multi_head_attention(x, x, x, mask, config_.attention_heads, layer.self_attention, options.dropout);
    x = add_norm(x, att.output, layer.norm1);
    x = add_norm(x, feed_forward(x, layer.feed_forward, options.dropout), layer.norm2);
  }
  return {x};
}

template <class Real>
DecoderOutput<Real> InflectionModel<Real>::decode(const EncoderOutput<Real>& encoded, const SourceBatch& batch,
                                                  const std::vector<std::vector<TokenId>>& inputs,
                                                  const ForwardOptions& options) const {
  const std::size_t B = batch.batch, Ts = batch.length, V = vocab_.size(), H = config_.attention_heads;
  const std::size_t d = config_.embedding_dim;
  if (inputs.size() != B || B == 0) throw ShapeError("decoder inputs do not match the source batch");
  const std::size_t Ty = inputs.front().size();
  std::vector<TokenId> ids;
  ids.reserve(B * Ty);
  for (const auto& row : inputs) {
    if (row.size() != Ty) throw ShapeError("decoder inputs must share one length");
    if (row.empty() || row.front() != Vocabulary::kBos) throw DataError("decoder prefix must start with BOS");
    for (TokenId id : row) ids.push_back(static_cast<std::size_t>(id) < V ? id : Vocabulary::kUnk);
  }

  auto y = embed(ids, B, Ty, options);
  std::vector<std::uint8_t> causal(B * Ty * Ty, 0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < Ty; ++i) {
      for (std::size_t j = 0; j <= i; ++j) causal[(b * Ty + i) * Ty + j] = 1;
    }
  }
  std::vector<std::uint8_t> cross(B * Ty * Ts);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < Ty; ++i) {
      std::copy_n(batch.key_valid.begin() + static_cast<std::ptrdiff_t>(b * Ts), Ts,
                  cross.begin() + static_cast<std::ptrdiff_t>((b * Ty + i) * Ts));
    }
  }
  Var<Real> last_cross;
  for (const auto& layer : params_.decoder) {
    auto self = nn::multi_head_attention(y, y, y, causal, H, layer.self_attention, options.dropout);
    y = add_norm(y, self.output, layer.norm1);
    auto inter = nn::multi_head_attention(y, encoded.states, encoded.states, cross, H, layer.cross_attention,
                                          options.dropout);
    y = add_norm(y, inter.output, layer.norm2);
    y = add_norm(y, feed_forward(y, layer.feed_forward, options.dropout), layer.norm3);
    last_cross = inter.weights;
  }

  DecoderOutput<Real> out;
  out.states = y;
  auto logits = nn::add_bias(nn::matmul(y, params_.output_weight), params_.output_bias);
  std::vector<std::uint8_t> legal(B * Ty * V);
  for (std::size_t r = 0; r < B * Ty; ++r) {
    std::copy(output_mask_.begin(), output_mask_.end(), legal.begin() + static_cast<std::ptrdiff_t>(r * V));
  }
  out.vocab_probs = nn::softmax(logits, -1, legal);
  out.copy_attention = nn::mean_heads(last_cross, H);
  out.context = nn::bmm(out.copy_attention, encoded.states);

  if (!config_.copy_enabled) {
    out.p_gen = Var<Real>::constant(Tensor<Real>({B, Ty, 1}, std::vector<Real>(B * Ty, Real(1))));
    out.probs = out.vocab_probs;
    return out;
  }

  if (options.forced_p_gen) {
    out.p_gen = Var<Real>::constant(
        Tensor<Real>({B, Ty, 1}, std::vector<Real>(B * Ty, static_cast<Real>(*options.forced_p_gen))));
  } else {
    auto previous = nn::reshape(nn::embedding(params_.embedding, ids), {B, Ty, d});
    auto switch_input = nn::concat_last<Real>({y, out.context, previous});
    out.p_gen = nn::sigmoid(nn::add_bias(nn::matmul(switch_input, params_.copy_weight), params_.copy_bias));
  }

  const std::size_t E = batch.extended_size;
  Tensor<Real> copy_map({B, Ts, E});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& targets = batch.extended[b].copy_targets;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] >= 0) copy_map[(b * Ts + i) * E + static_cast<std::size_t>(targets[i])] = Real(1);
    }
  }
  auto copy_probs = nn::normalize_last(nn::bmm(out.copy_attention, Var<Real>::constant(std::move(copy_map))));
  // A source without characters has nothing to copy: generate only.
  std::vector<Real> can_copy(B * Ty, Real(1));
  bool all_can_copy = true;
  for (std::size_t b = 0; b < B; ++b) {
    const auto& targets = batch.extended[b].copy_targets;
    if (std::none_of(targets.begin(), targets.end(), [](TokenId t) { return t >= 0; })) {
      std::fill_n(can_copy.begin() + static_cast<std::ptrdiff_t>(b * Ty), Ty, Real(0));
      all_can_copy = false;
    }
  }
  if (!all_can_copy) {
    std::vector<Real> forced(B * Ty);
    for (std::size_t i = 0; i < forced.size(); ++i) forced[i] = Real(1) - can_copy[i];
    out.p_gen = nn::add(nn::mul(out.p_gen, Var<Real>::constant(Tensor<Real>({B, Ty, 1}, std::move(can_copy)))),
                        Var<Real>::constant(Tensor<Real>({B, Ty, 1}, std::move(forced))));
  }
  out.probs = nn::add(nn::scale_rows(nn::pad_last(out.vocab_probs, E), out.p_gen),
                      nn::scale_rows(copy_probs, nn::one_minus(out.p_gen)));
  return out;
}

template <class Real>
DecoderStepOutput InflectionModel<Real>::decode_step(const std::vector<TokenId>& prefix,
                                                     const EncoderOutput<Real>& encoded, const SourceBatch& batch,
                                                     const ForwardOptions& options) const {
  if (batch.batch != 1) throw ShapeError("decode_step works on a single source");
  if (prefix.empty() || prefix.front() != Vocabulary::kBos) throw DataError("decoder prefix must start with BOS");
  const auto out = decode(encoded, batch, {prefix}, options);
  const std::size_t t = prefix.size() - 1;
  const std::size_t d = config_.embedding_dim, Ts = batch.length;
  auto row = [&](const Var<Real>& v, std::size_t width) {
    const auto& data = v.value().data;
    return std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(t * width),
                               data.begin() + static_cast<std::ptrdiff_t>((t + 1) * width));
  };
  DecoderStepOutput step;
  step.state = row(out.states, d);
  step.attention = row(out.copy_attention, Ts);
  step.context = row(out.context, d);
  step.p_gen = static_cast<double>(out.p_gen.value()[t]);
  step.vocab_probs = row(out.vocab_probs, vocab_.size());
  step.probs = row(out.probs, out.probs.shape().back());
  step.extended = batch.extended.front();
  if (!config_.copy_enabled) step.extended.extension.clear();
  return step;
}

template <class Real>
nn::Var<Real> InflectionModel<Real>::sequence_loss(std::span<const TrainingPair> pairs, const ForwardOptions& options,
                                                   double label_smoothing) const {
  if (pairs.empty()) throw DataError("empty training batch");
  std::vector<EncodedSequence> sources;
  sources.reserve(pairs.size());
  for (const auto& p : pairs) sources.push_back(p.source);
  const auto batch = make_source_batch(sources);
  const std::size_t B = batch.batch, V = vocab_.size();

  std::vector<std::vector<TokenId>> gold(B);
  std::size_t Ty = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (const auto& ch : pairs[b].target) {
      gold[b].push_back(config_.copy_enabled ? batch.extended[b].lookup(ch, vocab_) : vocab_.char_id(ch));
    }
    gold[b].push_back(Vocabulary::kEos);
    Ty = std::max(Ty, gold[b].size());
  }
  std::vector<std::vector<TokenId>> inputs(B, std::vector<TokenId>(Ty, Vocabulary::kPad));
  std::vector<std::int32_t> targets(B * Ty, 0);
  std::vector<Real> weights(B * Ty, Real(0));
  for (std::size_t b = 0; b < B; ++b) {
    inputs[b][0] = Vocabulary::kBos;
    for (std::size_t t = 0; t < gold[b].size(); ++t) {
      if (t + 1 < gold[b].size()) inputs[b][t + 1] = gold[b][t];
      targets[b * Ty + t] = gold[b][t];
      weights[b * Ty + t] = Real(1);
    }
  }

  const auto encoded = encode(batch, options);
  const auto out = decode(encoded, batch, inputs, options);
  const std::size_t C = out.probs.shape().back();
  std::vector<std::uint8_t> legal;
  if (label_smoothing > 0.0) {
    legal.assign(B * Ty * C, 0);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t limit = config_.copy_enabled ? batch.extended[b].size() : V;
      for (std::size_t t = 0; t < Ty; ++t) {
        for (std::size_t c = 0; c < limit; ++c) legal[(b * Ty + t) * C + c] = c < V ? output_mask_[c] : 1;
      }
    }
  }
  auto probs = nn::reshape(out.probs, {B * Ty, C});
  return nn::nll_loss(probs, targets, weights, label_smoothing, legal);
}

template <class Real>
std::size_t InflectionModel<Real>::max_decode_length(const EncodedSequence& source) const {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (is_copyable_position(source, i, vocab_)) ++chars;
  }
  return std::min(2 * chars + 10, config_.max_length);
}

template struct ModelParameters<float>;
template struct ModelParameters<double>;
template ModelParameters<float> init_parameters(const ModelConfig&, std::uint64_t);
template ModelParameters<double> init_parameters(const ModelConfig&, std::uint64_t);
template class InflectionModel<float>;
template class InflectionModel<double>;

}  // namespace inflect
