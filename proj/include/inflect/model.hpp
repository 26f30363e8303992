#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inflect/autograd.hpp"
#include "inflect/data_io.hpp"

namespace inflect {

struct ModelConfig {
  std::size_t embedding_dim = 256;
  std::size_t encoder_layers = 4;
  std::size_t decoder_layers = 4;
  std::size_t feed_forward_dim = 1024;
  std::size_t attention_heads = 4;
  bool copy_enabled = true;
  std::size_t vocab_size = 0;
  std::size_t max_length = 128;
  double dropout = 0.1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Base vocabulary plus the source characters it does not contain.
struct ExtendedVocabulary {
  std::size_t base_size = 0;
  std::vector<std::string> extension;
  // Per source position: extended index of the character it can copy, or -1
  // for positions holding BOS/EOS/tags.
  std::vector<TokenId> copy_targets;

  std::size_t size() const noexcept { return base_size + extension.size(); }
  bool is_extension(TokenId id) const noexcept { return id >= static_cast<TokenId>(base_size); }
  // Extended index of a character, falling back to UNK.
  TokenId lookup(std::string_view character, const Vocabulary& base) const;
  // Surface string of an output token; specials render as their names.
  std::string render(TokenId id, const Vocabulary& base) const;
};

// A source position is copyable when it holds a character (known or not).
bool is_copyable_position(const EncodedSequence& source, std::size_t position, const Vocabulary& base);

ExtendedVocabulary build_extended_vocabulary(const EncodedSequence& source, const Vocabulary& base);

struct TrainingPair {
  EncodedSequence source;
  std::vector<std::string> target;  // target characters, EOS implied
};

TrainingPair make_training_pair(const InflectionExample& example, const Vocabulary& vocab);

template <class Real>
struct FeedForwardParams {
  nn::Var<Real> w1, b1, w2, b2;
};

template <class Real>
struct NormParams {
  nn::Var<Real> gain, bias;
};

template <class Real>
struct EncoderLayerParams {
  nn::AttentionParams<Real> self_attention;
  NormParams<Real> norm1;
  FeedForwardParams<Real> feed_forward;
  NormParams<Real> norm2;
};

template <class Real>
struct DecoderLayerParams {
  nn::AttentionParams<Real> self_attention;
  NormParams<Real> norm1;
  nn::AttentionParams<Real> cross_attention;
  NormParams<Real> norm2;
  FeedForwardParams<Real> feed_forward;
  NormParams<Real> norm3;
};

template <class Real>
struct ModelParameters {
  nn::Var<Real> embedding;  // shared by source and target
  std::vector<EncoderLayerParams<Real>> encoder;
  std::vector<DecoderLayerParams<Real>> decoder;
  nn::Var<Real> output_weight, output_bias;  // generation distribution
  nn::Var<Real> copy_weight, copy_bias;      // generation/copy switch; undefined without copy

  using Visitor = std::function<void(const std::string& name, nn::Var<Real>& param)>;
  // Visits every tensor in declaration order (copy switch last).
  void visit(const Visitor& fn);

  std::vector<nn::Var<Real>> list();
  std::vector<std::string> names();
};

// Allocates parameters for `config` and draws them from `seed`: Xavier-uniform
// matrices, zero biases, unit norm gains. Copy-switch tensors are drawn last,
// so models differing only in copy_enabled share all other initial values.
template <class Real>
ModelParameters<Real> init_parameters(const ModelConfig& config, std::uint64_t seed);

struct ForwardOptions {
  const nn::DropoutContext* dropout = nullptr;
  // Test hook: overrides the generation probability of the copy switch.
  std::optional<double> forced_p_gen;
};

// Padded batch of encoded sources.
struct SourceBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t extended_size = 0;  // max extended vocabulary size in the batch
  std::vector<TokenId> ids;       // batch * length, PAD-filled
  std::vector<std::uint8_t> key_valid;
  std::vector<ExtendedVocabulary> extended;
};

template <class Real>
struct EncoderOutput {
  nn::Var<Real> states;  // (B, Ts, D)
};

template <class Real>
struct DecoderOutput {
  nn::Var<Real> states;          // (B, Ty, D), after the final layer norm
  nn::Var<Real> copy_attention;  // (B, Ty, Ts), last-layer inter-attention averaged over heads
  nn::Var<Real> context;         // (B, Ty, D)
  nn::Var<Real> p_gen;           // (B, Ty, 1)
  nn::Var<Real> vocab_probs;     // (B, Ty, V)
  nn::Var<Real> probs;           // (B, Ty, extended_size)
};

struct DecoderStepOutput {
  std::vector<double> state;
  std::vector<double> attention;  // one weight per source position
  std::vector<double> context;
  double p_gen = 1.0;
  std::vector<double> vocab_probs;  // base vocabulary
  std::vector<double> probs;        // extended vocabulary
  ExtendedVocabulary extended;
};

template <class Real>
class InflectionModel {
 public:
  InflectionModel(ModelConfig config, Vocabulary vocab, std::uint64_t seed);
  InflectionModel(ModelConfig config, Vocabulary vocab, ModelParameters<Real> params);

  const ModelConfig& config() const noexcept { return config_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  ModelParameters<Real>& parameters() noexcept { return params_; }
  std::vector<nn::Var<Real>> parameter_list() { return params_.list(); }

  SourceBatch make_source_batch(std::span<const EncodedSequence> sources) const;

  EncoderOutput<Real> encode(const SourceBatch& batch, const ForwardOptions& options = {}) const;

  // `inputs` are decoder inputs in extended-vocabulary indices, each starting
  // with BOS and all of one length.
  DecoderOutput<Real> decode(const EncoderOutput<Real>& encoded, const SourceBatch& batch,
                             const std::vector<std::vector<TokenId>>& inputs,
                             const ForwardOptions& options = {}) const;

  // Output distribution for the next token after `prefix`.
  DecoderStepOutput decode_step(const std::vector<TokenId>& prefix, const EncoderOutput<Real>& encoded,
                                const SourceBatch& batch, const ForwardOptions& options = {}) const;

  // Mean over non-PAD target positions of -log P(gold) under teacher forcing.
  nn::Var<Real> sequence_loss(std::span<const TrainingPair> batch, const ForwardOptions& options = {},
                              double label_smoothing = 0.0) const;

  // Decode-length bound for a source: 2 * lemma length + 10, capped by max_length.
  std::size_t max_decode_length(const EncodedSequence& source) const;

 private:
  nn::Var<Real> embed(const std::vector<TokenId>& ids, std::size_t batch, std::size_t length,
                      const ForwardOptions& options) const;

  ModelConfig config_;
  Vocabulary vocab_;
  ModelParameters<Real> params_;
  nn::Tensor<Real> positions_;  // (max_length, D) sinusoidal table
  std::vector<std::uint8_t> output_mask_;
};

extern template class InflectionModel<float>;
extern template class InflectionModel<double>;

// --- serialization -----------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMetadata {
  std::string phase;
  std::size_t epoch = 0;
  double dev_accuracy = 0.0;
};

struct SerializedModel {
  ModelConfig config;
  Vocabulary vocab;
  CheckpointMetadata metadata;
  std::vector<std::string> names;
  std::vector<nn::Tensor<float>> tensors;
};

// Versioned container: magic, version, key=value header (config, vocabulary
// hash, metadata), vocabulary listing, then named tensors as float32 LE.
std::string serialize_model(const SerializedModel& model);
SerializedModel deserialize_model(std::string_view bytes);

template <class Real>
SerializedModel snapshot(InflectionModel<Real>& model, CheckpointMetadata metadata = {});

// Builds a model from serialized tensors; rejects tensors that do not match
// the architecture implied by the config.
template <class Real>
InflectionModel<Real> restore_model(const SerializedModel& serialized);

void save_model_file(const std::string& path, const SerializedModel& model);
// Rejects files whose vocabulary hash differs from `expected_vocab_hash` when given.
SerializedModel load_model_file(const std::string& path, std::optional<std::uint64_t> expected_vocab_hash = {});

}  // namespace inflect
