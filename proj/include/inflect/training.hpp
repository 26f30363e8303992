#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inflect/data_io.hpp"
#include "inflect/model.hpp"

namespace inflect {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t pretrain_epochs = 10;
  std::size_t max_epochs = 50;  // finetune phase
  double learning_rate = 1e-3;
  std::size_t warmup_steps = 400;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  // Pipeline components. `copy` overrides ModelConfig::copy_enabled.
  bool copy = true;
  bool multitask = true;
  bool hallucinate = true;
  std::size_t hallucination_size = 10000;
  std::size_t low_resource_threshold = 1000;
  double label_smoothing = 0.1;
  double clip_norm = 1.0;  // <= 0 disables
  std::size_t keep_checkpoints = 5;
  std::size_t eval_batch_size = 64;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Component rows of the ablation matrix, numbered 1..5: (copy, multitask,
// hallucination) = 111, 101, 011, 001, 110. Row 1 is the full system.
std::optional<int> ablation_row(const TrainConfig& config);
TrainConfig with_ablation_row(TrainConfig config, int row);

struct PipelineData {
  std::optional<std::vector<InflectionExample>> pretrain;
  std::vector<InflectionExample> finetune;
};

// Multitask conversion when enabled; a hallucinated pretraining set when
// enabled and the original set is below the low-resource threshold.
PipelineData build_pipeline_data(const std::vector<InflectionExample>& train, const TrainConfig& config);

inline constexpr const char* kPretrainPhase = "pretrain";
inline constexpr const char* kFinetunePhase = "finetune";

struct Checkpoint {
  SerializedModel model;  // metadata carries phase, epoch, dev accuracy
  const std::string& phase() const { return model.metadata.phase; }
  std::size_t epoch() const { return model.metadata.epoch; }
  double dev_accuracy() const { return model.metadata.dev_accuracy; }
};

struct EpochRecord {
  std::string phase;
  std::size_t epoch = 0;  // counted across both phases, from 1
  std::size_t examples = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;  // retained, best first
  std::vector<EpochRecord> history;
  Vocabulary vocab;
};

struct TrainOutput {
  std::string checkpoint_dir;  // empty: keep checkpoints in memory only
  std::string language = "model";
  std::ostream* log = nullptr;
};

// Pretrains (if a pretraining set is given) for a fixed number of epochs, then
// finetunes with early stopping on greedy dev exact match. Only the
// `keep_checkpoints` best checkpoints are retained.
TrainResult train(const PipelineData& data, const std::vector<InflectionExample>& dev, ModelConfig model_config,
                  const TrainConfig& config, const TrainOutput& output = {});

// Highest dev accuracy first, later epoch on ties, distinct epochs.
std::vector<Checkpoint> select_ensemble(const std::vector<Checkpoint>& checkpoints, std::size_t k);

std::string checkpoint_file_name(const std::string& language, const std::string& phase, std::size_t epoch);

// Plain key=value run manifest.
std::string format_manifest(const ModelConfig& model_config, const TrainConfig& config, const TrainResult& result,
                            const std::vector<std::pair<std::string, std::string>>& extra = {});

}  // namespace inflect
