#include "inflect/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "inflect/augmentation.hpp"
#include "inflect/decoding.hpp"
#include "inflect/errors.hpp"
#include "inflect/evaluation.hpp"
#include "inflect/optimizer.hpp"
#include "inflect/random.hpp"

namespace inflect {
namespace {

struct Row {
  bool copy, multitask, hallucinate;
};

constexpr Row kAblationRows[] = {
    {true, true, true}, {true, false, true}, {false, true, true}, {false, false, true}, {true, true, false},
};

std::vector<TrainingPair> make_pairs(const std::vector<InflectionExample>& examples, const Vocabulary& vocab) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(examples.size());
  for (const auto& e : examples) pairs.push_back(make_training_pair(e, vocab));
  return pairs;
}

bool ranks_before(const Checkpoint& a, const Checkpoint& b) {
  if (a.dev_accuracy() != b.dev_accuracy()) return a.dev_accuracy() > b.dev_accuracy();
  return a.epoch() > b.epoch();
}

double dev_accuracy(const InflectionModel<float>& model, const std::vector<InflectionExample>& dev,
                    std::size_t batch_size) {
  const auto predictions = greedy_decode_batch(dev, model, batch_size);
  std::vector<std::string> gold, predicted;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    gold.push_back(dev[i].form);
    predicted.push_back(predictions[i].form);
  }
  return exact_match_accuracy(gold, predicted);
}

class Trainer {
 public:
  Trainer(InflectionModel<float>& model, const TrainConfig& config, const std::vector<InflectionExample>& dev,
          const TrainOutput& output, TrainResult& result)
      : model_(model),
        config_(config),
        dev_(dev),
        output_(output),
        result_(result),
        params_(model.parameter_list()),
        shuffle_rng_(derive_seed(config.seed, stream::kShuffle)),
        dropout_rng_(derive_seed(config.seed, stream::kDropout)) {}

  // Runs up to `max_epochs`; with `patience` set, stops once that many epochs
  // pass without a new best dev accuracy.
  void run_phase(const std::string& phase, const std::vector<InflectionExample>& examples, std::size_t max_epochs,
                 std::optional<std::size_t> patience) {
    auto state = nn::make_optimizer_state(params_);
    const nn::LearningRateSchedule schedule{config_.learning_rate, config_.warmup_steps};
    const auto pairs = make_pairs(examples, model_.vocab());
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    double best = -1.0;
    std::size_t since_best = 0;
    for (std::size_t e = 0; e < max_epochs; ++e) {
      const std::size_t epoch = ++epoch_;
      std::shuffle(order.begin(), order.end(), shuffle_rng_);
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        std::vector<TrainingPair> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
        loss_sum += step(state, schedule, batch, phase, epoch, batches);
        ++batches;
      }
      EpochRecord record{phase, epoch, examples.size(), batches ? loss_sum / static_cast<double>(batches) : 0.0,
                         dev_accuracy(model_, dev_, config_.eval_batch_size)};
      result_.history.push_back(record);
      if (output_.log) {
        *output_.log << output_.language << ' ' << phase << " epoch " << epoch << " loss " << record.train_loss
                     << " dev " << record.dev_accuracy << '\n';
      }
      keep(Checkpoint{snapshot(model_, CheckpointMetadata{phase, epoch, record.dev_accuracy})});
      if (record.dev_accuracy > best) {
        best = record.dev_accuracy;
        since_best = 0;
      } else if (patience && ++since_best >= *patience) {
        if (output_.log) *output_.log << output_.language << " early stop after epoch " << epoch << '\n';
        break;
      }
    }
  }

 private:
  double step(nn::OptimizerState<float>& state, const nn::LearningRateSchedule& schedule,
              const std::vector<TrainingPair>& batch, const std::string& phase, std::size_t epoch,
              std::size_t index) {
    nn::Graph<float> graph;
    const nn::DropoutContext dropout{model_.config().dropout, &dropout_rng_};
    ForwardOptions options;
    options.dropout = &dropout;
    try {
      const auto loss = model_.sequence_loss(batch, options, config_.label_smoothing);
      auto grads = nn::gradients(graph, loss, params_);
      nn::clip_grad_norm(grads, config_.clip_norm);
      for (const auto& g : grads) {
        if (!g.all_finite()) throw NumericError("non-finite gradient");
      }
      nn::adam_step(state, params_, grads, schedule.at(state.step + 1));
      for (auto& p : params_) p.zero_grad();
      return static_cast<double>(loss.value().data[0]);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (" + phase + " epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(index) + ")");
    }
  }

  void keep(Checkpoint checkpoint) {
    auto& kept = result_.checkpoints;
    const auto pos = std::upper_bound(kept.begin(), kept.end(), checkpoint, ranks_before);
    const std::string file = output_.checkpoint_dir.empty()
                                 ? std::string()
                                 : (std::filesystem::path(output_.checkpoint_dir) /
                                    checkpoint_file_name(output_.language, checkpoint.phase(), checkpoint.epoch()))
                                       .string();
    if (static_cast<std::size_t>(pos - kept.begin()) >= config_.keep_checkpoints) return;
    if (!file.empty()) save_model_file(file, checkpoint.model);
    kept.insert(pos, std::move(checkpoint));
    if (kept.size() > config_.keep_checkpoints) {
      const auto& evicted = kept.back();
      if (!output_.checkpoint_dir.empty()) {
        std::filesystem::remove(std::filesystem::path(output_.checkpoint_dir) /
                                checkpoint_file_name(output_.language, evicted.phase(), evicted.epoch()));
      }
      kept.pop_back();
    }
  }

  InflectionModel<float>& model_;
  const TrainConfig& config_;
  const std::vector<InflectionExample>& dev_;
  const TrainOutput& output_;
  TrainResult& result_;
  std::vector<nn::Var<float>> params_;
  std::mt19937_64 shuffle_rng_;
  std::mt19937_64 dropout_rng_;
  std::size_t epoch_ = 0;
};

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (max_epochs == 0) throw ConfigError("max epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (hallucination_size == 0) throw ConfigError("hallucination size must be positive");
  if (low_resource_threshold == 0) throw ConfigError("low-resource threshold must be positive");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw ConfigError("label smoothing must be in [0, 1)");
  if (keep_checkpoints == 0) throw ConfigError("at least one checkpoint must be kept");
  if (eval_batch_size == 0) throw ConfigError("eval batch size must be positive");
}

std::optional<int> ablation_row(const TrainConfig& config) {
  for (int i = 0; i < 5; ++i) {
    const auto& r = kAblationRows[i];
    if (r.copy == config.copy && r.multitask == config.multitask && r.hallucinate == config.hallucinate) return i + 1;
  }
  return std::nullopt;
}

TrainConfig with_ablation_row(TrainConfig config, int row) {
  if (row < 1 || row > 5) throw ConfigError("ablation row must be between 1 and 5, got " + std::to_string(row));
  const auto& r = kAblationRows[row - 1];
  config.copy = r.copy;
  config.multitask = r.multitask;
  config.hallucinate = r.hallucinate;
  return config;
}

PipelineData build_pipeline_data(const std::vector<InflectionExample>& train, const TrainConfig& config) {
  PipelineData data;
  data.finetune = config.multitask ? to_reinflection(group_by_lemma(train)) : train;
  if (config.hallucinate && train.size() < config.low_resource_threshold) {
    data.pretrain = hallucinate(train, config.hallucination_size, character_alphabet(train),
                                derive_seed(config.seed, stream::kHallucination));
  }
  return data;
}

TrainResult train(const PipelineData& data, const std::vector<InflectionExample>& dev, ModelConfig model_config,
                  const TrainConfig& config, const TrainOutput& output) {
  config.validate();
  if (dev.empty()) throw DataError("the dev set is empty; it is needed to score checkpoints");
  if (data.finetune.empty()) throw DataError("the training set is empty");
  std::vector<InflectionExample> all = data.finetune;
  if (data.pretrain) all.insert(all.end(), data.pretrain->begin(), data.pretrain->end());

  TrainResult result;
  result.vocab = build_vocabulary(all);
  model_config.copy_enabled = config.copy;
  model_config.vocab_size = result.vocab.size();
  InflectionModel<float> model(model_config, result.vocab, derive_seed(config.seed, stream::kInit));
  if (!output.checkpoint_dir.empty()) std::filesystem::create_directories(output.checkpoint_dir);

  Trainer trainer(model, config, dev, output, result);
  if (data.pretrain && config.pretrain_epochs > 0) {
    trainer.run_phase(kPretrainPhase, *data.pretrain, config.pretrain_epochs, std::nullopt);
  }
  trainer.run_phase(kFinetunePhase, data.finetune, config.max_epochs, config.patience);
  return result;
}

std::vector<Checkpoint> select_ensemble(const std::vector<Checkpoint>& checkpoints, std::size_t k) {
  if (k == 0) throw ConfigError("ensemble size must be positive");
  std::vector<Checkpoint> ranked = checkpoints;
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
  std::vector<Checkpoint> chosen;
  for (auto& c : ranked) {
    if (chosen.size() == k) break;
    const bool seen = std::any_of(chosen.begin(), chosen.end(), [&](const auto& o) { return o.epoch() == c.epoch(); });
    if (!seen) chosen.push_back(std::move(c));
  }
  if (chosen.size() < k) {
    throw ConfigError("ensemble of " + std::to_string(k) + " needs as many checkpoints from distinct epochs, found " +
                      std::to_string(chosen.size()));
  }
  return chosen;
}

std::string checkpoint_file_name(const std::string& language, const std::string& phase, std::size_t epoch) {
  return language + "." + phase + ".e" + std::to_string(epoch) + ".ckpt";
}

std::string format_manifest(const ModelConfig& m, const TrainConfig& t, const TrainResult& result,
                            const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream out;
  out.precision(17);
  out << "seed=" << t.seed << '\n'
      << "model.embedding_dim=" << m.embedding_dim << '\n'
      << "model.encoder_layers=" << m.encoder_layers << '\n'
      << "model.decoder_layers=" << m.decoder_layers << '\n'
      << "model.feed_forward_dim=" << m.feed_forward_dim << '\n'
      << "model.attention_heads=" << m.attention_heads << '\n'
      << "model.max_length=" << m.max_length << '\n'
      << "model.dropout=" << m.dropout << '\n'
      << "train.batch_size=" << t.batch_size << '\n'
      << "train.pretrain_epochs=" << t.pretrain_epochs << '\n'
      << "train.max_epochs=" << t.max_epochs << '\n'
      << "train.learning_rate=" << t.learning_rate << '\n'
      << "train.warmup_steps=" << t.warmup_steps << '\n'
      << "train.patience=" << t.patience << '\n'
      << "train.copy=" << t.copy << '\n'
      << "train.multitask=" << t.multitask << '\n'
      << "train.hallucinate=" << t.hallucinate << '\n'
      << "train.hallucination_size=" << t.hallucination_size << '\n'
      << "train.low_resource_threshold=" << t.low_resource_threshold << '\n'
      << "train.label_smoothing=" << t.label_smoothing << '\n'
      << "train.clip_norm=" << t.clip_norm << '\n'
      << "train.keep_checkpoints=" << t.keep_checkpoints << '\n'
      << "vocab.size=" << result.vocab.size() << '\n'
      << "vocab.hash=" << std::hex << result.vocab.hash() << std::dec << '\n';
  for (const auto& [key, value] : extra) out << key << '=' << value << '\n';
  for (const auto& r : result.history) {
    out << "epoch." << r.epoch << '=' << r.phase << ' ' << r.examples << ' ' << r.train_loss << ' ' << r.dev_accuracy
        << '\n';
  }
  for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
    const auto& c = result.checkpoints[i];
    out << "kept." << i + 1 << '=' << c.phase() << ' ' << c.epoch() << ' ' << c.dev_accuracy() << '\n';
  }
  return out.str();
}

}  // namespace inflect
