#include "inflect/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include "inflect/augmentation.hpp"
#include "inflect/decoding.hpp"
#include "inflect/errors.hpp"
#include "inflect/evaluation.hpp"
#include "inflect/random.hpp"
#include "inflect/training.hpp"

namespace inflect::cli {
namespace fs = std::filesystem;
namespace {

struct Options {
  ModelConfig model;
  TrainConfig train;
  int ablation = 0;
  std::string language;

  std::string train_path, dev_path, output;
  std::vector<std::string> checkpoints;
  std::string input;
  bool beam = false;
  std::size_t beam_width = 4;
  std::size_t batch_size = 64;

  std::string gold, predicted, train_sizes;
  std::string split = "dev";

  std::size_t hallucination_size = kDefaultHallucinationSize;

  std::vector<std::string> train_paths, dev_paths;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t sample_size = kLowResourceSampleSize;
  std::size_t ensemble = 1;
};

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << v;
  return out.str();
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex(h);
}

using Manifest = std::vector<std::pair<std::string, std::string>>;

void add_input(Manifest& m, const std::string& key, const std::string& path) {
  m.emplace_back(key, path);
  m.emplace_back(key + ".fnv1a", content_hash(read_file(path)));
}

std::string format_manifest_lines(const Manifest& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + "=" + v + "\n";
  return out;
}

std::string command_line(int argc, const char* const* argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) out += (i ? " " : "") + std::string(argv[i]);
  return out;
}

void add_model_options(CLI::App* app, ModelConfig& m) {
  app->add_option("--embedding-dim", m.embedding_dim, "Model width")->capture_default_str();
  app->add_option("--encoder-layers", m.encoder_layers)->capture_default_str();
  app->add_option("--decoder-layers", m.decoder_layers)->capture_default_str();
  app->add_option("--ff-dim", m.feed_forward_dim, "Feed-forward hidden size")->capture_default_str();
  app->add_option("--heads", m.attention_heads)->capture_default_str();
  app->add_option("--dropout", m.dropout)->capture_default_str();
  app->add_option("--max-length", m.max_length, "Longest source or target in tokens")->capture_default_str();
}

void add_train_options(CLI::App* app, Options& o) {
  auto& t = o.train;
  app->add_option("--batch-size", t.batch_size)->capture_default_str();
  app->add_option("--epochs", t.max_epochs, "Maximum finetuning epochs")->capture_default_str();
  app->add_option("--pretrain-epochs", t.pretrain_epochs)->capture_default_str();
  app->add_option("--lr", t.learning_rate, "Peak learning rate")->capture_default_str();
  app->add_option("--warmup", t.warmup_steps)->capture_default_str();
  app->add_option("--patience", t.patience, "Early-stop patience in epochs")->capture_default_str();
  app->add_option("--seed", t.seed)->capture_default_str();
  app->add_flag("--copy,!--no-copy", t.copy, "Pointer-generator copy head");
  app->add_flag("--multitask,!--no-multitask", t.multitask, "Multitask reinflection data");
  app->add_flag("--hallucinate,!--no-hallucinate", t.hallucinate, "Hallucination pretraining below the threshold");
  app->add_option("--ablation-row", o.ablation, "Set the three component flags from ablation row 1-5")
      ->check(CLI::Range(1, 5));
  app->add_option("--hallucination-size", t.hallucination_size)->capture_default_str();
  app->add_option("--threshold", t.low_resource_threshold, "Low-resource train size threshold")
      ->capture_default_str();
  app->add_option("--label-smoothing", t.label_smoothing)->capture_default_str();
  app->add_option("--clip-norm", t.clip_norm)->capture_default_str();
  app->add_option("--keep", t.keep_checkpoints, "Checkpoints retained per run")->capture_default_str();
}

void apply_ablation(Options& o, std::ostream& err) {
  if (o.ablation) o.train = with_ablation_row(o.train, o.ablation);
  if (!ablation_row(o.train)) {
    err << "note: copy=" << o.train.copy << " multitask=" << o.train.multitask
        << " hallucinate=" << o.train.hallucinate << " is not one of the ablation rows\n";
  }
  o.model.copy_enabled = o.train.copy;
  auto shape_only = o.model;  // vocabulary size is known only after reading data
  if (shape_only.vocab_size == 0) shape_only.vocab_size = Vocabulary::kNumSpecials + 1;
  shape_only.validate();
  o.train.validate();
}

void cmd_train(Options& o, const std::string& command, std::ostream& err) {
  apply_ablation(o, err);
  // Everything is read and validated before any output exists.
  const auto train_set = read_train_file(o.train_path);
  const auto dev_set = read_train_file(o.dev_path);
  const auto lang = o.language.empty() ? language_from_path(o.train_path) : o.language;
  const auto data = build_pipeline_data(train_set, o.train);
  err << lang << ": " << train_set.size() << " train, " << data.finetune.size() << " finetune"
      << (data.pretrain ? ", " + std::to_string(data.pretrain->size()) + " pretrain" : std::string()) << '\n';

  const auto result = train(data, dev_set, o.model, o.train, TrainOutput{o.output, lang, &err});
  Manifest extra{{"command", command}, {"language", lang}};
  add_input(extra, "input.train", o.train_path);
  add_input(extra, "input.dev", o.dev_path);
  if (auto row = ablation_row(o.train)) extra.emplace_back("ablation_row", std::to_string(*row));
  for (const auto& c : result.checkpoints) {
    extra.emplace_back("checkpoint", checkpoint_file_name(lang, c.phase(), c.epoch()));
  }
  write_file((fs::path(o.output) / (lang + ".manifest")).string(), format_manifest(o.model, o.train, result, extra));
  err << lang << ": best dev accuracy " << result.checkpoints.front().dev_accuracy() << '\n';
}

void cmd_predict(Options& o, const std::string& command, std::ostream& err) {
  if (o.beam && o.beam_width == 0) throw ConfigError("beam width must be at least 1");
  const auto items = read_test_file(o.input);
  std::vector<InflectionModel<float>> models;
  std::optional<std::uint64_t> hash;
  for (const auto& path : o.checkpoints) {
    auto serialized = load_model_file(path, hash);
    hash = serialized.vocab.hash();
    models.push_back(restore_model<float>(serialized));
  }
  std::vector<std::vector<Prediction>> per_model;
  std::size_t unk = 0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::vector<Prediction> preds;
    if (o.beam) {
      for (const auto& item : items) preds.push_back(beam_decode(item, models[m], o.beam_width, m));
    } else {
      preds = greedy_decode_batch(items, models[m], o.batch_size, m);
    }
    for (const auto& p : preds) unk += p.unk_count;
    per_model.push_back(std::move(preds));
    err << "decoded " << items.size() << " items with " << o.checkpoints[m] << '\n';
  }
  const auto forms = ensemble_vote(per_model, o.train.seed);
  if (unk) err << "warning: " << unk << " unknown-token outputs rendered as " << kUnkReplacement << '\n';

  std::vector<PredictedItem> out;
  for (std::size_t i = 0; i < items.size(); ++i) out.emplace_back(items[i], forms[i]);
  write_file(o.output, write_predictions(out));
  Manifest m{{"command", command}, {"seed", std::to_string(o.train.seed)},
             {"decoder", o.beam ? "beam " + std::to_string(o.beam_width) : "greedy"}};
  add_input(m, "input.test", o.input);
  for (const auto& path : o.checkpoints) add_input(m, "checkpoint", path);
  write_file(o.output + ".manifest", format_manifest_lines(m));
}

using Keyed = std::map<std::pair<std::string, std::string>, std::vector<std::string>>;

Keyed by_key(const std::vector<InflectionExample>& examples) {
  Keyed keyed;
  for (const auto& e : examples) keyed[{e.lemma, join_tags(e.tags)}].push_back(e.form);
  return keyed;
}

double score_language(const std::string& gold_path, const std::string& pred_path) {
  const auto gold = by_key(read_train_file(gold_path));
  auto predicted = by_key(read_train_file(pred_path));
  std::vector<std::string> unmatched, g, p;
  for (const auto& [key, forms] : gold) {
    auto it = predicted.find(key);
    if (it == predicted.end() || it->second.size() < forms.size()) {
      unmatched.push_back(key.first + "\t" + key.second);
      continue;
    }
    for (std::size_t i = 0; i < forms.size(); ++i) {
      g.push_back(forms[i]);
      p.push_back(it->second[i]);
    }
    it->second.erase(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(forms.size()));
    if (it->second.empty()) predicted.erase(it);
  }
  for (const auto& [key, forms] : predicted) unmatched.push_back(key.first + "\t" + key.second + " (extra)");
  if (!unmatched.empty()) {
    std::string msg = pred_path + ": " + std::to_string(unmatched.size()) + " keys do not match " + gold_path + ":";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, unmatched.size()); ++i) msg += "\n  " + unmatched[i];
    throw DataError(msg);
  }
  return exact_match_accuracy(g, p);
}

void cmd_evaluate(Options& o, const std::string& command, std::ostream& err) {
  std::vector<std::pair<std::string, std::string>> pairs;  // gold, predicted
  if (fs::is_directory(o.gold)) {
    for (const auto& entry : fs::directory_iterator(o.gold)) {
      if (entry.path().extension() == "." + o.split) {
        pairs.emplace_back(entry.path().string(), (fs::path(o.predicted) / entry.path().filename()).string());
      }
    }
    std::sort(pairs.begin(), pairs.end());
    if (pairs.empty()) throw DataError("no *." + o.split + " files in " + o.gold);
  } else {
    pairs.emplace_back(o.gold, o.predicted);
  }
  std::vector<LanguageResult> results;
  Manifest m{{"command", command}};
  for (const auto& [gold, pred] : pairs) {
    LanguageResult r;
    r.language = o.language.empty() || pairs.size() > 1 ? language_from_path(gold) : o.language;
    const auto train_path = fs::is_directory(o.train_sizes)
                                ? (fs::path(o.train_sizes) / (r.language + ".trn")).string()
                                : o.train_sizes;
    r.train_size = read_train_file(train_path).size();
    r.accuracy = score_language(gold, pred);
    err << r.language << ": " << r.accuracy << '\n';
    const auto suffix = pairs.size() > 1 ? "." + r.language : std::string();
    add_input(m, "input.gold" + suffix, gold);
    add_input(m, "input.predicted" + suffix, pred);
    add_input(m, "input.train" + suffix, train_path);
    results.push_back(r);
  }
  const auto report = macro_report(results, o.train.low_resource_threshold);
  write_file(o.output + ".tsv", format_report_tsv(report, o.train.low_resource_threshold));
  write_file(o.output + ".summary.txt", format_report_summary(report));
  write_file(o.output + ".manifest", format_manifest_lines(m));
  err << format_report_summary(report);
}

void cmd_augment(const std::string& kind, Options& o, const std::string& command, std::ostream& err) {
  const auto examples = read_train_file(o.input);
  std::vector<InflectionExample> out;
  if (kind == "multitask") {
    out = to_reinflection(group_by_lemma(examples));
  } else {
    out = hallucinate(examples, o.hallucination_size, character_alphabet(examples),
                      derive_seed(o.train.seed, stream::kHallucination));
  }
  write_file(o.output, write_examples(out));
  Manifest m{{"command", command}, {"seed", std::to_string(o.train.seed)}};
  add_input(m, "input", o.input);
  write_file(o.output + ".manifest", format_manifest_lines(m));
  err << kind << ": " << examples.size() << " -> " << out.size() << " examples\n";
}

void cmd_lowres(Options& o, const std::string& command, std::ostream& err) {
  apply_ablation(o, err);
  if (o.train_paths.size() != o.dev_paths.size()) throw ConfigError("give one --dev file per --train file");
  std::vector<LanguageData> languages;
  Manifest m{{"command", command}};
  for (std::size_t i = 0; i < o.train_paths.size(); ++i) {
    languages.push_back({language_from_path(o.train_paths[i]), read_train_file(o.train_paths[i]),
                         read_train_file(o.dev_paths[i])});
    add_input(m, "input.train." + languages.back().language, o.train_paths[i]);
    add_input(m, "input.dev." + languages.back().language, o.dev_paths[i]);
  }
  LowResourceOptions options;
  options.model = o.model;
  options.train = o.train;
  options.sample_size = o.sample_size;
  options.ensemble_size = o.ensemble;
  options.log = &err;
  const auto report = low_resource_experiment(languages, o.seeds, options);
  write_file(o.output, format_low_resource_report(report));
  std::string seeds;
  for (auto s : o.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  m.emplace_back("seeds", seeds);
  write_file(o.output + ".manifest", format_manifest_lines(m) + format_manifest(o.model, o.train, {}, {}));
  err << format_low_resource_report(report);
}

}  // namespace

std::string language_from_path(const std::string& path) {
  auto name = fs::path(path).filename().string();
  const auto dot = name.find('.');
  return dot == std::string::npos || dot == 0 ? name : name.substr(0, dot);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Character-level morphological inflection with a pointer-generator transformer", "inflect"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoints plus a run manifest");
  train_cmd->add_option("--train", o.train_path, "Training file {lang}.trn")->required();
  train_cmd->add_option("--dev", o.dev_path, "Dev file used to score checkpoints")->required();
  train_cmd->add_option("--output", o.output, "Checkpoint directory")->required();
  train_cmd->add_option("--lang", o.language, "Language name (default: from the train file name)");
  add_model_options(train_cmd, o.model);
  add_train_options(train_cmd, o);

  auto* predict_cmd = app.add_subcommand("predict", "Decode a test file with one checkpoint or a voting ensemble");
  predict_cmd->add_option("--checkpoint", o.checkpoints, "One or more checkpoint files")->required();
  predict_cmd->add_option("--input", o.input, "Test file (lemma, tags) or covered file")->required();
  predict_cmd->add_option("--output", o.output, "Prediction file")->required();
  predict_cmd->add_option("--seed", o.train.seed, "Seed for breaking vote ties")->capture_default_str();
  predict_cmd->add_flag("--beam", o.beam, "Beam search instead of greedy decoding");
  predict_cmd->add_option("--beam-width", o.beam_width)->capture_default_str();
  predict_cmd->add_option("--batch-size", o.batch_size, "Greedy decoding batch size")->capture_default_str();

  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold forms");
  eval_cmd->add_option("--gold", o.gold, "Gold file, or a directory of {lang}.<split> files")->required();
  eval_cmd->add_option("--pred", o.predicted, "Prediction file, or a directory with matching names")->required();
  eval_cmd->add_option("--train", o.train_sizes, "Train file, or directory of {lang}.trn, for group sizes")
      ->required();
  eval_cmd->add_option("--split", o.split, "Gold file extension in directory mode")->capture_default_str();
  eval_cmd->add_option("--output", o.output, "Report path prefix")->required();
  eval_cmd->add_option("--lang", o.language, "Language name for single-file mode");
  eval_cmd->add_option("--threshold", o.train.low_resource_threshold)->capture_default_str();

  auto* augment_cmd = app.add_subcommand("augment", "Write augmented training data");
  augment_cmd->require_subcommand(1);
  std::vector<std::pair<std::string, CLI::App*>> augment_kinds;
  for (const char* kind : {"multitask", "hallucinate"}) {
    auto* sub = augment_cmd->add_subcommand(kind, std::string(kind) == "multitask"
                                                       ? "Reinflection pairs between all forms of each lemma"
                                                       : "Pseudo-examples with replaced stems");
    sub->add_option("--input", o.input)->required();
    sub->add_option("--output", o.output)->required();
    if (std::string(kind) == "hallucinate") {
      sub->add_option("--n,--size", o.hallucination_size, "Number of pseudo-examples")->capture_default_str();
      sub->add_option("--seed", o.train.seed)->capture_default_str();
    }
    augment_kinds.emplace_back(kind, sub);
  }

  auto* lowres_cmd = app.add_subcommand("lowres-exp", "Compare copy-enabled and copy-disabled models on subsamples");
  lowres_cmd->add_option("--train", o.train_paths, "Train files {lang}.trn")->required();
  lowres_cmd->add_option("--dev", o.dev_paths, "Dev files, in the same order")->required();
  lowres_cmd->add_option("--seeds", o.seeds)->delimiter(',')->capture_default_str();
  lowres_cmd->add_option("--sample-size", o.sample_size)->capture_default_str();
  lowres_cmd->add_option("--ensemble", o.ensemble, "Checkpoints voting per arm")->capture_default_str();
  lowres_cmd->add_option("--output", o.output, "Result table (TSV)")->required();
  add_model_options(lowres_cmd, o.model);
  add_train_options(lowres_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsage;
  }

  const auto command = command_line(argc, argv);
  try {
    if (*train_cmd) {
      cmd_train(o, command, err);
    } else if (*predict_cmd) {
      cmd_predict(o, command, err);
    } else if (*eval_cmd) {
      cmd_evaluate(o, command, err);
    } else if (*augment_cmd) {
      for (const auto& [kind, sub] : augment_kinds) {
        if (*sub) cmd_augment(kind, o, command, err);
      }
    } else if (*lowres_cmd) {
      cmd_lowres(o, command, err);
    }
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataFailure;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataFailure;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  }
  return kSuccess;
}

}  // namespace inflect::cli
