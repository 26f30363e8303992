#include "inflect/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "inflect/decoding.hpp"
#include "inflect/errors.hpp"
#include "inflect/random.hpp"
#include "inflect/utf8.hpp"

namespace inflect {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

GroupSummary summarize(const std::vector<double>& values) {
  GroupSummary g;
  g.count = values.size();
  if (!values.empty()) g.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return g;
}

std::string format_mean(const GroupSummary& g) {
  if (!g.mean) return "-";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << *g.mean * 100.0;
  return out.str();
}

ArmResult score_arm(const TrainResult& result, const std::vector<InflectionExample>& dev,
                    const std::set<std::string>& alphabet, const LowResourceOptions& options, std::uint64_t seed) {
  const auto members = select_ensemble(result.checkpoints, options.ensemble_size);
  std::vector<std::vector<Prediction>> per_model;
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto model = restore_model<float>(members[m].model);
    per_model.push_back(greedy_decode_batch(dev, model, options.train.eval_batch_size, m));
  }
  ArmResult arm;
  arm.predictions = ensemble_vote(per_model, seed);
  for (const auto& preds : per_model) {
    for (const auto& p : preds) arm.unk_emitted += p.unk_count;
  }
  std::vector<std::string> gold;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    gold.push_back(dev[i].form);
    if (arm.predictions[i] != gold.back()) continue;
    const auto chars = utf8::split_codepoints(gold.back());
    if (std::any_of(chars.begin(), chars.end(), [&](const auto& c) { return !alphabet.count(c); })) ++arm.oov_correct;
  }
  arm.accuracy = exact_match_accuracy(gold, arm.predictions);
  return arm;
}

}  // namespace

double exact_match_accuracy(const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
  if (gold.size() != predicted.size()) {
    throw DataError("accuracy over " + std::to_string(gold.size()) + " gold and " + std::to_string(predicted.size()) +
                    " predicted forms");
  }
  if (gold.empty()) throw DataError("accuracy over an empty list");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == predicted[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

EvalReport macro_report(const std::vector<LanguageResult>& results, std::size_t threshold) {
  EvalReport report;
  report.languages = results;
  std::vector<double> low, other, all;
  for (const auto& r : results) {
    (r.train_size < threshold ? low : other).push_back(r.accuracy);
    all.push_back(r.accuracy);
  }
  report.low = summarize(low);
  report.other = summarize(other);
  report.all = summarize(all);
  return report;
}

std::string format_report_tsv(const EvalReport& report, std::size_t threshold) {
  std::ostringstream out;
  out.precision(6);
  out << "language\tsize\tgroup\taccuracy\n";
  for (const auto& r : report.languages) {
    out << r.language << '\t' << r.train_size << '\t' << (r.train_size < threshold ? "Low" : "Other") << '\t'
        << r.accuracy << '\n';
  }
  return out.str();
}

std::string format_report_summary(const EvalReport& report) {
  std::ostringstream out;
  out << "Low\t" << format_mean(report.low) << "\t(" << report.low.count << " languages)\n"
      << "Other\t" << format_mean(report.other) << "\t(" << report.other.count << " languages)\n"
      << "All\t" << format_mean(report.all) << "\t(" << report.all.count << " languages)\n";
  return out.str();
}

std::vector<InflectionExample> subsample(const std::vector<InflectionExample>& examples, std::size_t n,
                                         std::uint64_t seed) {
  if (examples.size() < n) {
    throw DataError("insufficient data for subsample: " + std::to_string(examples.size()) + " examples, " +
                    std::to_string(n) + " requested");
  }
  std::vector<std::size_t> index(examples.size());
  std::iota(index.begin(), index.end(), 0);
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, index.size() - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  index.resize(n);
  std::sort(index.begin(), index.end());
  std::vector<InflectionExample> out;
  for (auto i : index) out.push_back(examples[i]);
  return out;
}

std::uint64_t shared_parameter_hash(const ModelConfig& config, std::uint64_t seed) {
  auto params = init_parameters<float>(config, seed);
  std::uint64_t h = kFnvOffset;
  params.visit([&](const std::string& name, nn::Var<float>& v) {
    if (name.starts_with("copy.")) return;
    fnv_bytes(h, name.data(), name.size());
    for (float x : v.value().data) {
      const auto bits = std::bit_cast<std::uint32_t>(x);
      fnv_bytes(h, &bits, sizeof bits);
    }
  });
  return h;
}

LowResourceReport low_resource_experiment(const std::vector<LanguageData>& languages,
                                          const std::vector<std::uint64_t>& seeds, const LowResourceOptions& options) {
  if (languages.empty()) throw ConfigError("the low-resource experiment needs at least one language");
  if (seeds.empty()) throw ConfigError("the low-resource experiment needs at least one seed");
  LowResourceReport report;
  for (const auto& lang : languages) {
    for (const auto seed : seeds) {
      LowResourceCell cell;
      cell.language = lang.language;
      cell.seed = seed;
      const auto sample = subsample(lang.train, options.sample_size, derive_seed(seed, stream::kSubsample));
      const auto chars = character_alphabet(sample);
      const std::set<std::string> alphabet(chars.begin(), chars.end());

      TrainConfig vanilla = options.train, pointer = options.train;
      vanilla.seed = pointer.seed = seed;
      vanilla.copy = false;
      pointer.copy = true;
      auto audit = vanilla;
      audit.copy = true;
      if (!(audit == pointer)) throw std::logic_error("low-resource arms differ beyond the copy flag");

      const TrainOutput out{"", lang.language, options.log};
      const auto data = build_pipeline_data(sample, vanilla);
      const auto vanilla_run = train(data, lang.dev, options.model, vanilla, out);
      const auto pointer_run = train(build_pipeline_data(sample, pointer), lang.dev, options.model, pointer, out);
      if (vanilla_run.vocab.hash() != pointer_run.vocab.hash()) {
        throw std::logic_error("low-resource arms saw different vocabularies");
      }

      ModelConfig shared = options.model;
      shared.vocab_size = vanilla_run.vocab.size();
      shared.copy_enabled = false;
      const auto init_seed = derive_seed(seed, stream::kInit);
      cell.shared_parameter_hash = shared_parameter_hash(shared, init_seed);
      shared.copy_enabled = true;
      if (shared_parameter_hash(shared, init_seed) != cell.shared_parameter_hash) {
        throw std::logic_error("low-resource arms start from different shared parameters");
      }

      cell.vanilla = score_arm(vanilla_run, lang.dev, alphabet, options, seed);
      cell.pointer_generator = score_arm(pointer_run, lang.dev, alphabet, options, seed);
      if (options.log) {
        *options.log << lang.language << " seed " << seed << ": vanilla " << cell.vanilla.accuracy
                     << ", pointer-generator " << cell.pointer_generator.accuracy << '\n';
      }
      report.mean_vanilla += cell.vanilla.accuracy;
      report.mean_pointer_generator += cell.pointer_generator.accuracy;
      report.oov_correct_vanilla += cell.vanilla.oov_correct;
      report.oov_correct_pointer_generator += cell.pointer_generator.oov_correct;
      report.cells.push_back(std::move(cell));
    }
  }
  const auto n = static_cast<double>(report.cells.size());
  report.mean_vanilla /= n;
  report.mean_pointer_generator /= n;
  report.mean_delta = report.mean_pointer_generator - report.mean_vanilla;
  return report;
}

std::string format_low_resource_report(const LowResourceReport& report) {
  std::ostringstream out;
  out.precision(4);
  out << "language\tseed\tTrm\tTrm-PG\tdelta\tTrm_oov_correct\tTrm-PG_oov_correct\n";
  for (const auto& c : report.cells) {
    out << c.language << '\t' << c.seed << '\t' << c.vanilla.accuracy << '\t' << c.pointer_generator.accuracy << '\t'
        << c.pointer_generator.accuracy - c.vanilla.accuracy << '\t' << c.vanilla.oov_correct << '\t'
        << c.pointer_generator.oov_correct << '\n';
  }
  out << "mean\t-\t" << report.mean_vanilla << '\t' << report.mean_pointer_generator << '\t' << report.mean_delta
      << '\t' << report.oov_correct_vanilla << '\t' << report.oov_correct_pointer_generator << '\n';
  return out.str();
}

}  // namespace inflect
