#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ct/dataset.hpp"
#include "ct/metrics.hpp"
#include "ct/seq2seq.hpp"
#include "ct/systems.hpp"

namespace ct {

/// Bad configuration or arguments, detected before any output is written.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Seed for one named component, stable across runs and platforms.
std::uint64_t derive_seed(std::uint64_t root, std::string_view component);

struct ExperimentConfig {
  std::string corpus;
  std::string output_dir = "out";
  std::string bpe_path;  // default <output_dir>/bpe.txt
  std::size_t bpe_vocab_size = 8000;
  std::vector<System> systems{std::begin(kAllSystems), std::end(kAllSystems)};
  nn::Seq2SeqConfig model;
  nn::TrainOptions train;
  nn::DecodeOptions decode;
  std::size_t hybrid_k = 5;
  std::size_t limit = 0;  // 0 = whole test split
  int bootstrap_resamples = 1000;
  std::uint64_t seed = 1;

  /// Unknown keys are rejected. Missing keys keep their defaults.
  static ExperimentConfig from_json(std::string_view text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;

  std::string bpe_file() const;
  std::string checkpoint_file(nn::Variant v) const;
  std::string history_file(nn::Variant v) const;
  std::string outputs_dir() const;

  /// Field ranges only; paths are checked by each command.
  void validate() const;
};

struct BuildDatasetArgs {
  std::string wikitext_dir;
  std::string manifest;
  std::string whitelist;
  std::string out_dir;
  BuildOptions options;
};

/// Writes corpus.jsonl, stats.json and diagnostics.txt into out_dir.
BuildResult cmd_build_dataset(const BuildDatasetArgs& args, std::ostream& log);

/// Trains the shared BPE on the train split and saves it to bpe_file().
BpeModel cmd_train_bpe(const ExperimentConfig& cfg, std::ostream& log);

/// Trains one variant (training the BPE first when its file is missing);
/// writes the checkpoint and the epoch history.
nn::TrainResult cmd_train(const ExperimentConfig& cfg, nn::Variant variant, std::ostream& log);

/// One file per system under outputs_dir(), one line per test instance.
void cmd_run_systems(const ExperimentConfig& cfg, std::ostream& log);

struct EvaluationResult {
  std::vector<MetricReport> reports;
  std::vector<RepetitionSummary> repetition;  // parallel to reports
  RepetitionSummary reference_repetition;
  std::string tsv;
  std::string table;
};

/// Scores every <system>.txt under outputs_dir against the first lines' worth
/// of test instances. Writes the TSV to out_path and the aligned table plus
/// the repetition analysis to out_path + ".txt".
EvaluationResult cmd_evaluate(const std::string& outputs_dir, const std::string& corpus_path, const std::string& out_path,
                              std::uint64_t seed, int resamples, std::ostream& log);

/// Statistics of a corpus file as JSON.
std::string cmd_stats(const std::string& corpus_path);

std::vector<Instance> test_instances(std::span<const Instance> corpus, std::size_t limit);

}  // namespace ct
