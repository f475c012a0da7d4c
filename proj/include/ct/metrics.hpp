#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ct/text.hpp"

namespace ct {

/// Thrown when a reference is empty or a statistic is requested over nothing.
class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

/// Balanced (beta = 1) LCS F-measure.
double rouge_l_f1(const TokenSeq& candidate, const TokenSeq& reference);

/// Clipped unigram matches over reference length.
double rouge_1_recall(const TokenSeq& candidate, const TokenSeq& reference);

enum class BleuSmoothing { AddOne, None };

struct BleuOptions {
  int max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::AddOne;
};

/// Sentence-level BLEU. With AddOne, every order n >= 2 uses
/// (matches + 1) / (total + 1). Empty candidate scores 0.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, BleuOptions opts = {});

struct MeteorBreakdown {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

/// Exact-match-only METEOR: Fmean = 10PR/(R+9P), penalty 0.5*(chunks/matches)^3.
MeteorBreakdown meteor_lite_breakdown(const TokenSeq& candidate, const TokenSeq& reference);
double meteor_lite(const TokenSeq& candidate, const TokenSeq& reference);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap over resampled means. Deterministic for a given seed.
Interval bootstrap_ci(std::span<const double> scores, double level = 0.95, int resamples = 1000,
                      std::uint64_t seed = 0);

struct InstanceScores {
  std::string instance_id;
  double rouge_l = 0.0;
  double rouge_1_recall = 0.0;
  double bleu = 0.0;
  double meteor = 0.0;
  /// Repetition ratio of the candidate; unset for empty candidates.
  std::optional<double> repetition;
};

enum class Metric { RougeL, Rouge1Recall, Bleu, Meteor };
inline constexpr Metric kAllMetrics[] = {Metric::RougeL, Metric::Rouge1Recall, Metric::Bleu, Metric::Meteor};
const char* metric_name(Metric m);

struct MetricReport {
  std::string system;
  std::vector<InstanceScores> per_instance;
  double mean[4] = {0, 0, 0, 0};
  Interval ci_95[4];

  double corpus_mean(Metric m) const { return mean[static_cast<int>(m)]; }
  Interval ci(Metric m) const { return ci_95[static_cast<int>(m)]; }
};

struct ScoredPair {
  std::string instance_id;
  TokenSeq candidate;
  TokenSeq reference;
};

/// Scores every pair (OpenMP over instances, results kept in input order).
std::vector<InstanceScores> score_instances(std::span<const ScoredPair> pairs);
/// Single-threaded reference for score_instances.
std::vector<InstanceScores> score_instances_serial(std::span<const ScoredPair> pairs);

/// Aggregates per-instance scores into means and bootstrap intervals.
MetricReport summarize(std::string system, std::vector<InstanceScores> scores, std::uint64_t seed,
                       int resamples = 1000);

struct RepetitionSummary {
  std::size_t counted = 0;  // non-empty outputs
  std::size_t below_half = 0;
  double percent_below_half() const {
    return counted == 0 ? 0.0 : 100.0 * static_cast<double>(below_half) / static_cast<double>(counted);
  }
};

RepetitionSummary repetition_summary(std::span<const InstanceScores> scores, double threshold = 0.5);

/// Tab-separated result table: header plus one row per system with
/// ROUGE-L, CI-low, CI-high, BLEU, METEOR-lite as percentages.
std::string format_tsv(std::span<const MetricReport> reports);
/// Same table with aligned columns for reading.
std::string format_aligned(std::span<const MetricReport> reports);

}  // namespace ct
