#include "ct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <unordered_map>

namespace ct {

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  // Two-row DP over b.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(const TokenSeq& candidate, const TokenSeq& reference) {
  if (reference.empty()) throw MetricError("rouge_l_f1: empty reference");
  if (candidate.empty()) return 0.0;
  auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  double r = lcs / static_cast<double>(reference.size());
  double p = lcs / static_cast<double>(candidate.size());
  return 2.0 * p * r / (p + r);
}

namespace {

std::unordered_map<std::string_view, std::size_t> counts(const TokenSeq& s) {
  std::unordered_map<std::string_view, std::size_t> c;
  for (const auto& t : s) ++c[t];
  return c;
}

using Ngram = std::vector<std::string_view>;

std::map<Ngram, std::size_t> ngram_counts(const TokenSeq& s, std::size_t n) {
  std::map<Ngram, std::size_t> c;
  if (s.size() < n) return c;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++c[Ngram(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return c;
}

}  // namespace

double rouge_1_recall(const TokenSeq& candidate, const TokenSeq& reference) {
  if (reference.empty()) throw MetricError("rouge_1_recall: empty reference");
  auto cand = counts(candidate);
  auto ref = counts(reference);
  std::size_t hit = 0;
  for (const auto& [w, c] : ref) {
    auto it = cand.find(w);
    if (it != cand.end()) hit += std::min(c, it->second);
  }
  return static_cast<double>(hit) / static_cast<double>(reference.size());
}

double bleu(const TokenSeq& candidate, const TokenSeq& reference, BleuOptions opts) {
  if (reference.empty()) throw MetricError("bleu: empty reference");
  if (opts.max_n < 1) throw MetricError("bleu: max_n must be positive");
  if (candidate.empty()) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= opts.max_n; ++n) {
    auto cand = ngram_counts(candidate, static_cast<std::size_t>(n));
    auto ref = ngram_counts(reference, static_cast<std::size_t>(n));
    std::size_t total = 0, matched = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = ref.find(g);
      if (it != ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (n >= 2 && opts.smoothing == BleuSmoothing::AddOne) {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    } else {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }
  double geo = std::exp(log_sum / opts.max_n);
  double c = static_cast<double>(candidate.size());
  double r = static_cast<double>(reference.size());
  double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return geo * bp;
}

MeteorBreakdown meteor_lite_breakdown(const TokenSeq& candidate, const TokenSeq& reference) {
  if (reference.empty()) throw MetricError("meteor_lite: empty reference");
  MeteorBreakdown out;
  if (candidate.empty()) return out;

  // Exact-match alignment. Each candidate token prefers the reference slot
  // that continues the current chunk, otherwise the earliest free slot.
  std::unordered_map<std::string_view, std::vector<std::size_t>> positions;
  for (std::size_t j = 0; j < reference.size(); ++j) positions[reference[j]].push_back(j);
  std::vector<bool> used(reference.size(), false);
  std::vector<std::ptrdiff_t> align(candidate.size(), -1);
  std::ptrdiff_t prev_ref = -2;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    auto it = positions.find(candidate[i]);
    if (it == positions.end()) {
      prev_ref = -2;
      continue;
    }
    std::ptrdiff_t pick = -1;
    for (auto j : it->second) {
      if (used[j]) continue;
      if (static_cast<std::ptrdiff_t>(j) == prev_ref + 1) {
        pick = static_cast<std::ptrdiff_t>(j);
        break;
      }
      if (pick < 0) pick = static_cast<std::ptrdiff_t>(j);
    }
    if (pick >= 0) {
      used[static_cast<std::size_t>(pick)] = true;
      align[i] = pick;
    }
    prev_ref = pick < 0 ? -2 : pick;
  }

  std::ptrdiff_t last_i = -2, last_j = -2;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] < 0) continue;
    ++out.matches;
    auto si = static_cast<std::ptrdiff_t>(i);
    if (!(si == last_i + 1 && align[i] == last_j + 1)) ++out.chunks;
    last_i = si;
    last_j = align[i];
  }
  if (out.matches == 0) return out;

  auto m = static_cast<double>(out.matches);
  out.precision = m / static_cast<double>(candidate.size());
  out.recall = m / static_cast<double>(reference.size());
  out.fmean = 10.0 * out.precision * out.recall / (out.recall + 9.0 * out.precision);
  double frag = static_cast<double>(out.chunks) / m;
  out.penalty = 0.5 * frag * frag * frag;
  out.score = out.fmean * (1.0 - out.penalty);
  return out;
}

double meteor_lite(const TokenSeq& candidate, const TokenSeq& reference) {
  return meteor_lite_breakdown(candidate, reference).score;
}

Interval bootstrap_ci(std::span<const double> scores, double level, int resamples, std::uint64_t seed) {
  if (scores.empty()) throw MetricError("bootstrap_ci: no scores");
  if (!(level > 0.0 && level < 1.0)) throw MetricError("bootstrap_ci: level must lie in (0, 1)");
  if (resamples < 1) throw MetricError("bootstrap_ci: resamples must be positive");

  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::uint64_t>(scores.size());
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::uint64_t k = 0; k < n; ++k) {
      // Multiply-shift maps a 64-bit draw onto [0, n).
      auto idx = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
      sum += scores[idx];
    }
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  double alpha = 1.0 - level;
  auto b = static_cast<double>(resamples);
  auto lo = static_cast<std::size_t>(std::floor(alpha / 2.0 * b));
  auto hi_rank = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * b));
  std::size_t hi = hi_rank == 0 ? 0 : hi_rank - 1;
  lo = std::min(lo, means.size() - 1);
  hi = std::clamp(hi, lo, means.size() - 1);
  return {means[lo], means[hi]};
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::RougeL: return "rouge_l_f1";
    case Metric::Rouge1Recall: return "rouge_1_recall";
    case Metric::Bleu: return "bleu";
    case Metric::Meteor: return "meteor_lite";
  }
  return "?";
}

namespace {

InstanceScores score_one(const ScoredPair& p) {
  InstanceScores s;
  s.instance_id = p.instance_id;
  s.rouge_l = rouge_l_f1(p.candidate, p.reference);
  s.rouge_1_recall = rouge_1_recall(p.candidate, p.reference);
  s.bleu = bleu(p.candidate, p.reference);
  s.meteor = meteor_lite(p.candidate, p.reference);
  if (!p.candidate.empty()) s.repetition = repetition_ratio(p.candidate);
  return s;
}

double metric_of(const InstanceScores& s, Metric m) {
  switch (m) {
    case Metric::RougeL: return s.rouge_l;
    case Metric::Rouge1Recall: return s.rouge_1_recall;
    case Metric::Bleu: return s.bleu;
    case Metric::Meteor: return s.meteor;
  }
  return 0.0;
}

}  // namespace

std::vector<InstanceScores> score_instances_serial(std::span<const ScoredPair> pairs) {
  std::vector<InstanceScores> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(score_one(p));
  return out;
}

std::vector<InstanceScores> score_instances(std::span<const ScoredPair> pairs) {
  std::vector<InstanceScores> out(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
  // Exceptions may not cross the parallel region.
  std::vector<std::string> errors(pairs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = score_one(pairs[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw MetricError(pairs[i].instance_id + ": " + errors[i]);
  }
  return out;
}

MetricReport summarize(std::string system, std::vector<InstanceScores> scores, std::uint64_t seed,
                       int resamples) {
  if (scores.empty()) throw MetricError("summarize: no instances for system " + system);
  MetricReport report;
  report.system = std::move(system);
  report.per_instance = std::move(scores);
  std::vector<double> column(report.per_instance.size());
  for (auto m : kAllMetrics) {
    double sum = 0.0;
    for (std::size_t i = 0; i < column.size(); ++i) {
      column[i] = metric_of(report.per_instance[i], m);
      sum += column[i];
    }
    auto k = static_cast<int>(m);
    report.mean[k] = sum / static_cast<double>(column.size());
    report.ci_95[k] = bootstrap_ci(column, 0.95, resamples, seed + static_cast<std::uint64_t>(k));
  }
  return report;
}

RepetitionSummary repetition_summary(std::span<const InstanceScores> scores, double threshold) {
  RepetitionSummary s;
  for (const auto& sc : scores) {
    if (!sc.repetition) continue;
    ++s.counted;
    if (*sc.repetition < threshold) ++s.below_half;
  }
  return s;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::vector<std::vector<std::string>> table_rows(std::span<const MetricReport> reports) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"system", "ROUGE-L", "CI-low", "CI-high", "BLEU", "METEOR-lite"});
  for (const auto& r : reports) {
    auto ci = r.ci(Metric::RougeL);
    rows.push_back({r.system, pct(r.corpus_mean(Metric::RougeL)), pct(ci.low), pct(ci.high),
                    pct(r.corpus_mean(Metric::Bleu)), pct(r.corpus_mean(Metric::Meteor))});
  }
  return rows;
}

}  // namespace

std::string format_tsv(std::span<const MetricReport> reports) {
  std::string out;
  for (const auto& row : table_rows(reports)) {
    out += join(row, "\t");
    out += '\n';
  }
  return out;
}

std::string format_aligned(std::span<const MetricReport> reports) {
  auto rows = table_rows(reports);
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        out += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        out += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace ct
