#include "ct/extractive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "ct/metrics.hpp"

namespace ct {

const char* method_name(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::SumBasic: return "SB";
    case ExtractionMethod::Cisb: return "CISB";
    case ExtractionMethod::ExtractiveModel: return "EXTRACTIVE_MODEL";
    case ExtractionMethod::Oracle: return "ORACLE";
  }
  return "?";
}

double square_discount(double p) { return p * p; }
double sqrt_discount(double p) { return std::sqrt(p); }

double sentence_score(const TokenSeq& sentence, const UnigramDistribution& dist) {
  if (sentence.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : sentence) sum += dist.prob(t);
  return sum / static_cast<double>(sentence.size());
}

void discount_sentence(const TokenSeq& sentence, UnigramDistribution& dist, UnigramDistribution::DiscountFn fn) {
  std::set<std::string> seen(sentence.begin(), sentence.end());
  for (const auto& w : seen) dist.discount(w, fn);
}

namespace {

// Highest score among `pool`, first index on ties (pool is ascending).
std::pair<std::size_t, double> best_in(const SentenceSeq& doc, std::span<const std::size_t> pool,
                                       const UnigramDistribution& dist) {
  std::size_t best = pool.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (auto i : pool) {
    double s = sentence_score(doc.sentences[i], dist);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return {best, best_score};
}

}  // namespace

std::vector<ExtractionResult> sum_basic_select(const SentenceSeq& document, const SumBasicOptions& opts) {
  if (document.empty()) throw ExtractionError("sum_basic_select: empty document");
  auto dist = unigram_distribution(document);
  std::vector<std::size_t> pool(document.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<ExtractionResult> out;
  for (std::size_t round = 0; round < opts.rounds && !pool.empty(); ++round) {
    auto [chosen, score] = best_in(document, pool, dist);
    out.push_back({chosen, score, ExtractionMethod::SumBasic});
    pool.erase(std::find(pool.begin(), pool.end(), chosen));
    discount_sentence(document.sentences[chosen], dist, opts.discount);
  }
  return out;
}

UnigramDistribution cisb_distribution(const SentenceSeq& document, const SentenceSeq& context,
                                      UnigramDistribution::DiscountFn fn) {
  std::vector<TokenSeq> pooled = context.sentences;
  pooled.insert(pooled.end(), document.sentences.begin(), document.sentences.end());
  auto dist = unigram_distribution(std::span<const TokenSeq>(pooled));
  for (const auto& s : context.sentences) discount_sentence(s, dist, fn);
  return dist;
}

ExtractionResult cisb_select(const SentenceSeq& document, const SentenceSeq& context,
                             UnigramDistribution::DiscountFn fn) {
  if (document.empty()) throw ExtractionError("cisb_select: empty document");
  auto dist = cisb_distribution(document, context, fn);
  std::vector<std::size_t> pool(document.size());
  std::iota(pool.begin(), pool.end(), 0);
  auto [chosen, score] = best_in(document, pool, dist);
  return {chosen, score, ExtractionMethod::Cisb};
}

std::vector<std::size_t> cisb_top_k(const SentenceSeq& document, const SentenceSeq& context, std::size_t k) {
  std::vector<std::size_t> idx(document.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (document.size() <= k) return idx;
  auto dist = cisb_distribution(document, context);
  std::vector<double> score(document.size());
  for (std::size_t i = 0; i < document.size(); ++i) score[i] = sentence_score(document.sentences[i], dist);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ExtractionResult oracle_select(const SentenceSeq& document, const TokenSeq& reference) {
  if (document.empty()) throw ExtractionError("oracle_select: empty document");
  if (reference.empty()) throw ExtractionError("oracle_select: empty reference");
  ExtractionResult best{0, -1.0, ExtractionMethod::Oracle};
  for (std::size_t i = 0; i < document.size(); ++i) {
    double s = rouge_l_f1(document.sentences[i], reference);
    if (s > best.score) best = {i, s, ExtractionMethod::Oracle};
  }
  return best;
}

ExtractionResult likelihood_rank(const nn::Seq2SeqModel& model, const nn::Sources& sources,
                                 std::span<const IdSeq> candidates) {
  if (candidates.empty()) throw ExtractionError("likelihood_rank: empty document");
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> scores(candidates.size(), nan);
  const auto max_len = model.config().max_tgt_len;
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  std::vector<std::string> errors(candidates.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& c = candidates[k];
    if (c.empty() || c.size() > max_len) continue;
    try {
      scores[k] = model.mean_log_prob(sources, c);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw ExtractionError("likelihood_rank: " + e);
  }
  ExtractionResult best{0, -std::numeric_limits<double>::infinity(), ExtractionMethod::ExtractiveModel};
  bool any = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    if (!any || scores[i] > best.score) best = {i, scores[i], ExtractionMethod::ExtractiveModel};
    any = true;
  }
  if (!any) throw ExtractionError("likelihood_rank: every sentence exceeds the model's max_tgt_len");
  return best;
}

}  // namespace ct
