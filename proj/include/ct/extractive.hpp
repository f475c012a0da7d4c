#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "ct/seq2seq.hpp"
#include "ct/text.hpp"

namespace ct {

enum class ExtractionMethod { SumBasic, Cisb, ExtractiveModel, Oracle };

const char* method_name(ExtractionMethod m);

struct ExtractionResult {
  std::size_t chosen = 0;  // sentence index into the document
  double score = 0.0;
  ExtractionMethod method = ExtractionMethod::SumBasic;
};

class ExtractionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// p -> p^2. Sum-Basic's discount.
double square_discount(double p);
/// p -> sqrt(p). Available for comparison only: it raises every p < 1.
double sqrt_discount(double p);

struct SumBasicOptions {
  std::size_t rounds = 1;
  UnigramDistribution::DiscountFn discount = square_discount;
};

/// Mean probability of the sentence's tokens (0 for an empty sentence).
double sentence_score(const TokenSeq& sentence, const UnigramDistribution& dist);

/// Discounts each distinct token of `sentence` once.
void discount_sentence(const TokenSeq& sentence, UnigramDistribution& dist, UnigramDistribution::DiscountFn fn);

/// One result per round; a round picks the highest mean-probability sentence
/// still in the pool (lowest index on ties), removes it, and discounts its
/// words. Stops early when the pool is empty.
std::vector<ExtractionResult> sum_basic_select(const SentenceSeq& document, const SumBasicOptions& opts = {});

/// The pooled context+document distribution after discounting once per
/// context sentence.
UnigramDistribution cisb_distribution(const SentenceSeq& document, const SentenceSeq& context,
                                      UnigramDistribution::DiscountFn fn = square_discount);

/// Context-informed Sum-Basic: a single selection under cisb_distribution.
ExtractionResult cisb_select(const SentenceSeq& document, const SentenceSeq& context,
                             UnigramDistribution::DiscountFn fn = square_discount);

/// Indices of the k best document sentences under the CISB distribution,
/// returned in document order. All indices when the document has <= k.
std::vector<std::size_t> cisb_top_k(const SentenceSeq& document, const SentenceSeq& context, std::size_t k = 5);

/// argmax ROUGE-L F1 against the reference, lowest index on ties.
ExtractionResult oracle_select(const SentenceSeq& document, const TokenSeq& reference);

/// Picks the candidate whose ids have the highest mean per-token
/// log-probability under the model given `sources`. Candidates longer than
/// max_tgt_len are skipped; throws if every candidate is skipped.
ExtractionResult likelihood_rank(const nn::Seq2SeqModel& model, const nn::Sources& sources,
                                 std::span<const IdSeq> candidates);

}  // namespace ct
