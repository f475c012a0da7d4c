#include <algorithm>
#include <cmath>

#include "ct/seq2seq.hpp"

namespace ct::nn {

namespace {

struct Encoded {
  EncodedSource primary;
  std::optional<EncodedSource> context;
};

Encoded encode_sources(const Seq2SeqModel& model, Tape& tape, const Sources& src) {
  const auto v = model.config().variant;
  Encoded e;
  e.primary = model.encode(tape, src.primary,
                           v == Variant::CIG   ? SourceKind::Joint
                           : v == Variant::COG ? SourceKind::Context
                                               : SourceKind::Document);
  if (v == Variant::CRG) {
    if (!src.context) throw ModelError("CRG needs a context source");
    e.context = model.encode(tape, *src.context, SourceKind::Context);
  }
  return e;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

struct Hypothesis {
  IdSeq tokens;
  double log_prob = 0.0;
  DecoderState state;
  TokenId last = Specials::kBos;
};

// Length counts the EOS (or the forced stop) so finished and capped
// hypotheses compare on the same scale.
double normalized(double log_prob, std::size_t length) { return log_prob / static_cast<double>(std::max<std::size_t>(length, 1)); }

}  // namespace

IdSeq greedy_decode(const Seq2SeqModel& model, const Sources& src, std::size_t max_len) {
  if (max_len == 0) max_len = model.config().max_tgt_len;
  Tape tape(false);
  auto enc = encode_sources(model, tape, src);
  auto state = model.initial_state(tape, enc.primary);
  IdSeq out;
  TokenId prev = Specials::kBos;
  while (out.size() < max_len) {
    auto step = model.decode_step(tape, prev, state, enc.primary, enc.context ? &*enc.context : nullptr);
    const auto& logits = tape.value(step.logits);
    // max_element returns the first maximum, i.e. the lowest id on ties.
    auto best = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == Specials::kEos) break;
    out.push_back(best);
    prev = best;
    state = std::move(step.state);
  }
  return out;
}

IdSeq generate(const Seq2SeqModel& model, const Sources& src, const DecodeOptions& opts) {
  const std::size_t max_len = opts.max_len == 0 ? model.config().max_tgt_len : opts.max_len;
  if (opts.beam_width <= 1) return greedy_decode(model, src, max_len);

  const std::size_t width = opts.beam_width;
  Tape tape(false);
  auto enc = encode_sources(model, tape, src);
  std::vector<Hypothesis> alive(1);
  alive[0].state = model.initial_state(tape, enc.primary);

  struct Finished {
    IdSeq tokens;
    double score;
  };
  std::vector<Finished> finished;

  struct Candidate {
    std::size_t parent;
    TokenId token;
    double log_prob;
    double score;
  };

  while (!alive.empty() && finished.size() < width) {
    std::vector<Candidate> cands;
    std::vector<StepResult> steps;
    steps.reserve(alive.size());
    for (std::size_t h = 0; h < alive.size(); ++h) {
      auto step = model.decode_step(tape, alive[h].last, alive[h].state, enc.primary,
                                    enc.context ? &*enc.context : nullptr);
      auto lp = log_softmax(tape.value(step.logits));
      std::vector<TokenId> ids(lp.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i);
      const std::size_t k = std::min(width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                        [&](TokenId a, TokenId b) { return lp[a] > lp[b] || (lp[a] == lp[b] && a < b); });
      const std::size_t len = alive[h].tokens.size() + 1;
      for (std::size_t i = 0; i < k; ++i) {
        double total = alive[h].log_prob + lp[ids[i]];
        cands.push_back({h, ids[i], total, normalized(total, len)});
      }
      steps.push_back(std::move(step));
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });

    std::vector<Hypothesis> next;
    for (const auto& c : cands) {
      if (next.size() + finished.size() >= width) break;
      const auto& parent = alive[c.parent];
      if (c.token == Specials::kEos) {
        finished.push_back({parent.tokens, c.score});
        continue;
      }
      Hypothesis h;
      h.tokens = parent.tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.state = steps[c.parent].state;
      h.last = c.token;
      if (h.tokens.size() >= max_len) {
        finished.push_back({std::move(h.tokens), c.score});
        continue;
      }
      next.push_back(std::move(h));
    }
    alive = std::move(next);
  }

  if (finished.empty()) return {};
  auto best = std::max_element(finished.begin(), finished.end(),
                               [](const Finished& a, const Finished& b) { return a.score < b.score; });
  return best->tokens;
}

}  // namespace ct::nn
