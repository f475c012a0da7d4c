#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "ct/seq2seq.hpp"

namespace ct::nn {

namespace {

// Uniform index in [0, n) from one 64-bit draw.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[draw_index(rng, i)]);
}

}  // namespace

double perplexity(const Seq2SeqModel& model, std::span<const Example> data, bool truncate_sources) {
  if (data.empty()) throw TrainingError("perplexity: empty data set");
  std::vector<double> nll(data.size());
  const auto n = static_cast<std::ptrdiff_t>(data.size());
  const auto& cfg = model.config();
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& ex = data[static_cast<std::size_t>(i)];
    nll[static_cast<std::size_t>(i)] = model.sequence_nll(make_sources(cfg, ex, truncate_sources), ex.target);
  }
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += nll[i];
    tokens += data[i].target.size() + 1;
  }
  return std::exp(total / static_cast<double>(tokens));
}

double sgd_step(Seq2SeqModel& model, std::span<const Example* const> batch, double lr, double clip_norm,
                bool truncate_sources) {
  if (batch.empty()) return 0.0;
  Gradients grads(model.params());
  double total = 0.0;
  for (const auto* ex : batch) {
    Tape tape;
    Var l = model.loss(tape, make_sources(model.config(), *ex, truncate_sources), ex->target);
    double v = tape.scalar(l);
    if (!std::isfinite(v)) throw TrainingError("non-finite loss; training diverged");
    total += v;
    tape.backward(l, grads);
  }
  grads.scale(1.0 / static_cast<double>(batch.size()));
  double norm = grads.norm();
  if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm; training diverged");
  double step = lr;
  if (clip_norm > 0.0 && norm > clip_norm) step *= clip_norm / norm;
  auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = params[i].value;
    const auto& g = grads[i];
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= step * g[j];
  }
  return total;
}

TrainResult train(Seq2SeqModel& model, std::span<const Example> train_set, std::span<const Example> valid_set,
                  const TrainOptions& opts) {
  if (train_set.empty()) throw TrainingError("train: empty training set");
  if (valid_set.empty()) throw TrainingError("train: empty validation set");
  if (opts.batch_size == 0) throw TrainingError("train: batch_size must be positive");
  for (const auto& ex : train_set) {
    if (ex.target.size() > model.config().max_tgt_len) {
      throw TrainingError("train: a target exceeds max_tgt_len; filter the corpus first");
    }
  }

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t train_tokens = 0;
  for (const auto& ex : train_set) train_tokens += ex.target.size() + 1;

  TrainResult result;
  result.best_perplexity = std::numeric_limits<double>::infinity();
  Seq2SeqModel best = model;
  double lr = opts.learning_rate;
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_nll = 0.0;
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + opts.batch_size); ++k) {
        batch.push_back(&train_set[order[k]]);
      }
      epoch_nll += sgd_step(model, batch, lr, opts.clip_norm, opts.truncate_sources);
    }
    if (!model.all_finite()) throw TrainingError("parameters became non-finite in epoch " + std::to_string(epoch));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_nll = epoch_nll / static_cast<double>(train_tokens);
    rec.valid_perplexity = perplexity(model, valid_set, opts.truncate_sources);
    rec.learning_rate = lr;
    if (!std::isfinite(rec.valid_perplexity)) {
      throw TrainingError("validation perplexity became non-finite in epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);

    if (rec.valid_perplexity < result.best_perplexity) {
      result.best_perplexity = rec.valid_perplexity;
      result.best_epoch = epoch;
      best = model;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (opts.decay_patience > 0 && bad_epochs % opts.decay_patience == 0) lr *= opts.lr_decay;
      if (bad_epochs > opts.patience) break;
    }
    if (opts.target_perplexity > 0.0 && result.best_perplexity < opts.target_perplexity) break;
  }
  model = std::move(best);
  return result;
}

std::string format_history(std::span<const EpochRecord> history) {
  std::string out = "epoch\ttrain_nll\tvalid_ppl\tlr\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6g\n", r.epoch, r.train_nll, r.valid_perplexity,
                  r.learning_rate);
    out += buf;
  }
  return out;
}

GradientCheckResult gradient_check(const Seq2SeqModel& model, const Example& ex, std::size_t samples, double eps,
                                   std::uint64_t seed) {
  const auto src = make_sources(model.config(), ex, false);
  Seq2SeqModel probe = model;
  Gradients grads(probe.params());
  {
    Tape tape;
    Var l = probe.loss(tape, src, ex.target);
    tape.backward(l, grads);
  }

  // Map a flat index onto (parameter, offset).
  auto& params = probe.params();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : params) {
    offsets.push_back(total);
    total += p.size();
  }
  std::mt19937_64 rng(seed);
  GradientCheckResult res;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t flat = draw_index(rng, total);
    auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    std::size_t pi = static_cast<std::size_t>(it - offsets.begin()) - 1;
    std::size_t off = flat - offsets[pi];
    double& w = params[pi].value[off];
    const double saved = w;
    w = saved + eps;
    double plus = probe.sequence_nll(src, ex.target);
    w = saved - eps;
    double minus = probe.sequence_nll(src, ex.target);
    w = saved;
    double numeric = (plus - minus) / (2.0 * eps);
    double analytic = grads[pi][off];
    double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
    ++res.sampled;
    if (rel >= res.max_relative_error) {
      res.max_relative_error = rel;
      res.worst_parameter = params[pi].name;
      res.worst_offset = off;
      res.analytic = analytic;
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace ct::nn
