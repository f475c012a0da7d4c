#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ct/autodiff.hpp"
#include "ct/bpe.hpp"

namespace ct::nn {

/// Conditioning variants:
///   CAG  source = document
///   COG  source = context
///   CIG  source = document SEP context, one encoder
///   CRG  document and context through separate encoders; the context
///        summary is appended to every decoder input
enum class Variant { CAG, COG, CIG, CRG };

const char* variant_name(Variant v);
Variant parse_variant(std::string_view s);

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Seq2SeqConfig {
  Variant variant = Variant::CAG;
  std::size_t vocab_size = 0;
  std::size_t emb_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t max_src_len = 400;
  std::size_t max_tgt_len = 60;
  double init_scale = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const Seq2SeqConfig&) const = default;
};

/// Which encoder produced a representation.
enum class SourceKind { Document, Context, Joint };

/// Encoder output recorded on a tape: one state per source position plus a
/// fixed-size summary (the final layer's last forward and first backward
/// states, projected).
struct EncodedSource {
  std::vector<Var> states;
  Var summary = 0;
  SourceKind which = SourceKind::Document;
};

/// Token ids of one instance's fields. Targets carry no BOS/EOS.
struct Example {
  IdSeq document;
  IdSeq context;
  IdSeq target;
};

/// What the encoder(s) see for a variant.
struct Sources {
  IdSeq primary;                 // attended source
  std::optional<IdSeq> context;  // CRG only
};

/// Builds the variant's source sequences. Empty sides become a lone SEP so
/// every encoder input is non-empty. When `truncate` is set, the document is
/// cut so each source fits max_src_len; otherwise overlong input is left for
/// encode() to reject.
Sources make_sources(const Seq2SeqConfig& cfg, const Example& ex, bool truncate);

struct DecoderState {
  std::vector<Var> layers;
};

struct StepResult {
  Var logits = 0;
  std::vector<double> attention;
  DecoderState state;
};

class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  /// Allocates parameters for `config` and initializes them from its seed.
  explicit Seq2SeqModel(Seq2SeqConfig config);

  const Seq2SeqConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Throws ModelError when ids are empty or longer than max_src_len.
  EncodedSource encode(Tape& tape, std::span<const TokenId> ids, SourceKind which) const;
  DecoderState initial_state(Tape& tape, const EncodedSource& primary) const;
  StepResult decode_step(Tape& tape, TokenId prev, const DecoderState& state, const EncodedSource& primary,
                         const EncodedSource* context) const;

  /// Records the teacher-forced loss sum_t -log p(gold_t) over target+EOS.
  Var loss(Tape& tape, const Sources& src, std::span<const TokenId> target) const;
  /// Evaluates the loss without recording gradients.
  double sequence_nll(const Sources& src, std::span<const TokenId> target) const;
  double sequence_nll(const Example& ex) const;

  /// Mean per-token log-probability of `target` (+EOS).
  double mean_log_prob(const Sources& src, std::span<const TokenId> target) const;

  bool all_finite() const;

  void save(const std::string& path) const;
  static Seq2SeqModel load(const std::string& path);
  /// Loads and checks the stored configuration equals `expected`.
  static Seq2SeqModel load(const std::string& path, const Seq2SeqConfig& expected);

 private:
  struct EncoderLayer {
    GruWeights fwd, bwd;
    const Parameter* proj = nullptr;
    const Parameter* proj_b = nullptr;
  };
  struct Encoder {
    std::vector<EncoderLayer> layers;
  };

  void build();
  void bind();
  void init_weights();
  Encoder bind_encoder(const std::string& prefix) const;
  const Encoder& encoder_for(SourceKind which) const;

  Seq2SeqConfig config_;
  ParameterSet params_;

  // Views into params_, rebuilt by bind().
  const Parameter* embedding_ = nullptr;
  Encoder enc_main_;
  Encoder enc_ctx_;
  std::vector<const Parameter*> bridge_w_, bridge_b_;
  std::vector<GruWeights> dec_;
  const Parameter* attn_ = nullptr;
  const Parameter* combine_w_ = nullptr;
  const Parameter* combine_b_ = nullptr;
  const Parameter* out_w_ = nullptr;
  const Parameter* out_b_ = nullptr;

 public:
  Seq2SeqModel(const Seq2SeqModel& other);
  Seq2SeqModel& operator=(const Seq2SeqModel& other);
  Seq2SeqModel(Seq2SeqModel&&) noexcept;
  Seq2SeqModel& operator=(Seq2SeqModel&&) noexcept;
};

// ---- training ---------------------------------------------------------------

struct TrainOptions {
  double learning_rate = 0.5;
  double clip_norm = 5.0;
  double lr_decay = 0.5;
  /// Decay after this many consecutive non-improving epochs (0 = never).
  std::size_t decay_patience = 2;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  /// Stop as soon as validation perplexity drops below this value (0 = off).
  double target_perplexity = 0.0;
  std::uint64_t seed = 1;
  bool truncate_sources = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // mean per target token
  double valid_perplexity = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_perplexity = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// exp(total NLL / total target tokens incl. EOS).
double perplexity(const Seq2SeqModel& model, std::span<const Example> data, bool truncate_sources = true);

/// Minibatch SGD with gradient-norm clipping; the learning rate decays
/// after every `decay_patience` consecutive non-improving epochs and training
/// stops once more than `patience` such epochs have passed in a row. Leaves the best-validation parameters in
/// `model`.
TrainResult train(Seq2SeqModel& model, std::span<const Example> train_set, std::span<const Example> valid_set,
                  const TrainOptions& opts);

/// One SGD step over a batch; returns the summed NLL. Exposed for tests.
double sgd_step(Seq2SeqModel& model, std::span<const Example* const> batch, double lr, double clip_norm,
                bool truncate_sources);

std::string format_history(std::span<const EpochRecord> history);

// ---- gradient check ---------------------------------------------------------

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_offset = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t sampled = 0;
};

/// Central differences on `samples` randomly chosen scalars against the tape
/// gradient of the sequence NLL.
GradientCheckResult gradient_check(const Seq2SeqModel& model, const Example& ex, std::size_t samples = 200,
                                   double eps = 1e-4, std::uint64_t seed = 7);

// ---- decoding ---------------------------------------------------------------

struct DecodeOptions {
  std::size_t beam_width = 1;  // 1 = greedy
  std::size_t max_len = 0;     // 0 = model's max_tgt_len
};

/// Greedy (width 1) or beam search. Returns target ids without BOS/EOS.
IdSeq generate(const Seq2SeqModel& model, const Sources& src, const DecodeOptions& opts = {});
IdSeq greedy_decode(const Seq2SeqModel& model, const Sources& src, std::size_t max_len = 0);

// ---- checkpoint helpers -----------------------------------------------------

std::string config_to_string(const Seq2SeqConfig& cfg);

}  // namespace ct::nn
