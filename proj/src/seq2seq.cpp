#include "ct/seq2seq.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace ct::nn {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::CAG: return "CAG";
    case Variant::COG: return "COG";
    case Variant::CIG: return "CIG";
    case Variant::CRG: return "CRG";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  std::string up(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "CAG") return Variant::CAG;
  if (up == "COG") return Variant::COG;
  if (up == "CIG") return Variant::CIG;
  if (up == "CRG") return Variant::CRG;
  throw ModelError("unknown variant '" + std::string(s) + "' (expected cag, cog, cig or crg)");
}

void Seq2SeqConfig::validate() const {
  if (vocab_size <= Specials::kCount) throw ModelError("config: vocab_size must exceed the special symbols");
  if (emb_dim == 0 || hidden_dim == 0) throw ModelError("config: dimensions must be positive");
  if (enc_layers == 0 || dec_layers == 0) throw ModelError("config: layer counts must be positive");
  if (max_src_len == 0 || max_tgt_len == 0) throw ModelError("config: length limits must be positive");
  if (!(init_scale >= 0.0)) throw ModelError("config: init_scale must be non-negative");
}

std::string config_to_string(const Seq2SeqConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "variant " << variant_name(c.variant) << '\n'
     << "vocab_size " << c.vocab_size << '\n'
     << "emb_dim " << c.emb_dim << '\n'
     << "hidden_dim " << c.hidden_dim << '\n'
     << "enc_layers " << c.enc_layers << '\n'
     << "dec_layers " << c.dec_layers << '\n'
     << "max_src_len " << c.max_src_len << '\n'
     << "max_tgt_len " << c.max_tgt_len << '\n'
     << "init_scale " << c.init_scale << '\n'
     << "seed " << c.seed << '\n';
  return os.str();
}

Sources make_sources(const Seq2SeqConfig& cfg, const Example& ex, bool truncate) {
  auto nonempty = [](IdSeq ids) {
    if (ids.empty()) ids.push_back(Specials::kSep);
    return ids;
  };
  auto cut = [&](IdSeq ids, std::size_t limit) {
    if (truncate && ids.size() > limit) ids.resize(limit);
    return ids;
  };
  const std::size_t lim = cfg.max_src_len;
  Sources s;
  switch (cfg.variant) {
    case Variant::CAG:
      s.primary = nonempty(cut(ex.document, lim));
      break;
    case Variant::COG:
      s.primary = nonempty(cut(ex.context, lim));
      break;
    case Variant::CIG: {
      IdSeq ctx = ex.context;
      IdSeq doc = ex.document;
      if (truncate) {
        if (ctx.size() + 1 > lim) ctx.resize(lim > 1 ? lim - 1 : 0);
        std::size_t room = lim - ctx.size() - 1;
        if (doc.size() > room) doc.resize(room);
      }
      doc.push_back(Specials::kSep);
      doc.insert(doc.end(), ctx.begin(), ctx.end());
      s.primary = std::move(doc);
      break;
    }
    case Variant::CRG:
      s.primary = nonempty(cut(ex.document, lim));
      s.context = nonempty(cut(ex.context, lim));
      break;
  }
  return s;
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqConfig config) : config_(config) {
  config_.validate();
  build();
  bind();
  init_weights();
}

Seq2SeqModel::Seq2SeqModel(const Seq2SeqModel& other) : config_(other.config_), params_(other.params_) { bind(); }

Seq2SeqModel& Seq2SeqModel::operator=(const Seq2SeqModel& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    bind();
  }
  return *this;
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqModel&& other) noexcept
    : config_(other.config_), params_(std::move(other.params_)) {
  if (params_.size() > 0) bind();
}

Seq2SeqModel& Seq2SeqModel::operator=(Seq2SeqModel&& other) noexcept {
  config_ = other.config_;
  params_ = std::move(other.params_);
  if (params_.size() > 0) bind();
  return *this;
}

namespace {

void add_gru(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t h) {
  ps.add(prefix + ".W", 3 * h, in);
  ps.add(prefix + ".U", 3 * h, h);
  ps.add(prefix + ".bW", 3 * h, 1);
  ps.add(prefix + ".bU", 3 * h, 1);
}

GruWeights gru_view(const ParameterSet& ps, const std::string& prefix) {
  GruWeights g;
  g.w = ps.find(prefix + ".W");
  g.u = ps.find(prefix + ".U");
  g.bw = ps.find(prefix + ".bW");
  g.bu = ps.find(prefix + ".bU");
  if (!g.w || !g.u || !g.bw || !g.bu) throw ModelError("missing GRU parameters under " + prefix);
  return g;
}

std::vector<std::string> encoder_prefixes(Variant v) {
  if (v == Variant::CRG) return {"enc_doc", "enc_ctx"};
  return {"enc"};
}

}  // namespace

void Seq2SeqModel::build() {
  const auto E = config_.emb_dim, H = config_.hidden_dim, V = config_.vocab_size;
  params_.add("embedding", V, E);
  for (const auto& enc : encoder_prefixes(config_.variant)) {
    for (std::size_t l = 0; l < config_.enc_layers; ++l) {
      std::string p = enc + ".l" + std::to_string(l);
      std::size_t in = l == 0 ? E : H;
      add_gru(params_, p + ".fwd", in, H);
      add_gru(params_, p + ".bwd", in, H);
      params_.add(p + ".proj.W", H, 2 * H);
      params_.add(p + ".proj.b", H, 1);
    }
  }
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    params_.add("bridge.l" + std::to_string(l) + ".W", H, H);
    params_.add("bridge.l" + std::to_string(l) + ".b", H, 1);
  }
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    std::size_t in = l == 0 ? (config_.variant == Variant::CRG ? E + H : E) : H;
    add_gru(params_, "dec.l" + std::to_string(l), in, H);
  }
  params_.add("attn.W", H, H);
  params_.add("combine.W", H, 2 * H);
  params_.add("combine.b", H, 1);
  params_.add("out.W", V, H);
  params_.add("out.b", V, 1);
}

Seq2SeqModel::Encoder Seq2SeqModel::bind_encoder(const std::string& prefix) const {
  Encoder e;
  for (std::size_t l = 0; l < config_.enc_layers; ++l) {
    std::string p = prefix + ".l" + std::to_string(l);
    EncoderLayer layer;
    layer.fwd = gru_view(params_, p + ".fwd");
    layer.bwd = gru_view(params_, p + ".bwd");
    layer.proj = params_.find(p + ".proj.W");
    layer.proj_b = params_.find(p + ".proj.b");
    e.layers.push_back(layer);
  }
  return e;
}

void Seq2SeqModel::bind() {
  embedding_ = params_.find("embedding");
  auto prefixes = encoder_prefixes(config_.variant);
  enc_main_ = bind_encoder(prefixes[0]);
  enc_ctx_ = prefixes.size() > 1 ? bind_encoder(prefixes[1]) : Encoder{};
  bridge_w_.clear();
  bridge_b_.clear();
  dec_.clear();
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    bridge_w_.push_back(params_.find("bridge.l" + std::to_string(l) + ".W"));
    bridge_b_.push_back(params_.find("bridge.l" + std::to_string(l) + ".b"));
    dec_.push_back(gru_view(params_, "dec.l" + std::to_string(l)));
  }
  attn_ = params_.find("attn.W");
  combine_w_ = params_.find("combine.W");
  combine_b_ = params_.find("combine.b");
  out_w_ = params_.find("out.W");
  out_b_ = params_.find("out.b");
}

void Seq2SeqModel::init_weights() {
  std::mt19937_64 rng(config_.seed);
  for (auto& p : params_) {
    // Biases (column vectors) start at zero.
    if (p.cols == 1) continue;
    for (auto& v : p.value) {
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = (2.0 * u - 1.0) * config_.init_scale;
    }
  }
}

const Seq2SeqModel::Encoder& Seq2SeqModel::encoder_for(SourceKind which) const {
  if (which == SourceKind::Context && config_.variant == Variant::CRG) return enc_ctx_;
  return enc_main_;
}

EncodedSource Seq2SeqModel::encode(Tape& tape, std::span<const TokenId> ids, SourceKind which) const {
  if (ids.empty()) throw ModelError("encode: empty source");
  if (ids.size() > config_.max_src_len) {
    throw ModelError("encode: source length " + std::to_string(ids.size()) + " exceeds max_src_len " +
                     std::to_string(config_.max_src_len));
  }
  const auto& enc = encoder_for(which);
  const std::size_t T = ids.size(), H = config_.hidden_dim;
  std::vector<Var> xs;
  xs.reserve(T);
  for (auto id : ids) {
    if (id >= config_.vocab_size) throw ModelError("encode: token id out of range");
    xs.push_back(tape.embed(*embedding_, id));
  }
  const Var zero = tape.constant(std::vector<double>(H, 0.0));
  Var last_fwd = zero, first_bwd = zero;
  for (const auto& layer : enc.layers) {
    std::vector<Var> f(T), b(T), out(T);
    Var h = zero;
    for (std::size_t t = 0; t < T; ++t) f[t] = h = tape.gru(layer.fwd, xs[t], h);
    h = zero;
    for (std::size_t t = T; t-- > 0;) b[t] = h = tape.gru(layer.bwd, xs[t], h);
    for (std::size_t t = 0; t < T; ++t) out[t] = tape.tanh(tape.affine(*layer.proj, tape.concat(f[t], b[t]), layer.proj_b));
    last_fwd = f[T - 1];
    first_bwd = b[0];
    xs = std::move(out);
  }
  EncodedSource src;
  src.states = std::move(xs);
  const auto& top = enc.layers.back();
  src.summary = tape.tanh(tape.affine(*top.proj, tape.concat(last_fwd, first_bwd), top.proj_b));
  src.which = which;
  return src;
}

DecoderState Seq2SeqModel::initial_state(Tape& tape, const EncodedSource& primary) const {
  DecoderState st;
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    st.layers.push_back(tape.tanh(tape.affine(*bridge_w_[l], primary.summary, bridge_b_[l])));
  }
  return st;
}

StepResult Seq2SeqModel::decode_step(Tape& tape, TokenId prev, const DecoderState& state,
                                     const EncodedSource& primary, const EncodedSource* context) const {
  if (prev >= config_.vocab_size) throw ModelError("decode_step: token id out of range");
  if (state.layers.size() != config_.dec_layers) throw ModelError("decode_step: state has wrong layer count");
  Var x = tape.embed(*embedding_, prev);
  if (config_.variant == Variant::CRG) {
    if (context == nullptr) throw ModelError("decode_step: CRG needs the context encoding");
    x = tape.concat(x, context->summary);
  }
  StepResult r;
  r.state.layers.resize(config_.dec_layers);
  for (std::size_t l = 0; l < config_.dec_layers; ++l) {
    x = tape.gru(dec_[l], x, state.layers[l]);
    r.state.layers[l] = x;
  }
  Var query = tape.affine(*attn_, x);
  Var ctx = tape.attend(primary.states, query, &r.attention);
  Var combined = tape.tanh(tape.affine(*combine_w_, tape.concat(ctx, x), combine_b_));
  r.logits = tape.affine(*out_w_, combined, out_b_);
  return r;
}

Var Seq2SeqModel::loss(Tape& tape, const Sources& src, std::span<const TokenId> target) const {
  if (target.size() > config_.max_tgt_len) {
    throw ModelError("target length " + std::to_string(target.size()) + " exceeds max_tgt_len " +
                     std::to_string(config_.max_tgt_len));
  }
  auto primary = encode(tape, src.primary, config_.variant == Variant::CIG ? SourceKind::Joint
                                                : config_.variant == Variant::COG ? SourceKind::Context
                                                                                  : SourceKind::Document);
  std::optional<EncodedSource> context;
  if (config_.variant == Variant::CRG) {
    if (!src.context) throw ModelError("CRG needs a context source");
    context = encode(tape, *src.context, SourceKind::Context);
  }
  auto state = initial_state(tape, primary);
  std::vector<Var> terms;
  terms.reserve(target.size() + 1);
  TokenId prev = Specials::kBos;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    TokenId gold = t < target.size() ? target[t] : Specials::kEos;
    if (gold >= config_.vocab_size) throw ModelError("target id out of range");
    auto step = decode_step(tape, prev, state, primary, context ? &*context : nullptr);
    terms.push_back(tape.softmax_nll(step.logits, gold));
    state = std::move(step.state);
    prev = gold;
  }
  return tape.sum(terms);
}

double Seq2SeqModel::sequence_nll(const Sources& src, std::span<const TokenId> target) const {
  Tape tape(false);
  return tape.scalar(loss(tape, src, target));
}

double Seq2SeqModel::sequence_nll(const Example& ex) const {
  auto src = make_sources(config_, ex, false);
  return sequence_nll(src, ex.target);
}

double Seq2SeqModel::mean_log_prob(const Sources& src, std::span<const TokenId> target) const {
  return -sequence_nll(src, target) / static_cast<double>(target.size() + 1);
}

bool Seq2SeqModel::all_finite() const {
  for (const auto& p : params_) {
    for (double v : p.value) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// Checkpoint: text header with the configuration, then one block per
// parameter holding hex-float values (exact round trip).
void Seq2SeqModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write checkpoint " + path);
  out << "ct-seq2seq v1\n" << config_to_string(config_) << "params " << params_.size() << '\n';
  char buf[64];
  for (const auto& p : params_) {
    out << "param " << p.name << ' ' << p.rows << ' ' << p.cols << '\n';
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", p.value[i]);
      out << buf << (i + 1 == p.value.size() ? '\n' : ' ');
    }
    if (p.value.empty()) out << '\n';
  }
  if (!out) throw ModelError("failed writing checkpoint " + path);
}

Seq2SeqModel Seq2SeqModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ct-seq2seq v1") throw ModelError(path + ": not a ct-seq2seq v1 checkpoint");
  Seq2SeqConfig cfg;
  auto read_kv = [&](const char* key) {
    std::string k, v;
    if (!std::getline(in, line)) throw ModelError(path + ": truncated header");
    std::istringstream ls(line);
    ls >> k >> v;
    if (k != key) throw ModelError(path + ": expected '" + key + "', found '" + k + "'");
    return v;
  };
  cfg.variant = parse_variant(read_kv("variant"));
  cfg.vocab_size = std::stoul(read_kv("vocab_size"));
  cfg.emb_dim = std::stoul(read_kv("emb_dim"));
  cfg.hidden_dim = std::stoul(read_kv("hidden_dim"));
  cfg.enc_layers = std::stoul(read_kv("enc_layers"));
  cfg.dec_layers = std::stoul(read_kv("dec_layers"));
  cfg.max_src_len = std::stoul(read_kv("max_src_len"));
  cfg.max_tgt_len = std::stoul(read_kv("max_tgt_len"));
  cfg.init_scale = std::stod(read_kv("init_scale"));
  cfg.seed = std::stoull(read_kv("seed"));
  std::size_t count = std::stoul(read_kv("params"));

  Seq2SeqModel model(cfg);
  if (count != model.params_.size()) throw ModelError(path + ": parameter count does not match configuration");
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ModelError(path + ": truncated parameter block");
    std::istringstream hs(line);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    hs >> tag >> name >> rows >> cols;
    auto& p = model.params_[i];
    if (tag != "param" || name != p.name || rows != p.rows || cols != p.cols) {
      throw ModelError(path + ": parameter " + name + " does not match configuration (expected " + p.name + ")");
    }
    if (!std::getline(in, line)) throw ModelError(path + ": truncated values for " + name);
    std::istringstream vs(line);
    std::string tok;
    for (auto& v : p.value) {
      if (!(vs >> tok)) throw ModelError(path + ": too few values for " + name);
      v = std::strtod(tok.c_str(), nullptr);
    }
  }
  return model;
}

Seq2SeqModel Seq2SeqModel::load(const std::string& path, const Seq2SeqConfig& expected) {
  auto model = load(path);
  auto stored = model.config();
  // The seed only shapes initialization, so it may differ.
  stored.seed = expected.seed;
  if (!(stored == expected)) {
    throw ModelError("checkpoint " + path + " was trained with a different configuration:\n" +
                     config_to_string(model.config()) + "expected:\n" + config_to_string(expected));
  }
  return model;
}

}  // namespace ct::nn
