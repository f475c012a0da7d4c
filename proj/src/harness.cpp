#include "ct/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include <json.hpp>

namespace ct {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t root, std::string_view component) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < 8; ++i) {
    h ^= (root >> (8 * i)) & 0xFF;
    h *= 0x100000001b3ULL;
  }
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

// ---- config -----------------------------------------------------------------

namespace {

template <class T>
void read_key(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError("unknown config key '" + where + it.key() + "'");
    }
  }
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  auto it = root.find(key);
  if (it == root.end()) return empty;
  if (!it->is_object()) throw ConfigError(std::string("config key '") + key + "' must be an object");
  return *it;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(root,
                 {"corpus", "output_dir", "bpe", "systems", "model", "train", "decode", "hybrid_k", "limit",
                  "bootstrap_resamples", "seed"},
                 "");
  ExperimentConfig c;
  read_key(root, "corpus", c.corpus);
  read_key(root, "output_dir", c.output_dir);
  read_key(root, "hybrid_k", c.hybrid_k);
  read_key(root, "limit", c.limit);
  read_key(root, "bootstrap_resamples", c.bootstrap_resamples);
  read_key(root, "seed", c.seed);

  const auto& bpe = section(root, "bpe");
  reject_unknown(bpe, {"path", "vocab_size"}, "bpe.");
  read_key(bpe, "path", c.bpe_path);
  read_key(bpe, "vocab_size", c.bpe_vocab_size);

  if (auto it = root.find("systems"); it != root.end()) {
    if (!it->is_array()) throw ConfigError("config key 'systems' must be a list");
    c.systems.clear();
    for (const auto& s : *it) {
      if (!s.is_string()) throw ConfigError("system names must be strings");
      try {
        c.systems.push_back(parse_system(s.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  const auto& m = section(root, "model");
  reject_unknown(m, {"emb_dim", "hidden_dim", "enc_layers", "dec_layers", "max_src_len", "max_tgt_len", "init_scale"},
                 "model.");
  read_key(m, "emb_dim", c.model.emb_dim);
  read_key(m, "hidden_dim", c.model.hidden_dim);
  read_key(m, "enc_layers", c.model.enc_layers);
  read_key(m, "dec_layers", c.model.dec_layers);
  read_key(m, "max_src_len", c.model.max_src_len);
  read_key(m, "max_tgt_len", c.model.max_tgt_len);
  read_key(m, "init_scale", c.model.init_scale);

  const auto& t = section(root, "train");
  reject_unknown(t,
                 {"learning_rate", "clip_norm", "lr_decay", "decay_patience", "batch_size", "max_epochs", "patience",
                  "target_perplexity"},
                 "train.");
  read_key(t, "learning_rate", c.train.learning_rate);
  read_key(t, "clip_norm", c.train.clip_norm);
  read_key(t, "lr_decay", c.train.lr_decay);
  read_key(t, "decay_patience", c.train.decay_patience);
  read_key(t, "batch_size", c.train.batch_size);
  read_key(t, "max_epochs", c.train.max_epochs);
  read_key(t, "patience", c.train.patience);
  read_key(t, "target_perplexity", c.train.target_perplexity);

  const auto& d = section(root, "decode");
  reject_unknown(d, {"beam_width", "max_len"}, "decode.");
  read_key(d, "beam_width", c.decode.beam_width);
  read_key(d, "max_len", c.decode.max_len);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  auto c = from_json(read_text(path));
  // Relative paths in the file are relative to the file.
  const auto base = fs::path(path).parent_path();
  auto anchor = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  anchor(c.corpus);
  anchor(c.output_dir);
  anchor(c.bpe_path);
  return c;
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["corpus"] = corpus;
  j["output_dir"] = output_dir;
  j["bpe"] = {{"path", bpe_file()}, {"vocab_size", bpe_vocab_size}};
  auto names = nlohmann::ordered_json::array();
  for (auto s : systems) names.push_back(system_name(s));
  j["systems"] = names;
  j["model"] = {{"emb_dim", model.emb_dim},         {"hidden_dim", model.hidden_dim},
                {"enc_layers", model.enc_layers},   {"dec_layers", model.dec_layers},
                {"max_src_len", model.max_src_len}, {"max_tgt_len", model.max_tgt_len},
                {"init_scale", model.init_scale}};
  j["train"] = {{"learning_rate", train.learning_rate}, {"clip_norm", train.clip_norm},
                {"lr_decay", train.lr_decay},           {"decay_patience", train.decay_patience},
                {"batch_size", train.batch_size},
                {"max_epochs", train.max_epochs},       {"patience", train.patience},
                {"target_perplexity", train.target_perplexity}};
  j["decode"] = {{"beam_width", decode.beam_width}, {"max_len", decode.max_len}};
  j["hybrid_k"] = hybrid_k;
  j["limit"] = limit;
  j["bootstrap_resamples"] = bootstrap_resamples;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

std::string ExperimentConfig::bpe_file() const {
  return bpe_path.empty() ? (fs::path(output_dir) / "bpe.txt").string() : bpe_path;
}

std::string ExperimentConfig::checkpoint_file(nn::Variant v) const {
  std::string name = nn::variant_name(v);
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return (fs::path(output_dir) / ("model-" + name + ".ckpt")).string();
}

std::string ExperimentConfig::history_file(nn::Variant v) const {
  std::string name = nn::variant_name(v);
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return (fs::path(output_dir) / ("history-" + name + ".tsv")).string();
}

std::string ExperimentConfig::outputs_dir() const { return (fs::path(output_dir) / "outputs").string(); }

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  if (bpe_vocab_size <= Specials::kCount + 1) throw ConfigError("bpe.vocab_size is too small");
  if (systems.empty()) throw ConfigError("systems must name at least one system");
  if (hybrid_k == 0) throw ConfigError("hybrid_k must be positive");
  if (bootstrap_resamples <= 0) throw ConfigError("bootstrap_resamples must be positive");
  if (decode.beam_width == 0) throw ConfigError("decode.beam_width must be positive");
  if (train.learning_rate <= 0 || train.clip_norm <= 0 || train.lr_decay <= 0 || train.lr_decay > 1) {
    throw ConfigError("train.learning_rate and train.clip_norm must be positive, train.lr_decay in (0, 1]");
  }
  if (train.batch_size == 0 || train.max_epochs == 0) throw ConfigError("train.batch_size and train.max_epochs must be positive");
  auto probe = model;
  probe.vocab_size = Specials::kCount + 2;
  try {
    probe.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

std::vector<Instance> test_instances(std::span<const Instance> corpus, std::size_t limit) {
  std::vector<Instance> out;
  for (const auto& inst : corpus) {
    if (inst.split != Split::Test) continue;
    if (limit != 0 && out.size() >= limit) break;
    out.push_back(inst);
  }
  return out;
}

// ---- build-dataset ----------------------------------------------------------

BuildResult cmd_build_dataset(const BuildDatasetArgs& args, std::ostream& log) {
  if (!fs::is_directory(args.wikitext_dir)) throw ConfigError("wikitext directory not found: " + args.wikitext_dir);
  require_file(args.manifest, "HTML manifest");
  require_file(args.whitelist, "whitelist");
  if (args.out_dir.empty()) throw ConfigError("output directory is not set");
  try {
    args.options.filter.validate();
    args.options.ratios.validate();
  } catch (const DatasetError& e) {
    throw ConfigError(e.what());
  }
  DomainWhitelist whitelist;
  std::map<std::string, std::string> manifest;
  try {
    whitelist = DomainWhitelist::load(args.whitelist);
    manifest = load_manifest(args.manifest);
  } catch (const DatasetError& e) {
    throw ConfigError(e.what());
  }
  if (whitelist.empty()) log << "warning: whitelist is empty; no citation will qualify\n";

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(args.wikitext_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path().string());
  }
  auto res = build_dataset(files, manifest, whitelist, args.options);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_corpus((out / "corpus.jsonl").string(), res.instances);
  write_text(out / "stats.json",
             stats_to_json(res.instances.empty() ? CorpusStats{} : corpus_stats(res.instances, default_stopwords())));
  std::string diag;
  for (const auto& d : res.diagnostics) diag += d + "\n";
  write_text(out / "diagnostics.txt", diag);
  log << files.size() << " articles, " << res.raw_instances << " citations aligned, " << res.instances.size()
      << " instances kept, " << res.diagnostics.size() << " diagnostics\n";
  return res;
}

// ---- train ------------------------------------------------------------------

namespace {

std::vector<Instance> load_corpus_checked(const std::string& path) {
  require_file(path, "corpus");
  try {
    return read_corpus(path);
  } catch (const DatasetError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<Instance> of_split(std::span<const Instance> corpus, Split s) {
  std::vector<Instance> out;
  for (const auto& inst : corpus) {
    if (inst.split == s) out.push_back(inst);
  }
  return out;
}

BpeModel train_bpe_on(std::span<const Instance> train, std::size_t vocab_size) {
  std::vector<TokenSeq> words;
  words.reserve(train.size() * 3);
  for (const auto& inst : train) {
    words.push_back(tokenize(inst.document));
    words.push_back(tokenize(inst.context));
    words.push_back(tokenize(inst.update));
  }
  return BpeModel::train(words, vocab_size);
}

}  // namespace

BpeModel cmd_train_bpe(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto corpus = load_corpus_checked(cfg.corpus);
  auto train = of_split(corpus, Split::Train);
  if (train.empty()) throw ConfigError("corpus has no train instances: " + cfg.corpus);
  auto bpe = train_bpe_on(train, cfg.bpe_vocab_size);
  fs::create_directories(fs::path(cfg.bpe_file()).parent_path());
  bpe.save(cfg.bpe_file());
  log << "bpe: " << bpe.vocab_size() << " symbols, " << bpe.merges().size() << " merges -> " << cfg.bpe_file() << "\n";
  return bpe;
}

nn::TrainResult cmd_train(const ExperimentConfig& cfg, nn::Variant variant, std::ostream& log) {
  cfg.validate();
  auto corpus = load_corpus_checked(cfg.corpus);
  auto train_insts = of_split(corpus, Split::Train);
  auto valid_insts = of_split(corpus, Split::Valid);
  if (train_insts.empty()) throw ConfigError("corpus has no train instances: " + cfg.corpus);
  if (valid_insts.empty()) {
    log << "warning: no validation split; validating on the training data\n";
    valid_insts = train_insts;
  }

  BpeModel bpe = fs::exists(cfg.bpe_file()) ? BpeModel::load(cfg.bpe_file()) : cmd_train_bpe(cfg, log);

  auto to_examples = [&](std::span<const Instance> insts, const char* what) {
    std::vector<nn::Example> out;
    std::size_t dropped = 0;
    for (const auto& inst : insts) {
      auto ex = encode_instance(bpe, inst);
      if (ex.target.empty() || ex.target.size() > cfg.model.max_tgt_len) {
        ++dropped;
        continue;
      }
      out.push_back(std::move(ex));
    }
    if (dropped > 0) log << what << ": skipped " << dropped << " instances whose update exceeds max_tgt_len\n";
    return out;
  };
  auto train_set = to_examples(train_insts, "train");
  auto valid_set = to_examples(valid_insts, "valid");
  if (train_set.empty() || valid_set.empty()) throw ConfigError("no trainable instances after the target-length cut");

  auto mcfg = cfg.model;
  mcfg.variant = variant;
  mcfg.vocab_size = bpe.vocab_size();
  mcfg.seed = derive_seed(cfg.seed, std::string("model/") + nn::variant_name(variant));
  nn::Seq2SeqModel model(mcfg);
  auto topts = cfg.train;
  topts.seed = derive_seed(cfg.seed, std::string("train/") + nn::variant_name(variant));
  topts.truncate_sources = true;

  log << nn::variant_name(variant) << ": " << model.params().scalar_count() << " parameters, " << train_set.size()
      << " train / " << valid_set.size() << " valid\n";
  auto result = nn::train(model, train_set, valid_set, topts);
  for (const auto& r : result.history) {
    log << "epoch " << r.epoch << "  train_nll " << r.train_nll << "  valid_ppl " << r.valid_perplexity << "  lr "
        << r.learning_rate << "\n";
  }
  fs::create_directories(cfg.output_dir);
  model.save(cfg.checkpoint_file(variant));
  write_text(cfg.history_file(variant), nn::format_history(result.history));
  log << "best epoch " << result.best_epoch << " (perplexity " << result.best_perplexity << ") -> "
      << cfg.checkpoint_file(variant) << "\n";
  return result;
}

// ---- run-systems ------------------------------------------------------------

void cmd_run_systems(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  auto corpus = load_corpus_checked(cfg.corpus);
  auto tests = test_instances(corpus, cfg.limit);
  if (tests.empty()) throw ConfigError("corpus has no test instances: " + cfg.corpus);

  std::map<nn::Variant, nn::Variant> needed;
  for (auto s : cfg.systems) {
    if (auto v = system_variant(s)) needed[*v] = *v;
  }
  if (!needed.empty()) require_file(cfg.bpe_file(), "BPE model");
  for (const auto& [v, _] : needed) require_file(cfg.checkpoint_file(v), "checkpoint");

  BpeModel bpe;
  if (!needed.empty()) bpe = BpeModel::load(cfg.bpe_file());
  std::map<nn::Variant, std::unique_ptr<nn::Seq2SeqModel>> models;
  SystemResources res;
  res.bpe = &bpe;
  res.decode = cfg.decode;
  res.hybrid_k = cfg.hybrid_k;
  for (const auto& [v, _] : needed) {
    models[v] = std::make_unique<nn::Seq2SeqModel>(nn::Seq2SeqModel::load(cfg.checkpoint_file(v)));
    if (models[v]->config().variant != v) throw ConfigError(cfg.checkpoint_file(v) + " holds a different variant");
    if (models[v]->config().vocab_size != bpe.vocab_size()) {
      throw ConfigError(cfg.checkpoint_file(v) + " does not match the BPE vocabulary");
    }
    res.models[v] = models[v].get();
  }

  fs::create_directories(cfg.outputs_dir());
  for (auto s : cfg.systems) {
    std::vector<std::string> lines(tests.size()), errors(tests.size());
    const auto n = static_cast<std::ptrdiff_t>(tests.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      try {
        lines[k] = run_system(s, tests[k], res);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
    for (std::size_t k = 0; k < errors.size(); ++k) {
      if (!errors[k].empty()) {
        throw std::runtime_error(std::string(system_name(s)) + " failed on test instance " + std::to_string(k) + " (" +
                                 tests[k].article_id + "): " + errors[k]);
      }
    }
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_text(fs::path(cfg.outputs_dir()) / (std::string(system_name(s)) + ".txt"), text);
    log << system_name(s) << ": " << lines.size() << " outputs\n";
  }
}

// ---- evaluate ---------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Known systems in table order, anything else alphabetically after them.
int system_rank(const std::string& name) {
  try {
    return static_cast<int>(parse_system(name));
  } catch (const std::invalid_argument&) {
    return static_cast<int>(std::size(kAllSystems));
  }
}

}  // namespace

EvaluationResult cmd_evaluate(const std::string& outputs_dir, const std::string& corpus_path, const std::string& out_path,
                              std::uint64_t seed, int resamples, std::ostream& log) {
  if (!fs::is_directory(outputs_dir)) throw ConfigError("outputs directory not found: " + outputs_dir);
  if (out_path.empty()) throw ConfigError("output path is not set");
  if (resamples <= 0) throw ConfigError("resamples must be positive");
  auto corpus = load_corpus_checked(corpus_path);
  auto tests = test_instances(corpus, 0);

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(outputs_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  if (files.empty()) throw ConfigError("no <system>.txt files in " + outputs_dir);
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    auto ra = system_rank(a.stem().string()), rb = system_rank(b.stem().string());
    return ra != rb ? ra < rb : a.stem() < b.stem();
  });

  std::vector<std::vector<std::string>> outputs;
  for (const auto& f : files) {
    outputs.push_back(read_lines(f));
    if (outputs.back().size() > tests.size()) {
      throw ConfigError(f.string() + " has " + std::to_string(outputs.back().size()) + " lines but the corpus has only " +
                        std::to_string(tests.size()) + " test instances");
    }
    if (outputs.back().size() != outputs.front().size()) {
      throw ConfigError(f.string() + " and " + files.front().string() + " differ in length");
    }
  }
  const std::size_t n = outputs.front().size();
  if (n == 0) throw ConfigError("output files are empty");

  std::vector<TokenSeq> refs(n);
  for (std::size_t i = 0; i < n; ++i) refs[i] = tokenize(tests[i].update);

  EvaluationResult result;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto name = files[f].stem().string();
    std::vector<ScoredPair> pairs(n);
    for (std::size_t i = 0; i < n; ++i) {
      pairs[i] = {tests[i].article_id + "#" + std::to_string(i), tokenize(outputs[f][i]), refs[i]};
    }
    auto scores = score_instances(pairs);
    result.repetition.push_back(repetition_summary(scores));
    result.reports.push_back(summarize(name, std::move(scores), derive_seed(seed, "bootstrap/" + name), resamples));
  }
  for (const auto& r : refs) {
    if (r.empty()) continue;
    ++result.reference_repetition.counted;
    if (repetition_ratio(r) < 0.5) ++result.reference_repetition.below_half;
  }

  result.tsv = format_tsv(result.reports);
  std::ostringstream table;
  table << format_aligned(result.reports) << "\n";
  table << "Repetition ratio R = unique tokens / tokens (non-empty outputs)\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %10s\n", "system", "outputs", "R<0.5", "% R<0.5");
  table << buf;
  for (std::size_t f = 0; f < result.reports.size(); ++f) {
    const auto& r = result.repetition[f];
    std::snprintf(buf, sizeof buf, "%-16s %8zu %8zu %10.2f\n", result.reports[f].system.c_str(), r.counted,
                  r.below_half, r.percent_below_half());
    table << buf;
  }
  const auto& rr = result.reference_repetition;
  std::snprintf(buf, sizeof buf, "%-16s %8zu %8zu %10.2f\n", "references", rr.counted, rr.below_half,
                rr.percent_below_half());
  table << buf;
  result.table = table.str();

  auto parent = fs::path(out_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_text(out_path, result.tsv);
  write_text(out_path + ".txt", result.table);
  log << result.table;
  return result;
}

std::string cmd_stats(const std::string& corpus_path) {
  auto corpus = load_corpus_checked(corpus_path);
  if (corpus.empty()) throw ConfigError("corpus is empty: " + corpus_path);
  return stats_to_json(corpus_stats(corpus, default_stopwords()));
}

}  // namespace ct
