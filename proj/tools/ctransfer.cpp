// ctransfer: build corpora, train models, run systems, score outputs.
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "ct/harness.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> corpus;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> beam;
  std::optional<std::size_t> max_epochs;
  std::vector<std::string> systems;
};

ct::ExperimentConfig load_config(const std::string& path, const Overrides& o) {
  auto cfg = path.empty() ? ct::ExperimentConfig{} : ct::ExperimentConfig::load(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.corpus) cfg.corpus = *o.corpus;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.limit) cfg.limit = *o.limit;
  if (o.beam) cfg.decode.beam_width = *o.beam;
  if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
  if (!o.systems.empty()) {
    cfg.systems.clear();
    for (const auto& s : o.systems) {
      try {
        cfg.systems.push_back(ct::parse_system(s));
      } catch (const std::invalid_argument& e) {
        throw ct::ConfigError(e.what());
      }
    }
  }
  cfg.validate();
  return cfg;
}

void add_config_flags(CLI::App* cmd, std::string& config, Overrides& o) {
  cmd->add_option("--config", config, "experiment config (JSON)");
  cmd->add_option("--corpus", o.corpus, "corpus file (overrides config)");
  cmd->add_option("--output-dir", o.output_dir, "output directory (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Content transfer workbench"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  Overrides o;
  std::string config;

  ct::BuildDatasetArgs bd;
  auto* build = app.add_subcommand("build-dataset", "extract instances from wikitext and cached HTML");
  build->add_option("--wikitext", bd.wikitext_dir, "directory of article wikitext files")->required();
  build->add_option("--html-manifest", bd.manifest, "url<TAB>html-file manifest")->required();
  build->add_option("--whitelist", bd.whitelist, "one domain per line")->required();
  build->add_option("--out", bd.out_dir, "output directory")->required();
  build->add_option("--k", bd.options.k, "context window in sentences")->capture_default_str();
  build->add_option("--seed", seed, "split seed")->capture_default_str();

  auto* bpe = app.add_subcommand("train-bpe", "train the shared subword vocabulary");
  add_config_flags(bpe, config, o);
  bpe->add_option("--seed", o.seed, "root seed");

  std::string variant;
  auto* train = app.add_subcommand("train", "train one generative variant");
  add_config_flags(train, config, o);
  train->add_option("--variant", variant, "cag|cog|cig|crg")->required();
  train->add_option("--max-epochs", o.max_epochs, "epoch budget");
  train->add_option("--seed", o.seed, "root seed");

  auto* run = app.add_subcommand("run-systems", "write one output file per system");
  add_config_flags(run, config, o);
  run->add_option("--systems", o.systems, "subset of systems");
  run->add_option("--limit", o.limit, "first N test instances (0 = all)");
  run->add_option("--beam", o.beam, "beam width (1 = greedy)");
  run->add_option("--seed", o.seed, "root seed");

  std::string outputs, corpus, out;
  int resamples = 1000;
  auto* eval = app.add_subcommand("evaluate", "score system outputs against test references");
  eval->add_option("--outputs", outputs, "directory of <system>.txt files")->required();
  eval->add_option("--corpus", corpus, "corpus file")->required();
  eval->add_option("--out", out, "TSV report path (aligned table goes to <out>.txt)")->required();
  eval->add_option("--resamples", resamples, "bootstrap resamples")->capture_default_str();
  eval->add_option("--seed", seed, "bootstrap seed")->capture_default_str();

  auto* stats = app.add_subcommand("stats", "corpus statistics as JSON");
  stats->add_option("--corpus", corpus, "corpus file")->required();
  stats->add_option("--seed", seed, "unused; accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*build) {
      bd.options.seed = seed;
      ct::cmd_build_dataset(bd, std::cout);
    } else if (*bpe) {
      ct::cmd_train_bpe(load_config(config, o), std::cout);
    } else if (*train) {
      ct::nn::Variant v;
      try {
        v = ct::nn::parse_variant(variant);
      } catch (const std::exception& e) {
        throw ct::ConfigError(e.what());
      }
      ct::cmd_train(load_config(config, o), v, std::cout);
    } else if (*run) {
      ct::cmd_run_systems(load_config(config, o), std::cout);
    } else if (*eval) {
      ct::cmd_evaluate(outputs, corpus, out, seed, resamples, std::cout);
    } else if (*stats) {
      std::cout << ct::cmd_stats(corpus);
    }
  } catch (const ct::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
