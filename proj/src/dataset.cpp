#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ct/dataset.hpp"
#include "ct/metrics.hpp"

namespace ct {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  std::string l(s);
  for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "train") return Split::Train;
  if (l == "valid" || l == "validation" || l == "dev") return Split::Valid;
  if (l == "test") return Split::Test;
  throw DatasetError("unknown split '" + std::string(s) + "'");
}

// ---- whitelist --------------------------------------------------------------

DomainWhitelist::DomainWhitelist(std::vector<std::string> domains) {
  for (auto& d : domains) {
    for (auto& c : d) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (d.empty()) continue;
    if (d.find("://") != std::string::npos || d.find('/') != std::string::npos || d.find(':') != std::string::npos ||
        d.find_first_of(" \t") != std::string::npos) {
      throw DatasetError("whitelist entry '" + d + "' must be a bare host name");
    }
    if (d.front() == '.') d.erase(0, 1);
    domains_.insert(d);
  }
}

DomainWhitelist DomainWhitelist::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open whitelist " + path);
  std::vector<std::string> domains;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    domains.push_back(line.substr(b, e - b + 1));
  }
  return DomainWhitelist(std::move(domains));
}

std::string url_host(std::string_view url) {
  std::size_t start;
  if (url.rfind("//", 0) == 0) {
    start = 2;
  } else {
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos) return {};
    auto sch = std::string(url.substr(0, scheme));
    for (auto& c : sch) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (sch != "http" && sch != "https") return {};
    start = scheme + 3;
  }
  auto end = url.find_first_of("/?#", start);
  auto authority = url.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (auto colon = authority.find(':'); colon != std::string_view::npos) authority = authority.substr(0, colon);
  std::string host(authority);
  for (auto& c : host) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  while (!host.empty() && host.back() == '.') host.pop_back();
  return host;
}

bool DomainWhitelist::matches_host(std::string_view host) const {
  if (host.empty()) return false;
  std::string h(host);
  while (true) {
    if (domains_.contains(h)) return true;
    auto dot = h.find('.');
    if (dot == std::string::npos) return false;
    h.erase(0, dot + 1);
  }
}

bool DomainWhitelist::matches_url(std::string_view url) const { return matches_host(url_host(url)); }

// ---- filters and splits -----------------------------------------------------

void LengthFilter::validate() const {
  auto check = [](std::size_t lo, std::size_t hi, const char* what) {
    if (lo == 0 || lo > hi) throw DatasetError(std::string("length filter for ") + what + " needs 0 < min <= max");
  };
  check(doc_min, doc_max, "document");
  check(context_min, context_max, "context");
  check(update_min, update_max, "update");
}

bool LengthFilter::accepts(std::size_t d, std::size_t c, std::size_t u) const {
  return d >= doc_min && d <= doc_max && c >= context_min && c <= context_max && u >= update_min && u <= update_max;
}

std::vector<Instance> apply_filters(std::span<const Instance> instances, const LengthFilter& filter) {
  filter.validate();
  std::vector<Instance> out;
  for (const auto& inst : instances) {
    if (filter.accepts(tokenize(inst.document).size(), tokenize(inst.context).size(), tokenize(inst.update).size())) {
      out.push_back(inst);
    }
  }
  return out;
}

void SplitRatios::validate() const {
  if (train < 0 || valid < 0 || test < 0) throw DatasetError("split ratios must be non-negative");
  if (std::abs(train + valid + test - 1.0) > 1e-9) throw DatasetError("split ratios must sum to 1");
}

Split split_for_article(std::string_view article_id, const SplitRatios& ratios, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (char c : article_id) mix(static_cast<unsigned char>(c));
  // FNV alone leaves the high bits nearly fixed for ids sharing a prefix
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < ratios.train) return Split::Train;
  if (u < ratios.train + ratios.valid) return Split::Valid;
  return Split::Test;
}

void split_corpus(std::span<Instance> instances, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  for (auto& inst : instances) inst.split = split_for_article(inst.article_id, ratios, seed);
}

// ---- statistics -------------------------------------------------------------

CorpusStats corpus_stats(std::span<const Instance> instances, const StopwordSet& stopwords) {
  if (instances.empty()) throw DatasetError("corpus_stats: empty corpus");
  CorpusStats st;
  std::set<std::string> articles;
  for (const auto& inst : instances) {
    auto d = tokenize(inst.document), s = tokenize(inst.context), x = tokenize(inst.update);
    if (x.empty()) throw DatasetError("corpus_stats: empty update in article " + inst.article_id);
    st.overlap_update_document += content_overlap(x, d, stopwords);
    st.overlap_update_context += content_overlap(x, s, stopwords);
    st.rouge1_recall_update_document += rouge_1_recall(d, x);
    st.repetition_update += repetition_ratio(x);
    st.mean_document_tokens += static_cast<double>(d.size());
    st.mean_context_tokens += static_cast<double>(s.size());
    st.mean_update_tokens += static_cast<double>(x.size());
    switch (inst.split) {
      case Split::Train: ++st.train; break;
      case Split::Valid: ++st.valid; break;
      case Split::Test: ++st.test; break;
    }
    articles.insert(inst.article_id);
  }
  st.instances = instances.size();
  st.articles = articles.size();
  const double n = static_cast<double>(instances.size());
  for (double* v : {&st.overlap_update_document, &st.overlap_update_context, &st.rouge1_recall_update_document,
                    &st.repetition_update, &st.mean_document_tokens, &st.mean_context_tokens, &st.mean_update_tokens}) {
    *v /= n;
  }
  return st;
}

std::string stats_to_json(const CorpusStats& st) {
  nlohmann::ordered_json j;
  j["instances"] = st.instances;
  j["articles"] = st.articles;
  j["train"] = st.train;
  j["valid"] = st.valid;
  j["test"] = st.test;
  j["overlap_update_document"] = st.overlap_update_document;
  j["overlap_update_context"] = st.overlap_update_context;
  j["rouge1_recall_update_document"] = st.rouge1_recall_update_document;
  j["repetition_update"] = st.repetition_update;
  j["mean_document_tokens"] = st.mean_document_tokens;
  j["mean_context_tokens"] = st.mean_context_tokens;
  j["mean_update_tokens"] = st.mean_update_tokens;
  return j.dump(2) + "\n";
}

// ---- corpus files -----------------------------------------------------------

std::string instance_to_json(const Instance& inst) {
  nlohmann::ordered_json j;
  j["article_id"] = inst.article_id;
  j["document"] = inst.document;
  j["context"] = inst.context;
  j["update"] = inst.update;
  j["citation_url"] = inst.citation_url;
  j["split"] = split_name(inst.split);
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Instance instance_from_json(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed corpus line: ") + e.what());
  }
  if (!j.is_object()) throw DatasetError("corpus line is not an object");
  auto field = [&](const char* k) -> std::string {
    auto it = j.find(k);
    if (it == j.end() || !it->is_string()) throw DatasetError(std::string("corpus line lacks string field '") + k + "'");
    return it->get<std::string>();
  };
  Instance inst;
  inst.article_id = field("article_id");
  inst.document = field("document");
  inst.context = field("context");
  inst.update = field("update");
  inst.citation_url = field("citation_url");
  inst.split = parse_split(field("split"));
  return inst;
}

void write_corpus(const std::string& path, std::span<const Instance> instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path);
  for (const auto& inst : instances) out << instance_to_json(inst) << '\n';
  if (!out) throw DatasetError("write failed: " + path);
}

std::vector<Instance> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open corpus " + path);
  std::vector<Instance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(line));
    } catch (const DatasetError& e) {
      throw DatasetError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, std::string> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open manifest " + path);
  const auto base = fs::path(path).parent_path();
  std::map<std::string, std::string> m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DatasetError(path + ":" + std::to_string(lineno) + ": expected '<url>\\t<file>'");
    }
    fs::path file = line.substr(tab + 1);
    if (file.is_relative()) file = base / file;
    m[line.substr(0, tab)] = file.string();
  }
  return m;
}

// ---- pipeline ---------------------------------------------------------------

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

BuildResult build_dataset(std::span<const std::string> wikitext_files, const std::map<std::string, std::string>& manifest,
                          const DomainWhitelist& whitelist, const BuildOptions& opts) {
  opts.filter.validate();
  opts.ratios.validate();
  std::vector<std::string> files(wikitext_files.begin(), wikitext_files.end());
  std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
    return fs::path(a).filename() < fs::path(b).filename();
  });

  const auto n = static_cast<std::ptrdiff_t>(files.size());
  std::vector<CitationExtraction> extracted(files.size());
  std::vector<std::string> read_errors(files.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      extracted[k] = extract_citation_instances(read_file(files[k]), whitelist, opts.k);
    } catch (const std::exception& e) {
      read_errors[k] = e.what();
    }
  }

  // Convert each cited page once.
  std::vector<std::string> urls;
  for (const auto& ex : extracted) {
    for (const auto& c : ex.citations) urls.push_back(c.citation_url);
  }
  std::sort(urls.begin(), urls.end());
  urls.erase(std::unique(urls.begin(), urls.end()), urls.end());
  std::vector<std::string> texts(urls.size()), doc_errors(urls.size());
  std::vector<char> have(urls.size(), 0);
  const auto nu = static_cast<std::ptrdiff_t>(urls.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < nu; ++i) {
    const auto k = static_cast<std::size_t>(i);
    auto it = manifest.find(urls[k]);
    if (it == manifest.end()) {
      doc_errors[k] = "no local HTML for " + urls[k];
      continue;
    }
    try {
      texts[k] = html_to_text(read_file(it->second));
      have[k] = 1;
    } catch (const std::exception& e) {
      doc_errors[k] = urls[k] + ": " + e.what();
    }
  }

  BuildResult res;
  std::vector<Instance> raw;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto name = fs::path(files[f]).filename().string();
    if (!read_errors[f].empty()) {
      res.diagnostics.push_back(name + ": " + read_errors[f]);
      continue;
    }
    for (const auto& d : extracted[f].diagnostics) res.diagnostics.push_back(name + ": " + d);
    const auto id = fs::path(files[f]).stem().string();
    for (const auto& c : extracted[f].citations) {
      auto u = static_cast<std::size_t>(std::lower_bound(urls.begin(), urls.end(), c.citation_url) - urls.begin());
      if (!have[u]) continue;
      raw.push_back({id, texts[u], c.context, c.update, c.citation_url, Split::Train});
    }
  }
  for (std::size_t u = 0; u < urls.size(); ++u) {
    if (!doc_errors[u].empty()) res.diagnostics.push_back(doc_errors[u]);
  }
  res.raw_instances = raw.size();
  res.instances = apply_filters(raw, opts.filter);
  split_corpus(res.instances, opts.ratios, opts.seed);
  return res;
}

}  // namespace ct
