#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ct/text.hpp"

namespace ct {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Valid, Test };
const char* split_name(Split s);
Split parse_split(std::string_view s);

/// One (document, context, update) triple. The revised curated text is
/// context followed by update.
struct Instance {
  std::string article_id;
  std::string document;
  std::string context;
  std::string update;
  std::string citation_url;
  Split split = Split::Train;

  bool operator==(const Instance&) const = default;
};

/// Hostname suffixes, lowercase. A host matches an entry when it equals it or
/// ends with "." + entry.
class DomainWhitelist {
 public:
  DomainWhitelist() = default;
  /// Throws DatasetError on entries carrying a scheme, path or port.
  explicit DomainWhitelist(std::vector<std::string> domains);

  static DomainWhitelist load(const std::string& path);

  bool matches_host(std::string_view host) const;
  bool matches_url(std::string_view url) const;
  bool empty() const { return domains_.empty(); }
  std::size_t size() const { return domains_.size(); }

 private:
  std::set<std::string> domains_;
};

/// Lowercased host of an http(s) URL ("" if none).
std::string url_host(std::string_view url);

/// Inclusive word-token bounds.
struct LengthFilter {
  std::size_t doc_min = 50, doc_max = 2000;
  std::size_t context_min = 20, context_max = 500;
  std::size_t update_min = 5, update_max = 200;

  void validate() const;
  bool accepts(std::size_t doc_tokens, std::size_t context_tokens, std::size_t update_tokens) const;
};

// ---- HTML -------------------------------------------------------------------

/// Decodes named (common subset) and numeric character references.
std::string decode_entities(std::string_view s);

/// Plain text of the main body of a news page: drops script, style, nav,
/// header, footer and similar elements, groups paragraph text by enclosing
/// container and keeps the container with the most text. Paragraphs are
/// joined by newlines; whitespace inside a paragraph is collapsed.
/// Throws DatasetError for binary input (NUL bytes).
std::string html_to_text(std::string_view html);

// ---- wikitext ---------------------------------------------------------------

struct CitationAnchor {
  std::size_t offset = 0;  // position in PlainArticle::text
  std::string url;
};

struct PlainArticle {
  std::string text;
  std::vector<CitationAnchor> anchors;
  std::vector<std::string> diagnostics;
};

/// Strips wiki markup. Each <ref> carrying a URL (cite template url=, bracket
/// link, or bare URL) becomes an anchor at the point it occurred; named refs
/// reused via <ref name=.../> resolve to the first definition.
PlainArticle strip_wikitext(std::string_view wikitext);

struct RawCitation {
  std::string context;  // up to k sentences, space-joined
  std::string update;
  std::string citation_url;
  std::size_t sentence_index = 0;
};

struct CitationExtraction {
  std::vector<RawCitation> citations;
  std::vector<std::string> diagnostics;
};

/// update = the sentence the citation follows (or sits inside), context = up
/// to k sentences before it. Citations to hosts outside the whitelist are
/// ignored.
CitationExtraction extract_citation_instances(std::string_view wikitext, const DomainWhitelist& whitelist,
                                              std::size_t k = 3);

// ---- corpus -----------------------------------------------------------------

std::vector<Instance> apply_filters(std::span<const Instance> instances, const LengthFilter& filter);

struct SplitRatios {
  double train = 0.8, valid = 0.1, test = 0.1;
  void validate() const;
};

/// Assigns splits by a seeded 64-bit FNV-1a hash of article_id followed by a
/// splitmix64 finalizer, so every instance of an article lands in the same
/// split.
void split_corpus(std::span<Instance> instances, const SplitRatios& ratios, std::uint64_t seed);
Split split_for_article(std::string_view article_id, const SplitRatios& ratios, std::uint64_t seed);

struct CorpusStats {
  std::size_t instances = 0;
  std::size_t train = 0, valid = 0, test = 0;
  std::size_t articles = 0;
  double overlap_update_document = 0.0;  // content_overlap(x, d)
  double overlap_update_context = 0.0;   // content_overlap(x, s)
  double rouge1_recall_update_document = 0.0;
  double repetition_update = 0.0;
  double mean_document_tokens = 0.0;
  double mean_context_tokens = 0.0;
  double mean_update_tokens = 0.0;
};

CorpusStats corpus_stats(std::span<const Instance> instances, const StopwordSet& stopwords);
std::string stats_to_json(const CorpusStats& stats);

/// One JSON object per line with keys article_id, document, context, update,
/// citation_url, split (in that order).
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(std::string_view line);
void write_corpus(const std::string& path, std::span<const Instance> instances);
std::vector<Instance> read_corpus(const std::string& path);

/// url -> local HTML path (tab-separated). Relative paths resolve against the
/// manifest's directory.
std::map<std::string, std::string> load_manifest(const std::string& path);

struct BuildOptions {
  std::size_t k = 3;
  LengthFilter filter;
  SplitRatios ratios;
  std::uint64_t seed = 1;
};

struct BuildResult {
  std::vector<Instance> instances;  // filtered, split assigned
  std::size_t raw_instances = 0;
  std::vector<std::string> diagnostics;
};

/// Runs extraction over every article file (sorted by name; article_id is
/// the file stem), attaches documents through the manifest, filters and
/// splits.
BuildResult build_dataset(std::span<const std::string> wikitext_files, const std::map<std::string, std::string>& manifest,
                          const DomainWhitelist& whitelist, const BuildOptions& opts);

}  // namespace ct
