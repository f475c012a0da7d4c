#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ct/dataset.hpp"

using namespace ct;
namespace fs = std::filesystem;

namespace {

const std::string kFix = CT_FIXTURES;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> wiki_files() {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(kFix + "/wiki")) files.push_back(e.path().string());
  return files;
}

BuildResult build_fixture(std::vector<std::string> files) {
  return build_dataset(files, load_manifest(kFix + "/manifest.tsv"), DomainWhitelist::load(kFix + "/whitelist.txt"),
                       BuildOptions{});
}

std::string to_jsonl(std::span<const Instance> xs) {
  std::string s;
  for (const auto& x : xs) s += instance_to_json(x) + "\n";
  return s;
}

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += i == 0 ? "w" : " w";
  return s;
}

Instance sized(std::size_t doc, std::size_t ctx, std::size_t upd) {
  return {"a", words(doc), words(ctx), words(upd), "https://x.example/", Split::Train};
}

const DomainWhitelist kNews({"news.example.com"});

}  // namespace

TEST_CASE("fixture pipeline reproduces the frozen corpus") {
  auto files = wiki_files();
  auto a = build_fixture(files);
  CHECK(to_jsonl(a.instances) == slurp(kFix + "/expected_corpus.jsonl"));
  CHECK(a.raw_instances == 5);  // the first-sentence citation has no context and is filtered
  REQUIRE(a.diagnostics.size() == 2);
  CHECK(a.diagnostics[0].find("without URL") != std::string::npos);
  CHECK(a.diagnostics[1].find("unclosed") != std::string::npos);

  std::reverse(files.begin(), files.end());
  auto b = build_fixture(files);
  CHECK(to_jsonl(b.instances) == to_jsonl(a.instances));

  auto path = (fs::temp_directory_path() / "ct_corpus_test.jsonl").string();
  write_corpus(path, a.instances);
  CHECK(slurp(path) == slurp(kFix + "/expected_corpus.jsonl"));
  CHECK(read_corpus(path) == a.instances);
  fs::remove(path);
}

TEST_CASE("empty whitelist yields no instances") {
  auto r = build_dataset(wiki_files(), load_manifest(kFix + "/manifest.tsv"), DomainWhitelist{}, BuildOptions{});
  CHECK(r.instances.empty());
  CHECK(r.raw_instances == 0);
}

TEST_CASE("missing HTML is reported, not fatal") {
  std::map<std::string, std::string> manifest;
  auto r = build_dataset(wiki_files(), manifest, DomainWhitelist::load(kFix + "/whitelist.txt"), BuildOptions{});
  CHECK(r.instances.empty());
  bool seen = false;
  for (const auto& d : r.diagnostics) seen |= d.find("no local HTML") != std::string::npos;
  CHECK(seen);
}

TEST_CASE("update is the sentence before the citation") {
  std::string w =
      "One is here. Two is here. Three is here. Four is here.<ref>https://news.example.com/a</ref> Five is here.";
  auto r = extract_citation_instances(w, kNews, 3);
  REQUIRE(r.citations.size() == 1);
  CHECK(r.citations[0].update == "Four is here.");
  CHECK(r.citations[0].context == "One is here. Two is here. Three is here.");
  CHECK(r.citations[0].sentence_index == 3);

  auto k1 = extract_citation_instances(w, kNews, 1);
  CHECK(k1.citations[0].context == "Three is here.");
  auto k0 = extract_citation_instances(w, kNews, 0);
  CHECK(k0.citations[0].context.empty());

  // a ref sitting inside the sentence binds to that sentence
  auto mid = extract_citation_instances("Alpha one. Beta<ref>https://news.example.com/b</ref> two. Gamma three.", kNews, 3);
  REQUIRE(mid.citations.size() == 1);
  CHECK(mid.citations[0].update == "Beta two.");
  CHECK(mid.citations[0].context == "Alpha one.");
}

TEST_CASE("citation forms and whitelist filtering") {
  std::string w =
      "A one.<ref>{{cite web |title=T |url=https://news.example.com/1}}</ref> "
      "B two.<ref>[http://sub.news.example.com/2 label]</ref> "
      "C three.<ref>{{cite web |url=https://other.example.org/3}}</ref> "
      "D four.<ref name=\"x\">https://news.example.com/4</ref> "
      "E five.<ref name=\"x\" /> "
      "F six.<ref name=\"y\"/>";
  auto r = extract_citation_instances(w, kNews, 3);
  REQUIRE(r.citations.size() == 4);
  CHECK(r.citations[0].citation_url == "https://news.example.com/1");
  CHECK(r.citations[1].citation_url == "http://sub.news.example.com/2");
  CHECK(r.citations[2].citation_url == "https://news.example.com/4");
  CHECK(r.citations[3].update == "E five.");
  CHECK(r.citations[3].citation_url == "https://news.example.com/4");
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(r.diagnostics[0].find("unresolved") != std::string::npos);
}

TEST_CASE("strip_wikitext markup") {
  auto a = strip_wikitext("'''Bold''' and ''it'' [[Target|label]] [[Plain]] [[File:x.jpg|thumb|cap]] "
                          "{{Infobox\n| a = {{nested}}\n}}x [https://e.com site] &amp; <!-- gone --> __NOTOC__");
  CHECK(a.text.find("Bold and it label Plain") != std::string::npos);
  CHECK(a.text.find("cap") == std::string::npos);
  CHECK(a.text.find("Infobox") == std::string::npos);
  CHECK(a.text.find("site") != std::string::npos);
  CHECK(a.text.find("&") != std::string::npos);
  CHECK(a.text.find("gone") == std::string::npos);
  CHECK(a.text.find("NOTOC") == std::string::npos);
  CHECK(a.anchors.empty());
  auto bad = strip_wikitext("Text {{unclosed template\nMore text.");
  CHECK_FALSE(bad.diagnostics.empty());
  CHECK(bad.text.find("More text.") != std::string::npos);
}

TEST_CASE("length filter boundaries are inclusive") {
  LengthFilter f;
  CHECK_FALSE(f.accepts(49, 20, 5));
  CHECK(f.accepts(50, 20, 5));
  CHECK(f.accepts(2000, 20, 5));
  CHECK_FALSE(f.accepts(2001, 20, 5));
  CHECK_FALSE(f.accepts(100, 19, 5));
  CHECK(f.accepts(100, 500, 5));
  CHECK_FALSE(f.accepts(100, 501, 5));
  CHECK_FALSE(f.accepts(100, 20, 4));
  CHECK(f.accepts(100, 20, 200));
  CHECK_FALSE(f.accepts(100, 20, 201));

  std::vector<Instance> xs{sized(49, 20, 5), sized(50, 20, 5), sized(2000, 20, 5), sized(2001, 20, 5)};
  auto kept = apply_filters(xs, f);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == xs[1]);
  CHECK(kept[1] == xs[2]);
  // counts are word tokens: "w." is two tokens
  std::vector<Instance> punct{{"a", words(48) + ".", words(20), words(5), "u", Split::Train}};
  CHECK(apply_filters(punct, f).size() == 0);
  punct[0].document = words(49) + ".";
  CHECK(apply_filters(punct, f).size() == 1);

  LengthFilter bad;
  bad.doc_min = 0;
  CHECK_THROWS_AS(bad.validate(), DatasetError);
  bad = LengthFilter{};
  bad.update_min = 300;
  CHECK_THROWS_AS(bad.validate(), DatasetError);
}

TEST_CASE("splits are article-disjoint, seeded and near the ratios") {
  std::vector<Instance> xs;
  for (int a = 0; a < 2000; ++a) {
    for (int i = 0; i < 1 + a % 4; ++i) xs.push_back({"article_" + std::to_string(a), "d", "c", "u", "x", Split::Train});
  }
  split_corpus(xs, SplitRatios{}, 7);
  std::map<std::string, Split> seen;
  std::map<Split, std::size_t> articles;
  for (const auto& x : xs) {
    auto [it, fresh] = seen.emplace(x.article_id, x.split);
    REQUIRE(it->second == x.split);
    if (fresh) ++articles[x.split];
    REQUIRE(x.split == split_for_article(x.article_id, SplitRatios{}, 7));
  }
  CHECK(articles[Split::Train] > 1500);
  CHECK(articles[Split::Train] < 1700);
  CHECK(articles[Split::Valid] > 140);
  CHECK(articles[Split::Test] > 140);

  std::size_t moved = 0;
  for (const auto& [id, s] : seen) moved += split_for_article(id, SplitRatios{}, 8) != s;
  CHECK(moved > 0);
  CHECK(split_for_article("x", {1.0, 0.0, 0.0}, 3) == Split::Train);
  CHECK(split_for_article("x", {0.0, 0.0, 1.0}, 3) == Split::Test);
  CHECK_THROWS_AS(SplitRatios({0.5, 0.5, 0.5}).validate(), DatasetError);
  CHECK_THROWS_AS(SplitRatios({1.2, -0.1, -0.1}).validate(), DatasetError);
}

TEST_CASE("split names") {
  CHECK(std::string(split_name(Split::Valid)) == "valid");
  CHECK(parse_split("test") == Split::Test);
  CHECK(parse_split("validation") == Split::Valid);
  CHECK_THROWS_AS(parse_split("holdout"), DatasetError);
}

TEST_CASE("url_host and whitelist matching") {
  CHECK(url_host("https://News.Example.com/a?b") == "news.example.com");
  CHECK(url_host("http://user:pw@host.example:8080/x") == "host.example");
  CHECK(url_host("//cdn.example.net/x") == "cdn.example.net");
  CHECK(url_host("https://trailing.example./") == "trailing.example");
  CHECK(url_host("ftp://a.example/") == "");
  CHECK(url_host("not a url") == "");

  DomainWhitelist w({"News.Example.com", ".bbc.example"});
  CHECK(w.size() == 2);
  CHECK(w.matches_host("news.example.com"));
  CHECK(w.matches_host("www.news.example.com"));
  CHECK_FALSE(w.matches_host("fakenews.example.com"));
  CHECK_FALSE(w.matches_host("example.com"));
  CHECK(w.matches_url("https://www.bbc.example/story"));
  CHECK_FALSE(w.matches_url("https://bbc.example.evil.org/"));
  CHECK_THROWS_AS(DomainWhitelist({"https://a.example"}), DatasetError);
  CHECK_THROWS_AS(DomainWhitelist({"a.example/path"}), DatasetError);
  CHECK_THROWS_AS(DomainWhitelist({"a.example:80"}), DatasetError);
  CHECK(DomainWhitelist::load(kFix + "/whitelist.txt").size() == 2);
  CHECK_THROWS_AS(DomainWhitelist::load("/nonexistent"), DatasetError);
}

TEST_CASE("html_to_text keeps the main body") {
  auto t = html_to_text(slurp(kFix + "/html/alder-flood.html"));
  CHECK(t.rfind("The Alder River burst its banks", 0) == 0);
  CHECK(t.find("tracking") == std::string::npos);
  CHECK(t.find("Home") == std::string::npos);
  CHECK(t.find("rights reserved") == std::string::npos);
  CHECK(t.find("recipes") == std::string::npos);
  CHECK(t.find("\"We have not") != std::string::npos);
  CHECK(html_to_text("<p>a   b\n c</p>") == "a b c");
  CHECK(html_to_text("") == "");
  CHECK_THROWS_AS(html_to_text(std::string("<p>x\0y</p>", 10)), DatasetError);
  CHECK(decode_entities("&lt;&gt;&amp;&quot;&#39;&#x41;&nbsp;") == "<>&\"'A ");  // nbsp folds to a space
  CHECK(decode_entities("&bogus; &#xZZ;") == "&bogus; &#xZZ;");
}

TEST_CASE("corpus JSON round trip and errors") {
  Instance x{"Ünïcode_Art", "Doc \"quoted\"\nline", "ctx\ttab", "upd", "https://a.example/?q=1&r=2", Split::Test};
  auto line = instance_to_json(x);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind("{\"article_id\":", 0) == 0);
  CHECK(line.find("\"split\":\"test\"") != std::string::npos);
  CHECK(instance_from_json(line) == x);
  CHECK_THROWS_AS(instance_from_json("{not json"), DatasetError);
  CHECK_THROWS_AS(instance_from_json("[1,2]"), DatasetError);
  CHECK_THROWS_AS(instance_from_json(R"({"article_id":1})"), DatasetError);

  auto path = (fs::temp_directory_path() / "ct_bad_corpus.jsonl").string();
  {
    std::ofstream out(path);
    out << line << "\n\nbroken\n";
  }
  try {
    read_corpus(path);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  fs::remove(path);
  CHECK_THROWS_AS(read_corpus("/nonexistent.jsonl"), DatasetError);
}

TEST_CASE("manifest resolves relative paths") {
  auto m = load_manifest(kFix + "/manifest.tsv");
  REQUIRE(m.size() == 4);
  auto p = m.at("https://news.example.com/alder-flood");
  CHECK(fs::path(p).is_absolute() == fs::path(kFix).is_absolute());
  CHECK(fs::exists(p));
  CHECK_THROWS_AS(load_manifest("/nonexistent.tsv"), DatasetError);
}

TEST_CASE("corpus statistics") {
  std::vector<Instance> xs{
      {"a", "the cat sat on the mat", "dogs bark", "cat sat", "u", Split::Train},
      {"b", "birds fly high", "cat naps", "cat cat", "u", Split::Test},
  };
  auto s = corpus_stats(xs, default_stopwords());
  CHECK(s.instances == 2);
  CHECK(s.articles == 2);
  CHECK(s.train == 1);
  CHECK(s.test == 1);
  // overlap(x,d): 1.0 and 0.0; overlap(x,s): 0.0 and 1.0
  CHECK(s.overlap_update_document == doctest::Approx(0.5));
  CHECK(s.overlap_update_context == doctest::Approx(0.5));
  CHECK(s.repetition_update == doctest::Approx(0.75));
  CHECK(s.mean_update_tokens == doctest::Approx(2.0));
  CHECK(stats_to_json(s).find("\"instances\": 2") != std::string::npos);
  CHECK_THROWS_AS(corpus_stats(std::vector<Instance>{}, default_stopwords()), DatasetError);
  xs[0].update = "";
  CHECK_THROWS_AS(corpus_stats(xs, default_stopwords()), DatasetError);
}
