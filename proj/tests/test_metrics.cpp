#include <doctest.h>

#include <cmath>
#include <random>

#include "ct/metrics.hpp"
#include "metric_oracle.hpp"

using namespace ct;
using ct::oracle::brute_lcs;
using ct::oracle::kVectors;

namespace {

TokenSeq words(const char* s) { return tokenize(s); }

TokenSeq random_seq(std::mt19937_64& rng, std::size_t max_len, int alphabet) {
  TokenSeq s(rng() % (max_len + 1));
  for (auto& t : s) t = std::string(1, static_cast<char>('a' + rng() % static_cast<unsigned>(alphabet)));
  return s;
}

}  // namespace

TEST_CASE("frozen metric vectors") {
  for (const auto& v : kVectors) {
    CAPTURE(v.cand);
    CAPTURE(v.ref);
    auto c = words(v.cand), r = words(v.ref);
    CHECK(std::abs(rouge_l_f1(c, r) - v.rouge_l) < 1e-9);
    CHECK(std::abs(rouge_1_recall(c, r) - v.rouge_1) < 1e-9);
    CHECK(std::abs(bleu(c, r) - v.bleu) < 1e-9);
    CHECK(std::abs(meteor_lite(c, r) - v.meteor) < 1e-9);
  }
}

TEST_CASE("lcs_length") {
  CHECK(lcs_length(words("x y z"), words("x y z")) == 3);
  CHECK(lcs_length(words("a b"), words("c d")) == 0);
  CHECK(lcs_length(words("a b c d e"), words("a c e")) == 3);
  CHECK(lcs_length({}, words("a")) == 0);
}

TEST_CASE("lcs_length agrees with brute force on random pairs") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_seq(rng, 8, 4), b = random_seq(rng, 8, 4);
    REQUIRE(lcs_length(a, b) == brute_lcs(a, b));
  }
}

TEST_CASE("empty references are errors, empty candidates score zero") {
  CHECK_THROWS_AS(rouge_l_f1(words("a"), {}), MetricError);
  CHECK_THROWS_AS(rouge_1_recall(words("a"), {}), MetricError);
  CHECK_THROWS_AS(bleu(words("a"), {}), MetricError);
  CHECK_THROWS_AS(meteor_lite(words("a"), {}), MetricError);
  CHECK(rouge_l_f1({}, words("a")) == 0.0);
  CHECK(rouge_1_recall({}, words("a")) == 0.0);
  CHECK(bleu({}, words("a b")) == 0.0);
  CHECK(meteor_lite({}, words("a")) == 0.0);
}

TEST_CASE("rouge_l_f1 asymmetry when lengths differ") {
  // F1 is symmetric in P and R, so swapping only matters through LCS; with equal
  // LCS the score is symmetric. ROUGE-1 recall is the asymmetric one.
  auto a = words("the cat"), b = words("the cat sat");
  CHECK(rouge_l_f1(a, b) == doctest::Approx(rouge_l_f1(b, a)));
  CHECK(rouge_1_recall(a, b) == doctest::Approx(2.0 / 3.0));
  CHECK(rouge_1_recall(b, a) == 1.0);
}

TEST_CASE("meteor breakdown") {
  auto m = meteor_lite_breakdown(words("x y z"), words("x y z"));
  CHECK(m.matches == 3);
  CHECK(m.chunks == 1);
  CHECK(m.fmean == 1.0);
  CHECK(m.penalty == doctest::Approx(0.5 / 27.0));
  auto one = meteor_lite_breakdown(words("a x"), words("a y"));
  CHECK(one.precision == 0.5);
  CHECK(one.recall == 0.5);
  CHECK(one.fmean == doctest::Approx(0.5));
  CHECK(one.penalty == doctest::Approx(0.5));
  auto swapped = meteor_lite_breakdown(words("c d a b"), words("a b c d"));
  CHECK(swapped.chunks == 2);
}

TEST_CASE("bleu options") {
  auto c = words("a b x d"), r = words("a b c d");
  // Unsmoothed: no trigram match, so the geometric mean is zero.
  CHECK(bleu(c, r, {4, BleuSmoothing::None}) == 0.0);
  CHECK(bleu(c, r, {1, BleuSmoothing::None}) == doctest::Approx(0.75));
  // Brevity penalty: 2-token identity prefix of a 4-token reference.
  CHECK(bleu(words("a b"), r, {1, BleuSmoothing::None}) == doctest::Approx(std::exp(1.0 - 2.0)));
  CHECK(bleu(c, r, {1, BleuSmoothing::AddOne}) == doctest::Approx(0.75));
}

TEST_CASE("bleu can exceed unigram precision") {
  // Smoothed higher orders can lift the mean above p1.
  CHECK(bleu(words("a b c d e f"), words("a")) > 1.0 / 6.0);
  // Clipping alone can do it without smoothing.
  auto c = words("a a b b a a a"), r = words("b b a a a b b");
  CHECK(bleu(c, r, {4, BleuSmoothing::None}) > 4.0 / 7.0);
}

TEST_CASE("metric bounds and identity on random pairs") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    auto c = random_seq(rng, 10, 5), r = random_seq(rng, 10, 5);
    if (r.empty()) continue;
    for (double s : {rouge_l_f1(c, r), rouge_1_recall(c, r), bleu(c, r), meteor_lite(c, r)}) {
      REQUIRE(s >= 0.0);
      REQUIRE(s <= 1.0);
    }
    REQUIRE(rouge_l_f1(r, r) == 1.0);
    REQUIRE(rouge_1_recall(r, r) == 1.0);
  }
}

TEST_CASE("bootstrap_ci") {
  std::vector<double> constant(100, 0.5);
  auto ci = bootstrap_ci(constant, 0.95, 1000, 3);
  CHECK(ci.low == 0.5);
  CHECK(ci.high == 0.5);

  std::vector<double> half(100, 0.0);
  std::fill(half.begin() + 50, half.end(), 1.0);
  auto a = bootstrap_ci(half, 0.95, 1000, 42);
  auto b = bootstrap_ci(half, 0.95, 1000, 42);
  CHECK(a.low == b.low);
  CHECK(a.high == b.high);
  CHECK(a.low < 0.5);
  CHECK(a.high > 0.5);
  CHECK(a.low == doctest::Approx(0.4).epsilon(0.05));
  CHECK(a.high == doctest::Approx(0.6).epsilon(0.05));

  CHECK_THROWS_AS(bootstrap_ci({}, 0.95, 1000, 1), MetricError);
  CHECK_THROWS(bootstrap_ci(constant, 1.5, 1000, 1));
  CHECK_THROWS(bootstrap_ci(constant, 0.95, 0, 1));
}

TEST_CASE("bootstrap_ci is ordered on random inputs") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> xs(1 + rng() % 40);
    for (auto& x : xs) x = u(rng);
    auto ci = bootstrap_ci(xs, 0.95, 200, rng());
    REQUIRE(ci.low <= ci.high);
    REQUIRE(ci.low >= *std::min_element(xs.begin(), xs.end()) - 1e-12);  // summation rounding
    REQUIRE(ci.high <= *std::max_element(xs.begin(), xs.end()) + 1e-12);
  }
}

TEST_CASE("score_instances matches the serial reference and summarize brackets means") {
  std::mt19937_64 rng(12);
  std::vector<ScoredPair> pairs;
  for (int i = 0; i < 300; ++i) {
    auto r = random_seq(rng, 10, 6);
    if (r.empty()) r.push_back("a");
    pairs.push_back({"i" + std::to_string(i), random_seq(rng, 10, 6), r});
  }
  auto par = score_instances(pairs);
  auto ser = score_instances_serial(pairs);
  REQUIRE(par.size() == ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    REQUIRE(par[i].instance_id == ser[i].instance_id);
    REQUIRE(par[i].rouge_l == ser[i].rouge_l);
    REQUIRE(par[i].bleu == ser[i].bleu);
    REQUIRE(par[i].meteor == ser[i].meteor);
    REQUIRE(par[i].repetition == ser[i].repetition);
  }
  auto rep = summarize("sys", par, 7, 500);
  for (auto m : kAllMetrics) {
    CHECK(rep.ci(m).low <= rep.corpus_mean(m));
    CHECK(rep.corpus_mean(m) <= rep.ci(m).high);
  }
  auto again = summarize("sys", ser, 7, 500);
  CHECK(again.ci(Metric::Bleu).low == rep.ci(Metric::Bleu).low);
}

TEST_CASE("repetition summary and tables") {
  std::vector<ScoredPair> pairs = {
      {"a", words("a a a a"), words("a b")},
      {"b", words("x y"), words("x y")},
      {"c", {}, words("x")},
      {"d", words("b b c"), words("b")},
  };
  auto scores = score_instances(pairs);
  CHECK(scores[0].repetition == 0.25);
  CHECK_FALSE(scores[2].repetition.has_value());
  auto r = repetition_summary(scores);
  CHECK(r.counted == 3);
  CHECK(r.below_half == 1);
  CHECK(r.percent_below_half() == doctest::Approx(100.0 / 3.0));

  std::vector<ScoredPair> same = {{"a", words("x y"), words("x y")}};
  std::vector<MetricReport> reports{summarize("Identity", score_instances(same), 1, 100)};
  auto tsv = format_tsv(reports);
  CHECK(tsv == "system\tROUGE-L\tCI-low\tCI-high\tBLEU\tMETEOR-lite\nIdentity\t100.00\t100.00\t100.00\t100.00\t93.75\n");
  CHECK(format_aligned(reports).find("Identity") != std::string::npos);
}
