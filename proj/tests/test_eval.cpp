#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokrl/errors.hpp"
#include "tokrl/eval.hpp"
#include "tokrl/rng.hpp"

using namespace tokrl;
using doctest::Approx;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small corpus with references long enough for unsmoothed 4-gram BLEU.
struct EvalWorld {
  TaskSpec spec;
  CipherLexicon lex;
  CorruptionContext ctx;
  Annotator annotator;
  std::vector<ParallelPair> pairs;

  EvalWorld() {
    spec.lexicon_size = 20;
    spec.min_len = 4;
    spec.max_len = 8;
    lex = make_lexicon(spec.lexicon_size);
    ctx = make_corruption_context(lex, spec);
    annotator = Annotator(ctx.synonyms);
    pairs = gen_synthetic(spec, 12, 404);
  }

  std::vector<std::string> refs() const {
    std::vector<std::string> out;
    for (const auto& p : pairs) out.push_back(p.ref);
    return out;
  }
  std::vector<std::string> srcs() const {
    std::vector<std::string> out;
    for (const auto& p : pairs) out.push_back(p.src);
    return out;
  }
};

}  // namespace

TEST_CASE("evaluate_hypotheses: reference copies score perfectly") {
  EvalWorld w;
  auto sys = evaluate_hypotheses("copy", w.refs(), w.pairs, {"bleu", "chrf", "oracle_quality"},
                                 &w.annotator);
  CHECK(sys.name == "copy");
  CHECK(sys.corpus_scores.at("bleu") == Approx(100.0));
  CHECK(sys.corpus_scores.at("chrf") == Approx(100.0));
  CHECK(sys.corpus_scores.at("oracle_quality") == Approx(100.0));
  for (double s : sys.segment_scores.at("oracle_quality")) CHECK(s == Approx(100.0));
  for (double s : sys.segment_scores.at("chrf")) CHECK(s == Approx(100.0));
  // Per-segment bleu is the smoothed sentence score.
  for (std::size_t i = 0; i < w.pairs.size(); ++i)
    CHECK(sys.segment_scores.at("bleu")[i] == Approx(sentence_bleu(w.pairs[i].ref, w.pairs[i].ref)));
  REQUIRE(sys.bleu_counts.size() == w.pairs.size());
  for (const auto& c : sys.bleu_counts) CHECK(c.matches == c.totals);
  for (char f : sys.decode_failed) CHECK(f == 0);
}

TEST_CASE("evaluate_hypotheses: empty outputs score zero on string metrics") {
  EvalWorld w;
  std::vector<std::string> empty(w.pairs.size(), "");
  auto sys = evaluate_hypotheses("empty", empty, w.pairs, {"bleu", "chrf"}, nullptr);
  CHECK(sys.corpus_scores.at("bleu") == 0.0);
  for (double s : sys.segment_scores.at("bleu")) CHECK(s == 0.0);
  for (double s : sys.segment_scores.at("chrf")) CHECK(s == 0.0);
}

TEST_CASE("evaluate_hypotheses validation") {
  EvalWorld w;
  std::vector<std::string> hyps = w.refs();
  CHECK_THROWS_AS(evaluate_hypotheses("x", hyps, {}, {"bleu"}, nullptr), ValidationError);
  hyps.pop_back();
  CHECK_THROWS_AS(evaluate_hypotheses("x", hyps, w.pairs, {"bleu"}, nullptr), ValidationError);
  hyps = w.refs();
  CHECK_THROWS_AS(evaluate_hypotheses("x", hyps, w.pairs, {}, nullptr), ValidationError);
  CHECK_THROWS_AS(evaluate_hypotheses("x", hyps, w.pairs, {"meteor"}, nullptr), ValidationError);
  CHECK_THROWS_AS(evaluate_hypotheses("x", hyps, w.pairs, {"oracle_quality"}, nullptr),
                  ValidationError);
  CHECK_THROWS_AS(evaluate_hypotheses("x", hyps, w.pairs, {"bleu", "bleu"}, nullptr),
                  ValidationError);
}

TEST_CASE("evaluate_system greedy-decodes and flags undecodable segments") {
  // Vocabulary larger than the policy's id space: segments whose pieces fall
  // outside it must be flagged and scored 0, not abort the evaluation.
  std::vector<std::string> corpus = {"aa bb cc dd ee ff gg hh"};
  Vocabulary vocab = build_vocab(corpus, 12);  // "gg" and "hh" land on ids 10 and 11
  PolicyConfig pc;
  pc.embed_dim = 4;
  pc.hidden_dim = 4;
  pc.vocab_size = 8;  // ids 8+ are out of range for the policy
  pc.max_len = 6;
  pc.seed = 1;
  PolicyParams params = init_policy(pc);

  std::vector<ParallelPair> testset = {{"t0", "aa bb", "aa bb aa bb"},
                                       {"t1", "gg hh", "aa bb aa bb"}};
  auto sys = evaluate_system(params, vocab, testset, {"bleu", "chrf"}, nullptr, "tiny");
  CHECK(sys.name == "tiny");
  REQUIRE(sys.hyps.size() == 2);
  REQUIRE(sys.decode_failed.size() == 2);
  CHECK(sys.decode_failed[0] == 0);
  CHECK(sys.decode_failed[1] == 1);
  CHECK(sys.hyps[1].empty());
  CHECK(sys.segment_scores.at("bleu")[1] == 0.0);
  CHECK(sys.segment_scores.at("chrf")[1] == 0.0);
  // The decoded segment agrees with scoring its hypothesis directly.
  auto direct = evaluate_hypotheses("d", {sys.hyps[0]}, {testset[0]}, {"chrf"}, nullptr);
  CHECK(sys.segment_scores.at("chrf")[0] == direct.segment_scores.at("chrf")[0]);
}

TEST_CASE("paired_bootstrap degenerate and shifted inputs") {
  std::vector<double> a(50), b(50);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 40.0 + static_cast<double>(i % 7);
  SUBCASE("identical systems tie every resample") {
    Rng rng(7);
    CHECK(paired_bootstrap(a, a, 200, 50, rng) == 1.0);
  }
  SUBCASE("a uniform shift decides every resample") {
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] - 10.0;
    Rng rng(7);
    CHECK(paired_bootstrap(a, b, 200, 50, rng) == 0.0);
    Rng rng2(7);
    CHECK(paired_bootstrap(b, a, 200, 50, rng2) == 1.0);
  }
  SUBCASE("deterministic given the rng state") {
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] + (i % 3 == 0 ? 2.0 : -1.0);
    Rng r1(99), r2(99);
    CHECK(paired_bootstrap(a, b, 300, 40, r1) == paired_bootstrap(a, b, 300, 40, r2));
  }
  SUBCASE("sample_size is capped at the corpus size") {
    Rng rng(7);
    CHECK(paired_bootstrap(a, a, 50, 100000, rng) == 1.0);
  }
  SUBCASE("validation") {
    Rng rng(7);
    CHECK_THROWS_AS(paired_bootstrap(a, std::vector<double>(49, 0.0), 10, 10, rng),
                    ValidationError);
    CHECK_THROWS_AS(paired_bootstrap({1.0}, {1.0}, 10, 10, rng), ValidationError);
    CHECK_THROWS_AS(paired_bootstrap(a, b, 0, 10, rng), ValidationError);
    CHECK_THROWS_AS(paired_bootstrap(a, b, 10, 0, rng), ValidationError);
  }
}

TEST_CASE("paired_bootstrap calibration: type-I error and power") {
  Rng gen(1234);
  int false_positives = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a(100), b(100);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = 50.0 + 10.0 * gen.normal();
      b[i] = 50.0 + 10.0 * gen.normal();
    }
    Rng rng(derive_seed(777, static_cast<std::uint64_t>(t)));
    if (paired_bootstrap(a, b, 100, 100, rng) < 0.05) ++false_positives;
  }
  // Nominal rate is 5%; allow sampling slack.
  CHECK(static_cast<double>(false_positives) / trials <= 0.15);

  int detections = 0;
  const int power_trials = 50;
  for (int t = 0; t < power_trials; ++t) {
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < a.size(); ++i) {
      b[i] = 50.0 + 10.0 * gen.normal();
      a[i] = b[i] + 5.0 + 10.0 * gen.normal();
    }
    Rng rng(derive_seed(778, static_cast<std::uint64_t>(t)));
    if (paired_bootstrap(a, b, 100, 200, rng) < 0.05) ++detections;
  }
  CHECK(static_cast<double>(detections) / power_trials >= 0.9);
}

TEST_CASE("paired_bootstrap_corpus_bleu uses summed-count BLEU as the statistic") {
  EvalWorld w;
  auto perfect = evaluate_hypotheses("a", w.refs(), w.pairs, {"bleu"}, nullptr);
  // Corrupt half the segments for the weaker system.
  std::vector<std::string> worse_hyps = w.refs();
  for (std::size_t i = 0; i < worse_hyps.size(); i += 2)
    worse_hyps[i] = corrupt(w.pairs[i], CorruptionRates{0.0, 1.0, 0.0}, 900 + i, w.ctx).hyp;
  auto worse = evaluate_hypotheses("b", worse_hyps, w.pairs, {"bleu"}, nullptr);
  REQUIRE(worse.corpus_scores.at("bleu") < 100.0);

  Rng r1(5), r2(5), r3(5);
  BleuConfig cfg{4, BleuSmoothing::none, 0.1};
  CHECK(paired_bootstrap_corpus_bleu(perfect.bleu_counts, perfect.bleu_counts, 100, 12, r1, cfg) ==
        1.0);
  CHECK(paired_bootstrap_corpus_bleu(perfect.bleu_counts, worse.bleu_counts, 200, 12, r2, cfg) <=
        0.05);
  CHECK_THROWS_AS(paired_bootstrap_corpus_bleu(perfect.bleu_counts, {}, 10, 10, r3, cfg),
                  ValidationError);
}

TEST_CASE("rank_clusters groups statistically indistinguishable systems") {
  BootstrapConfig cfg;
  cfg.n_samples = 200;
  cfg.sample_size = 100;
  std::vector<double> high(100, 90.0), mid(100, 50.0), low(100, 10.0);

  SUBCASE("identical systems share cluster 1") {
    Rng rng(3);
    auto ranked = rank_clusters({"a", "b", "c"}, {mid, mid, mid}, cfg, rng);
    REQUIRE(ranked.size() == 3);
    for (const auto& r : ranked) CHECK(r.cluster == 1);
    // Ties keep input order.
    CHECK(ranked[0].name == "a");
    CHECK(ranked[1].name == "b");
    CHECK(ranked[2].name == "c");
  }
  SUBCASE("separated systems get one cluster each, sorted by score") {
    Rng rng(3);
    auto ranked = rank_clusters({"worst", "best", "middle"}, {low, high, mid}, cfg, rng);
    CHECK(ranked[0].name == "best");
    CHECK(ranked[0].score == Approx(90.0));
    CHECK(ranked[0].cluster == 1);
    CHECK(ranked[1].name == "middle");
    CHECK(ranked[1].cluster == 2);
    CHECK(ranked[2].name == "worst");
    CHECK(ranked[2].cluster == 3);
  }
  SUBCASE("a tied pair shares a cluster above a clearly worse system") {
    Rng rng(3);
    auto ranked = rank_clusters({"a", "b", "c"}, {mid, mid, low}, cfg, rng);
    CHECK(ranked[0].cluster == 1);
    CHECK(ranked[1].cluster == 1);
    CHECK(ranked[2].cluster == 2);
  }
  SUBCASE("validation") {
    Rng rng(3);
    CHECK_THROWS_AS(rank_clusters({}, {}, cfg, rng), ValidationError);
    CHECK_THROWS_AS(rank_clusters({"a"}, {mid, low}, cfg, rng), ValidationError);
    CHECK_THROWS_AS(rank_clusters({"a", "b"}, {mid, std::vector<double>(7, 1.0)}, cfg, rng),
                    ValidationError);
  }
}

TEST_CASE("length_bucket_report") {
  SUBCASE("uniform lengths collapse into one bucket") {
    std::vector<double> scores = {10, 20, 30};
    std::vector<std::string> srcs(3, std::string(50, 'x'));
    auto buckets = length_bucket_report(scores, srcs);
    REQUIRE(buckets.size() == 1);
    CHECK(buckets[0].lo == 0);
    CHECK(buckets[0].hi == 100);
    CHECK(!buckets[0].open);
    CHECK(buckets[0].count == 3);
    CHECK(buckets[0].mean == Approx(20.0));
  }
  SUBCASE("half-open ranges, clamping, and the final open bucket") {
    std::vector<std::string> srcs = {std::string(5, 'x'), std::string(10, 'x'),
                                     std::string(19, 'x'), std::string(20, 'x'),
                                     std::string(90, 'x')};
    std::vector<double> scores = {1, 2, 3, 4, 5};
    auto buckets = length_bucket_report(scores, srcs, {10, 20});
    REQUIRE(buckets.size() == 2);
    CHECK(buckets[0].lo == 10);
    CHECK(buckets[0].hi == 20);
    CHECK(buckets[0].count == 3);  // length 5 clamps into the first bucket
    CHECK(buckets[0].mean == Approx(2.0));
    CHECK(buckets[1].lo == 20);
    CHECK(buckets[1].open);
    CHECK(buckets[1].count == 2);
    CHECK(buckets[1].mean == Approx(4.5));
    int total = 0;
    for (const auto& b : buckets) total += b.count;
    CHECK(total == 5);
  }
  SUBCASE("empty buckets are omitted") {
    std::vector<std::string> srcs = {"ab", std::string(600, 'x')};
    auto buckets = length_bucket_report({1.0, 2.0}, srcs);
    REQUIRE(buckets.size() == 2);
    CHECK(buckets[0].lo == 0);
    CHECK(buckets[1].lo == 500);
    CHECK(!buckets[1].open);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(length_bucket_report({1.0}, {}), ValidationError);
    CHECK_THROWS_AS(length_bucket_report({1.0}, {"a"}, {}), ValidationError);
    CHECK_THROWS_AS(length_bucket_report({1.0}, {"a"}, {5, 5}), ValidationError);
  }
}

TEST_CASE("negative_slope_fraction") {
  std::vector<double> inc, dec;
  for (int i = 0; i < 100; ++i) {
    inc.push_back(i);
    dec.push_back(-i);
  }
  CHECK(negative_slope_fraction(inc) == 0.0);
  CHECK(negative_slope_fraction(dec) == 1.0);
  CHECK(negative_slope_fraction(std::vector<double>(80, 3.5)) == 0.0);
  // Ramp up then down: 5 windows of 3 with slopes +1, +1, 0, -1, -1.
  CHECK(negative_slope_fraction({0, 1, 2, 3, 2, 1, 0}, 3) == Approx(0.4));
  // Series shorter than the window degrades to one whole-series fit.
  CHECK(negative_slope_fraction({5, 4, 3}, 50) == 1.0);
  CHECK(negative_slope_fraction({3, 4, 5}, 50) == 0.0);
  CHECK_THROWS_AS(negative_slope_fraction({1.0, 2.0}, 1), ValidationError);
  CHECK_THROWS_AS(negative_slope_fraction({1.0}, 10), ValidationError);
}

TEST_CASE("make_eval_report assembles pairwise tests, clusters, and buckets") {
  EvalWorld w;
  auto copy = evaluate_hypotheses("copy", w.refs(), w.pairs, {"bleu", "oracle_quality"},
                                  &w.annotator);
  std::vector<std::string> degraded = w.refs();
  for (std::size_t i = 0; i < degraded.size(); ++i)
    degraded[i] = corrupt(w.pairs[i], CorruptionRates{0.0, 1.0, 0.0}, 30 + i, w.ctx).hyp;
  auto worse = evaluate_hypotheses("worse", degraded, w.pairs, {"bleu", "oracle_quality"},
                                   &w.annotator);
  EvalCompareConfig cfg;
  cfg.bootstrap.n_samples = 200;
  Rng rng(8);
  auto report = make_eval_report({copy, worse}, {"bleu", "oracle_quality"}, w.srcs(), cfg, rng);

  REQUIRE(report.systems.size() == 2);
  REQUIRE(report.metrics.size() == 2);
  for (const auto& m : report.metrics) {
    const auto& pv = report.p_values.at(m);
    REQUIRE(pv.size() == 2);
    CHECK(pv[0][0] == 1.0);
    CHECK(pv[1][1] == 1.0);
    // copy strictly dominates on every segment: p[copy > worse] = 0.
    CHECK(pv[0][1] == 0.0);
    CHECK(pv[1][0] == 1.0);
    const auto& cl = report.clusters.at(m);
    REQUIRE(cl.size() == 2);
    CHECK(cl[0] == 1);
    CHECK(cl[1] == 2);
  }
  // Short sources all land in the default first bucket: one row per
  // system x metric pair.
  CHECK(report.bucket_table.size() == 4);
  for (const auto& row : report.bucket_table) {
    CHECK(row.bucket.count == static_cast<int>(w.pairs.size()));
    CHECK(row.bucket.lo == 0);
  }

  SUBCASE("corpus-count bootstrap path") {
    cfg.corpus_bootstrap_bleu = true;
    Rng rng2(8);
    auto report2 = make_eval_report({copy, worse}, {"bleu"}, w.srcs(), cfg, rng2);
    CHECK(report2.p_values.at("bleu")[0][1] <= 0.05);
    // Dropping the counts breaks the requirement.
    auto stripped = copy;
    stripped.bleu_counts.clear();
    CHECK_THROWS_AS(make_eval_report({stripped, worse}, {"bleu"}, w.srcs(), cfg, rng2),
                    ValidationError);
  }
  SUBCASE("validation") {
    Rng rng2(8);
    CHECK_THROWS_AS(make_eval_report({}, {"bleu"}, w.srcs(), cfg, rng2), ValidationError);
    CHECK_THROWS_AS(make_eval_report({copy, copy}, {"bleu"}, w.srcs(), cfg, rng2),
                    ValidationError);
    CHECK_THROWS_AS(make_eval_report({copy}, {"chrf"}, w.srcs(), cfg, rng2), ValidationError);
    std::vector<std::string> no_srcs;  // wrong source count
    CHECK_THROWS_AS(make_eval_report({copy}, {"bleu"}, no_srcs, cfg, rng2), ValidationError);
  }
}

TEST_CASE("report writers produce parseable files") {
  EvalWorld w;
  auto copy =
      evaluate_hypotheses("copy", w.refs(), w.pairs, {"bleu", "oracle_quality"}, &w.annotator);
  EvalCompareConfig cfg;
  cfg.bootstrap.n_samples = 50;
  Rng rng(8);
  auto report = make_eval_report({copy}, {"bleu", "oracle_quality"}, w.srcs(), cfg, rng);

  SUBCASE("metrics json round trip") {
    std::string path = temp_path("tokrl_report.json");
    write_report_json(report, path);
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    CHECK(j["metrics"].size() == 2);
    REQUIRE(j["systems"].size() == 1);
    CHECK(j["systems"][0]["name"] == "copy");
    CHECK(j["systems"][0]["corpus"]["bleu"].get<double>() == Approx(100.0));
    CHECK(j["systems"][0]["segments"]["oracle_quality"].size() == w.pairs.size());
    CHECK(j["systems"][0]["decode_failures"].empty());
    CHECK(j["p_values"]["bleu"][0][0] == 1.0);
    CHECK(j["clusters"]["bleu"][0] == 1);
    REQUIRE(j["buckets"].size() == 2);
    CHECK(j["buckets"][0]["system"] == "copy");
    CHECK(j["buckets"][0]["count"] == static_cast<int>(w.pairs.size()));
    std::remove(path.c_str());
  }
  SUBCASE("segment csv has one row per system, metric, and segment") {
    std::string path = temp_path("tokrl_segments.csv");
    write_segment_csv(report, path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "system,metric,segment,score");
    int rows = 0;
    double first_score = -1.0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string sys, metric, seg, score;
      REQUIRE(std::getline(ls, sys, ','));
      REQUIRE(std::getline(ls, metric, ','));
      REQUIRE(std::getline(ls, seg, ','));
      REQUIRE(std::getline(ls, score, ','));
      CHECK(sys == "copy");
      if (rows == 0) first_score = std::stod(score);
      ++rows;
    }
    CHECK(rows == static_cast<int>(2 * w.pairs.size()));
    CHECK(first_score == Approx(copy.segment_scores.at("bleu")[0]));
    std::remove(path.c_str());
  }
  SUBCASE("text table mentions every section") {
    std::string table = format_report_table(report);
    CHECK(table.find("== corpus scores") != std::string::npos);
    CHECK(table.find("copy") != std::string::npos);
    CHECK(table.find("p[A > B]") != std::string::npos);
    CHECK(table.find("length buckets") != std::string::npos);
  }
}
