#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tokrl/annotator.hpp"
#include "tokrl/corpus.hpp"
#include "tokrl/metrics.hpp"
#include "tokrl/policy.hpp"
#include "tokrl/rng.hpp"

namespace tokrl {

// Known metric names: "bleu", "chrf", "oracle_quality".  oracle_quality is
// 100 x the annotator sentence score; its corpus value is the segment mean,
// as is chrf's.  Corpus bleu is micro-averaged with smoothing off.
struct SystemScores {
  std::string name;
  std::vector<std::string> hyps;
  std::map<std::string, std::vector<double>> segment_scores;
  std::map<std::string, double> corpus_scores;
  std::vector<BleuCounts> bleu_counts;  // per segment, filled when bleu is requested
  std::vector<char> decode_failed;      // flagged segments score 0 on every metric
};

SystemScores evaluate_hypotheses(const std::string& name, const std::vector<std::string>& hyps,
                                 const std::vector<ParallelPair>& testset,
                                 const std::vector<std::string>& metrics,
                                 const Annotator* annotator);
// Greedy-decodes each source, then scores as evaluate_hypotheses.
SystemScores evaluate_system(const PolicyParams& params, const Vocabulary& vocab,
                             const std::vector<ParallelPair>& testset,
                             const std::vector<std::string>& metrics, const Annotator* annotator,
                             const std::string& name = "system");

struct BootstrapConfig {
  int n_samples = 100;
  int sample_size = 500;  // capped at the corpus size
  double alpha = 0.05;    // significance threshold
};

// Paired bootstrap p-value for "A > B": resamples segment indices with
// replacement n_samples times; p = fraction of resamples where the resampled
// mean of B is >= the resampled mean of A.  Deterministic given rng.
double paired_bootstrap(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                        int n_samples, int sample_size, Rng& rng);
// Corpus-statistic variant for micro-averaged BLEU: the resample statistic is
// BLEU of the summed per-segment counts instead of a mean of segment scores.
double paired_bootstrap_corpus_bleu(const std::vector<BleuCounts>& counts_a,
                                    const std::vector<BleuCounts>& counts_b, int n_samples,
                                    int sample_size, Rng& rng, const BleuConfig& cfg);

struct RankedSystem {
  std::string name;
  double score = 0;  // mean segment score, the sort key
  int cluster = 1;   // 1 = best; non-decreasing down the ranking
};
// Sorts by mean segment score descending (ties keep input order) and walks
// the list, opening a new cluster whenever a system is significantly worse
// than the current cluster's top member.
std::vector<RankedSystem> rank_clusters(const std::vector<std::string>& names,
                                        const std::vector<std::vector<double>>& segment_scores,
                                        const BootstrapConfig& cfg, Rng& rng);

struct LengthBucket {
  std::size_t lo = 0;  // inclusive char-length edge
  std::size_t hi = 0;  // exclusive; meaningless when open
  bool open = false;   // final unbounded bucket
  int count = 0;
  double mean = 0;
};
// Buckets segments by source character length over half-open [edge, next)
// ranges plus a final open bucket; empty buckets are omitted, so reported
// counts always sum to the corpus size.
std::vector<LengthBucket> length_bucket_report(
    const std::vector<double>& scores, const std::vector<std::string>& src_texts,
    const std::vector<std::size_t>& bins = {0, 100, 250, 500, 1000});

// Fraction of sliding windows (least-squares fit over `window` consecutive
// points, the whole series when shorter) whose fitted slope is negative.
double negative_slope_fraction(const std::vector<double>& series, int window = 50);

struct EvalCompareConfig {
  BootstrapConfig bootstrap;
  bool corpus_bootstrap_bleu = false;  // use summed-count BLEU as the bootstrap statistic
  std::vector<std::size_t> length_bins = {0, 100, 250, 500, 1000};
};

struct BucketRow {
  std::string system;
  std::string metric;
  LengthBucket bucket;
};

struct EvalReport {
  std::vector<std::string> metrics;
  std::vector<SystemScores> systems;
  // p_values[metric][i][j] = p for "system i > system j"; diagonal 1.
  std::map<std::string, std::vector<std::vector<double>>> p_values;
  // clusters[metric][i] = cluster index of systems[i], 1 = best.
  std::map<std::string, std::vector<int>> clusters;
  std::vector<BucketRow> bucket_table;
};

// Pairwise tests, cluster ranking, and length buckets over already-scored
// systems.  src_texts must align with every system's segment lists.
EvalReport make_eval_report(const std::vector<SystemScores>& systems,
                            const std::vector<std::string>& metrics,
                            const std::vector<std::string>& src_texts,
                            const EvalCompareConfig& cfg, Rng& rng);

void write_report_json(const EvalReport& report, const std::string& path);
// Long-format rows: system,metric,segment,score.
void write_segment_csv(const EvalReport& report, const std::string& path);
std::string format_report_table(const EvalReport& report);

}  // namespace tokrl
