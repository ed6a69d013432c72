#include "tokrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tokrl/errors.hpp"
#include "tokrl/jsonl.hpp"
#include "tokrl/parallel.hpp"

namespace tokrl {

namespace {

// N-gram counts ignore smoothing, so one count set serves the corpus score
// and the corpus bootstrap.
const BleuConfig kCorpusBleuCfg{4, BleuSmoothing::none, 0.1};

void validate_metrics(const std::vector<std::string>& metrics, const Annotator* annotator) {
  require(!metrics.empty(), "metric list is empty");
  for (const auto& m : metrics) {
    require(m == "bleu" || m == "chrf" || m == "oracle_quality", "unknown metric '" + m + "'");
    if (m == "oracle_quality")
      require(annotator != nullptr, "oracle_quality needs an annotator");
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

BleuCounts sum_counts(const std::vector<BleuCounts>& counts, const std::vector<std::size_t>& idx) {
  BleuCounts total;
  total.matches.assign(counts.front().matches.size(), 0);
  total.totals.assign(counts.front().totals.size(), 0);
  for (std::size_t i : idx) {
    const BleuCounts& c = counts[i];
    for (std::size_t k = 0; k < total.matches.size(); ++k) {
      total.matches[k] += c.matches[k];
      total.totals[k] += c.totals[k];
    }
    total.hyp_len += c.hyp_len;
    total.ref_len += c.ref_len;
  }
  return total;
}

SystemScores score_hypotheses(const std::string& name, const std::vector<std::string>& hyps,
                              const std::vector<char>& failed,
                              const std::vector<ParallelPair>& testset,
                              const std::vector<std::string>& metrics,
                              const Annotator* annotator) {
  require(!testset.empty(), "empty testset");
  require(hyps.size() == testset.size(), "hypothesis count disagrees with testset size");
  validate_metrics(metrics, annotator);

  SystemScores out;
  out.name = name;
  out.hyps = hyps;
  out.decode_failed = failed;
  bool want_bleu = false;
  std::vector<std::vector<double>*> slots(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    auto [it, fresh] = out.segment_scores.emplace(metrics[m], std::vector<double>());
    require(fresh, "duplicate metric '" + metrics[m] + "'");
    it->second.assign(testset.size(), 0.0);
    slots[m] = &it->second;
    if (metrics[m] == "bleu") want_bleu = true;
  }
  if (want_bleu) out.bleu_counts.assign(testset.size(), BleuCounts{});

  parallel_for(testset.size(), [&](std::size_t i) {
    const std::string& hyp = failed[i] ? std::string() : hyps[i];
    if (want_bleu)
      out.bleu_counts[i] =
          bleu_counts(split_whitespace(hyp), split_whitespace(testset[i].ref), kCorpusBleuCfg);
    if (failed[i]) return;  // flagged segments keep score 0
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      if (metrics[m] == "bleu") {
        (*slots[m])[i] = sentence_bleu(hyp, testset[i].ref);
      } else if (metrics[m] == "chrf") {
        (*slots[m])[i] = chrf(hyp, testset[i].ref);
      } else {
        (*slots[m])[i] = 100.0 * annotator->annotate(hyp, testset[i].ref).sentence_score;
      }
    }
  });

  for (const auto& m : metrics) {
    if (m == "bleu") {
      std::vector<std::size_t> all(testset.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      out.corpus_scores[m] = bleu_from_counts(sum_counts(out.bleu_counts, all), kCorpusBleuCfg);
    } else {
      out.corpus_scores[m] = mean_of(out.segment_scores.at(m));
    }
  }
  return out;
}

}  // namespace

SystemScores evaluate_hypotheses(const std::string& name, const std::vector<std::string>& hyps,
                                 const std::vector<ParallelPair>& testset,
                                 const std::vector<std::string>& metrics,
                                 const Annotator* annotator) {
  return score_hypotheses(name, hyps, std::vector<char>(testset.size(), 0), testset, metrics,
                          annotator);
}

SystemScores evaluate_system(const PolicyParams& params, const Vocabulary& vocab,
                             const std::vector<ParallelPair>& testset,
                             const std::vector<std::string>& metrics, const Annotator* annotator,
                             const std::string& name) {
  require(!testset.empty(), "empty testset");
  validate_metrics(metrics, annotator);
  std::vector<std::string> hyps(testset.size());
  std::vector<char> failed(testset.size(), 0);
  parallel_for(testset.size(), [&](std::size_t i) {
    try {
      std::vector<int> src = tokenize(vocab, testset[i].src).piece_ids();
      hyps[i] = render_pieces(vocab, greedy_decode(params, src, params.cfg.max_len));
    } catch (const std::exception&) {
      failed[i] = 1;
      hyps[i].clear();
    }
  });
  return score_hypotheses(name, hyps, failed, testset, metrics, annotator);
}

double paired_bootstrap(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                        int n_samples, int sample_size, Rng& rng) {
  require(scores_a.size() == scores_b.size(), "score lists must be equal length");
  require(scores_a.size() >= 2, "paired bootstrap needs at least 2 segments");
  require(n_samples >= 1, "n_samples must be >= 1");
  require(sample_size >= 1, "sample_size must be >= 1");
  std::size_t m = std::min(static_cast<std::size_t>(sample_size), scores_a.size());
  std::uint64_t base = rng.u64();
  std::vector<char> b_wins(n_samples, 0);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t s) {
    Rng r(derive_seed(base, s));
    double sa = 0.0, sb = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t idx = r.uniform_int(scores_a.size());
      sa += scores_a[idx];
      sb += scores_b[idx];
    }
    b_wins[s] = sb >= sa ? 1 : 0;
  });
  long long wins = 0;
  for (char w : b_wins) wins += w;
  return static_cast<double>(wins) / static_cast<double>(n_samples);
}

double paired_bootstrap_corpus_bleu(const std::vector<BleuCounts>& counts_a,
                                    const std::vector<BleuCounts>& counts_b, int n_samples,
                                    int sample_size, Rng& rng, const BleuConfig& cfg) {
  require(counts_a.size() == counts_b.size(), "count lists must be equal length");
  require(counts_a.size() >= 2, "paired bootstrap needs at least 2 segments");
  require(n_samples >= 1, "n_samples must be >= 1");
  require(sample_size >= 1, "sample_size must be >= 1");
  std::size_t m = std::min(static_cast<std::size_t>(sample_size), counts_a.size());
  std::uint64_t base = rng.u64();
  std::vector<char> b_wins(n_samples, 0);
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t s) {
    Rng r(derive_seed(base, s));
    std::vector<std::size_t> idx(m);
    for (std::size_t k = 0; k < m; ++k) idx[k] = r.uniform_int(counts_a.size());
    double a = bleu_from_counts(sum_counts(counts_a, idx), cfg);
    double b = bleu_from_counts(sum_counts(counts_b, idx), cfg);
    b_wins[s] = b >= a ? 1 : 0;
  });
  long long wins = 0;
  for (char w : b_wins) wins += w;
  return static_cast<double>(wins) / static_cast<double>(n_samples);
}

std::vector<RankedSystem> rank_clusters(const std::vector<std::string>& names,
                                        const std::vector<std::vector<double>>& segment_scores,
                                        const BootstrapConfig& cfg, Rng& rng) {
  require(!names.empty(), "rank_clusters needs at least one system");
  require(names.size() == segment_scores.size(), "name and score list counts disagree");
  for (const auto& s : segment_scores)
    require(s.size() == segment_scores.front().size(), "segment counts disagree across systems");

  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> means(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) means[i] = mean_of(segment_scores[i]);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });

  std::vector<RankedSystem> ranked;
  ranked.reserve(names.size());
  int cluster = 1;
  std::size_t top = order[0];
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::size_t i = order[k];
    if (k > 0) {
      double p = paired_bootstrap(segment_scores[top], segment_scores[i], cfg.n_samples,
                                  cfg.sample_size, rng);
      if (p < cfg.alpha) {  // significantly worse than the cluster's top member
        ++cluster;
        top = i;
      }
    }
    ranked.push_back({names[i], means[i], cluster});
  }
  return ranked;
}

std::vector<LengthBucket> length_bucket_report(const std::vector<double>& scores,
                                               const std::vector<std::string>& src_texts,
                                               const std::vector<std::size_t>& bins) {
  require(scores.size() == src_texts.size(), "score and source counts disagree");
  require(!bins.empty(), "bins must be non-empty");
  for (std::size_t i = 1; i < bins.size(); ++i)
    require(bins[i] > bins[i - 1], "bins must be strictly increasing");

  std::vector<double> sums(bins.size(), 0.0);
  std::vector<int> counts(bins.size(), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t len = src_texts[i].size();
    // Largest edge <= len; lengths below the first edge clamp into bucket 0.
    std::size_t b = 0;
    while (b + 1 < bins.size() && len >= bins[b + 1]) ++b;
    sums[b] += scores[i];
    counts[b] += 1;
  }
  std::vector<LengthBucket> out;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (counts[b] == 0) continue;
    LengthBucket bucket;
    bucket.lo = bins[b];
    bucket.open = b + 1 == bins.size();
    bucket.hi = bucket.open ? 0 : bins[b + 1];
    bucket.count = counts[b];
    bucket.mean = sums[b] / counts[b];
    out.push_back(bucket);
  }
  return out;
}

double negative_slope_fraction(const std::vector<double>& series, int window) {
  require(window >= 2, "window must be >= 2");
  require(series.size() >= 2, "series needs at least 2 points");
  std::size_t w = std::min(static_cast<std::size_t>(window), series.size());
  std::size_t n_windows = series.size() - w + 1;
  // Least-squares slope; the intercept term vanishes since sum(t - tbar) = 0.
  double tbar = static_cast<double>(w - 1) / 2.0;
  double den = 0.0;
  for (std::size_t t = 0; t < w; ++t) den += (t - tbar) * (t - tbar);
  int negative = 0;
  for (std::size_t s = 0; s < n_windows; ++s) {
    double num = 0.0;
    for (std::size_t t = 0; t < w; ++t) num += (t - tbar) * series[s + t];
    if (num / den < 0.0) ++negative;
  }
  return static_cast<double>(negative) / static_cast<double>(n_windows);
}

EvalReport make_eval_report(const std::vector<SystemScores>& systems,
                            const std::vector<std::string>& metrics,
                            const std::vector<std::string>& src_texts,
                            const EvalCompareConfig& cfg, Rng& rng) {
  require(!systems.empty(), "no systems to report");
  require(!metrics.empty(), "metric list is empty");
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (std::size_t j = i + 1; j < systems.size(); ++j)
      require(systems[i].name != systems[j].name, "duplicate system name '" + systems[i].name + "'");
    for (const auto& m : metrics) {
      auto it = systems[i].segment_scores.find(m);
      require(it != systems[i].segment_scores.end(),
              "system '" + systems[i].name + "' lacks metric '" + m + "'");
      require(it->second.size() == src_texts.size(),
              "segment count of '" + systems[i].name + "' disagrees with source count");
    }
    if (cfg.corpus_bootstrap_bleu &&
        std::find(metrics.begin(), metrics.end(), "bleu") != metrics.end())
      require(systems[i].bleu_counts.size() == src_texts.size(),
              "corpus bootstrap needs per-segment counts for '" + systems[i].name + "'");
  }

  EvalReport report;
  report.metrics = metrics;
  report.systems = systems;
  std::size_t n = systems.size();
  for (const auto& m : metrics) {
    auto& pv = report.p_values[m];
    pv.assign(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        if (m == "bleu" && cfg.corpus_bootstrap_bleu) {
          pv[i][j] = paired_bootstrap_corpus_bleu(systems[i].bleu_counts, systems[j].bleu_counts,
                                                  cfg.bootstrap.n_samples,
                                                  cfg.bootstrap.sample_size, rng, kCorpusBleuCfg);
        } else {
          pv[i][j] = paired_bootstrap(systems[i].segment_scores.at(m),
                                      systems[j].segment_scores.at(m), cfg.bootstrap.n_samples,
                                      cfg.bootstrap.sample_size, rng);
        }
      }
    }
    if (src_texts.size() >= 2) {
      std::vector<std::string> names;
      std::vector<std::vector<double>> scores;
      for (const auto& s : systems) {
        names.push_back(s.name);
        scores.push_back(s.segment_scores.at(m));
      }
      std::vector<RankedSystem> ranked = rank_clusters(names, scores, cfg.bootstrap, rng);
      auto& clusters = report.clusters[m];
      clusters.assign(n, 1);
      for (const auto& r : ranked) {
        for (std::size_t i = 0; i < n; ++i)
          if (systems[i].name == r.name) clusters[i] = r.cluster;
      }
    } else {
      report.clusters[m].assign(n, 1);
    }
    for (const auto& s : systems) {
      for (const LengthBucket& b :
           length_bucket_report(s.segment_scores.at(m), src_texts, cfg.length_bins))
        report.bucket_table.push_back({s.name, m, b});
    }
  }
  return report;
}

void write_report_json(const EvalReport& report, const std::string& path) {
  nlohmann::json j;
  j["metrics"] = report.metrics;
  for (const auto& s : report.systems) {
    nlohmann::json js;
    js["name"] = s.name;
    js["corpus"] = s.corpus_scores;
    js["segments"] = s.segment_scores;
    std::vector<int> failures;
    for (std::size_t i = 0; i < s.decode_failed.size(); ++i)
      if (s.decode_failed[i]) failures.push_back(static_cast<int>(i));
    js["decode_failures"] = failures;
    j["systems"].push_back(js);
  }
  j["p_values"] = report.p_values;
  j["clusters"] = report.clusters;
  j["buckets"] = nlohmann::json::array();
  for (const auto& row : report.bucket_table) {
    nlohmann::json jb;
    jb["system"] = row.system;
    jb["metric"] = row.metric;
    jb["lo"] = row.bucket.lo;
    if (row.bucket.open)
      jb["hi"] = nullptr;
    else
      jb["hi"] = row.bucket.hi;
    jb["count"] = row.bucket.count;
    jb["mean"] = row.bucket.mean;
    j["buckets"].push_back(jb);
  }
  write_file(path, j.dump(2) + "\n");
}

void write_segment_csv(const EvalReport& report, const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  out << "system,metric,segment,score\n";
  for (const auto& s : report.systems)
    for (const auto& m : report.metrics) {
      const auto& scores = s.segment_scores.at(m);
      for (std::size_t i = 0; i < scores.size(); ++i)
        out << s.name << ',' << m << ',' << i << ',' << scores[i] << '\n';
    }
  write_file(path, out.str());
}

namespace {

std::string bucket_label(const LengthBucket& b) {
  std::ostringstream s;
  if (b.open)
    s << '[' << b.lo << ",inf)";
  else
    s << '[' << b.lo << ',' << b.hi << ')';
  return s.str();
}

}  // namespace

std::string format_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  std::size_t name_w = 6;
  for (const auto& s : report.systems) name_w = std::max(name_w, s.name.size());

  out << "== corpus scores\n" << std::setw(static_cast<int>(name_w)) << std::left << "system";
  for (const auto& m : report.metrics)
    out << std::right << std::setw(static_cast<int>(m.size() + 2)) << m << "  cl";
  out << '\n';
  for (std::size_t i = 0; i < report.systems.size(); ++i) {
    const auto& s = report.systems[i];
    out << std::setw(static_cast<int>(name_w)) << std::left << s.name;
    for (const auto& m : report.metrics)
      out << std::right << std::setw(static_cast<int>(m.size() + 2)) << s.corpus_scores.at(m)
          << std::setw(4) << report.clusters.at(m)[i];
    out << '\n';
  }

  for (const auto& m : report.metrics) {
    out << "\n== p[A > B] (" << m << ")\n"
        << std::setw(static_cast<int>(name_w)) << std::left << "A \\ B";
    for (const auto& s : report.systems)
      out << std::right << std::setw(static_cast<int>(std::max<std::size_t>(s.name.size(), 6) + 2))
          << s.name;
    out << '\n';
    const auto& pv = report.p_values.at(m);
    for (std::size_t i = 0; i < report.systems.size(); ++i) {
      out << std::setw(static_cast<int>(name_w)) << std::left << report.systems[i].name;
      for (std::size_t j = 0; j < report.systems.size(); ++j)
        out << std::right
            << std::setw(static_cast<int>(
                   std::max<std::size_t>(report.systems[j].name.size(), 6) + 2))
            << pv[i][j];
      out << '\n';
    }
  }

  for (const auto& m : report.metrics) {
    out << "\n== length buckets (" << m << "), mean (count)\n";
    for (const auto& s : report.systems) {
      out << std::setw(static_cast<int>(name_w)) << std::left << s.name << "  ";
      bool first = true;
      for (const auto& row : report.bucket_table) {
        if (row.system != s.name || row.metric != m) continue;
        if (!first) out << "  ";
        first = false;
        out << bucket_label(row.bucket) << ' ' << row.bucket.mean << " (" << row.bucket.count
            << ')';
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace tokrl
