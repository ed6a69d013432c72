#include "tokrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "tokrl/errors.hpp"
#include "tokrl/textcore.hpp"

namespace tokrl {

namespace {

void validate(const BleuConfig& cfg) {
  require(cfg.max_ngram_order >= 1, "max_ngram_order must be >= 1");
  require(cfg.smoothing == BleuSmoothing::none || cfg.epsilon > 0,
          "add_epsilon smoothing needs epsilon > 0");
}

void validate(const ChrfConfig& cfg) {
  require(cfg.char_order >= 1, "char_order must be >= 1");
  require(cfg.beta > 0, "beta must be > 0");
}

// N-grams keyed by joining words with an unprintable separator.
std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& words, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string key = words[i];
    for (int k = 1; k < n; ++k) {
      key += '\x1f';
      key += words[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuCounts bleu_counts(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                       const BleuConfig& cfg) {
  validate(cfg);
  BleuCounts c;
  c.matches.assign(cfg.max_ngram_order, 0);
  c.totals.assign(cfg.max_ngram_order, 0);
  c.hyp_len = static_cast<long long>(hyp.size());
  c.ref_len = static_cast<long long>(ref.size());
  for (int n = 1; n <= cfg.max_ngram_order; ++n) {
    auto hyp_ngrams = ngram_counts(hyp, n);
    auto ref_ngrams = ngram_counts(ref, n);
    long long m = 0;
    for (const auto& [gram, cnt] : hyp_ngrams) {
      auto it = ref_ngrams.find(gram);
      if (it != ref_ngrams.end()) m += std::min(cnt, it->second);
    }
    c.matches[n - 1] = m;
    c.totals[n - 1] = std::max<long long>(0, c.hyp_len - n + 1);
  }
  return c;
}

double bleu_from_counts(const BleuCounts& counts, const BleuConfig& cfg) {
  validate(cfg);
  require(static_cast<int>(counts.matches.size()) == cfg.max_ngram_order &&
              counts.totals.size() == counts.matches.size(),
          "count vectors disagree with max_ngram_order");
  if (counts.hyp_len == 0) return 0.0;
  double log_prec_sum = 0.0;
  for (int i = 0; i < cfg.max_ngram_order; ++i) {
    double m = static_cast<double>(counts.matches[i]);
    double t = static_cast<double>(counts.totals[i]);
    if (cfg.smoothing == BleuSmoothing::add_epsilon && m <= 0) m = cfg.epsilon;
    if (t <= 0) t = 1.0;
    if (m <= 0) return 0.0;
    log_prec_sum += std::log(m / t);
  }
  double bp = counts.hyp_len < counts.ref_len
                  ? std::exp(1.0 - static_cast<double>(counts.ref_len) /
                                       static_cast<double>(counts.hyp_len))
                  : 1.0;
  return 100.0 * bp * std::exp(log_prec_sum / cfg.max_ngram_order);
}

double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                     const BleuConfig& cfg) {
  validate(cfg);
  if (hyp.empty() || ref.empty()) return 0.0;
  return bleu_from_counts(bleu_counts(hyp, ref, cfg), cfg);
}

double sentence_bleu(const std::string& hyp, const std::string& ref, const BleuConfig& cfg) {
  return sentence_bleu(split_whitespace(hyp), split_whitespace(ref), cfg);
}

double corpus_bleu(const std::vector<ScoredPair>& pairs, const BleuConfig& cfg) {
  validate(cfg);
  require(!pairs.empty(), "corpus_bleu: empty corpus");
  BleuCounts total;
  total.matches.assign(cfg.max_ngram_order, 0);
  total.totals.assign(cfg.max_ngram_order, 0);
  for (const auto& p : pairs) {
    BleuCounts c = bleu_counts(split_whitespace(p.hyp), split_whitespace(p.ref), cfg);
    for (int i = 0; i < cfg.max_ngram_order; ++i) {
      total.matches[i] += c.matches[i];
      total.totals[i] += c.totals[i];
    }
    total.hyp_len += c.hyp_len;
    total.ref_len += c.ref_len;
  }
  return bleu_from_counts(total, cfg);
}

double chrf(const std::string& hyp, const std::string& ref, const ChrfConfig& cfg) {
  validate(cfg);
  auto strip = [](const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s)
      if (!std::isspace(static_cast<unsigned char>(ch))) out += ch;
    return out;
  };
  std::string h = strip(hyp);
  std::string r = strip(ref);
  double prec_sum = 0.0, rec_sum = 0.0;
  int used_orders = 0;
  for (int n = 1; n <= cfg.char_order; ++n) {
    long long hc = std::max<long long>(0, static_cast<long long>(h.size()) - n + 1);
    long long rc = std::max<long long>(0, static_cast<long long>(r.size()) - n + 1);
    if (hc + rc == 0) continue;
    std::unordered_map<std::string, int> ref_ngrams;
    for (long long i = 0; i < rc; ++i) ++ref_ngrams[r.substr(i, n)];
    long long matches = 0;
    std::unordered_map<std::string, int> hyp_ngrams;
    for (long long i = 0; i < hc; ++i) ++hyp_ngrams[h.substr(i, n)];
    for (const auto& [gram, cnt] : hyp_ngrams) {
      auto it = ref_ngrams.find(gram);
      if (it != ref_ngrams.end()) matches += std::min(cnt, it->second);
    }
    prec_sum += hc > 0 ? static_cast<double>(matches) / static_cast<double>(hc) : 0.0;
    rec_sum += rc > 0 ? static_cast<double>(matches) / static_cast<double>(rc) : 0.0;
    ++used_orders;
  }
  if (used_orders == 0) return 0.0;
  double p = prec_sum / used_orders;
  double q = rec_sum / used_orders;
  double b2 = cfg.beta * cfg.beta;
  double denom = b2 * p + q;
  if (denom <= 0) return 0.0;
  return 100.0 * (1.0 + b2) * p * q / denom;
}

}  // namespace tokrl
