#pragma once

#include <string>
#include <vector>

namespace tokrl {

enum class BleuSmoothing { none, add_epsilon };

// Defaults suit sentence and prefix scoring; corpus scoring conventionally
// passes smoothing = none.
struct BleuConfig {
  int max_ngram_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::add_epsilon;
  double epsilon = 0.1;
};

struct ChrfConfig {
  int char_order = 6;
  double beta = 2.0;
};

// Clipped n-gram match/total counts plus length terms; summable across pairs
// for micro-averaged corpus scores.
struct BleuCounts {
  std::vector<long long> matches;  // per order 1..max_ngram_order
  std::vector<long long> totals;
  long long hyp_len = 0;
  long long ref_len = 0;
};

BleuCounts bleu_counts(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                       const BleuConfig& cfg);
double bleu_from_counts(const BleuCounts& counts, const BleuConfig& cfg);

// Scores in [0,100].  Empty hypothesis scores 0 (not an error).
double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                     const BleuConfig& cfg = {});
double sentence_bleu(const std::string& hyp, const std::string& ref, const BleuConfig& cfg = {});

struct ScoredPair {
  std::string hyp;
  std::string ref;
};
double corpus_bleu(const std::vector<ScoredPair>& pairs, const BleuConfig& cfg);

// Character n-gram F-beta over whitespace-stripped strings; [0,100].
double chrf(const std::string& hyp, const std::string& ref, const ChrfConfig& cfg = {});

}  // namespace tokrl
