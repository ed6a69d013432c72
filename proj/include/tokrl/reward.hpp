#pragma once

#include <string>
#include <vector>

#include "tokrl/annotator.hpp"
#include "tokrl/metrics.hpp"
#include "tokrl/textcore.hpp"

namespace tokrl {

struct SeverityMap {
  std::string name;
  double w_correct = 0;
  double w_minor = 0;
  double w_major = 0;
  double w_critical = 0;
};

// Built-in presets: bin, mqm, rmqm, our, rour.
SeverityMap severity_map_preset(const std::string& name);
// Key-value text file with lines "correct: 8", "minor: 4", ...; optional "name:".
SeverityMap load_severity_map(const std::string& path);

double severity_weight(const SeverityMap& map, Severity level);

enum class Granularity { token, sentence };

struct TokenRewardVector {
  std::vector<double> rewards;
  Granularity granularity = Granularity::token;
};

// A token is in a span if their character ranges overlap; a word errored by
// any of its tokens is errored wholly, at the worst overlapping severity, and
// every token of that word receives that severity's weight.  Zero-width spans
// affect no token.
TokenRewardVector map_spans_to_token_rewards(const TokenizedText& hyp,
                                             const std::vector<ErrorSpan>& spans,
                                             const SeverityMap& map);

// Mean token reward, divided by w_correct when w_correct != 0 so a perfect
// hypothesis scores 1.0.  Empty hypothesis scores 0.
double sentence_reward_from_spans(const TokenizedText& hyp, const std::vector<ErrorSpan>& spans,
                                  const SeverityMap& map);

// r_t = BLEU(hyp[..t+1], ref) - BLEU(hyp[..t], ref) with BLEU(empty) = 0, so
// the rewards telescope to the full-sentence BLEU.  Requires smoothing.
std::vector<double> partial_bleu_word_rewards(const std::vector<std::string>& hyp_words,
                                              const std::vector<std::string>& ref_words,
                                              const BleuConfig& cfg = {});

// Spreads each word's reward over its subword tokens, divided by the subtoken
// count, preserving per-word totals.
TokenRewardVector broadcast_word_rewards(const std::vector<double>& word_rewards,
                                         const TokenizedText& hyp);

enum class NormalizeMode { none, whiten, clip };

struct NormalizeSpec {
  NormalizeMode mode = NormalizeMode::none;
  double clip = 0.0;
};

// Whitening pools every scalar across the batch (population std + 1e-8).
std::vector<TokenRewardVector> normalize_rewards(const std::vector<TokenRewardVector>& batch,
                                                 const NormalizeSpec& spec);

}  // namespace tokrl
