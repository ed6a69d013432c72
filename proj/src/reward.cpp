#include "tokrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tokrl/errors.hpp"

namespace tokrl {

SeverityMap severity_map_preset(const std::string& name) {
  if (name == "bin") return {"bin", 1, -1, -1, -1};
  if (name == "mqm") return {"mqm", 0, -1, -5, -25};
  if (name == "rmqm") return {"rmqm", 25, 5, 1, 0};
  if (name == "our") return {"our", 8, 4, 2, 1};
  if (name == "rour") return {"rour", -1, -2, -4, -8};
  throw ValidationError("unknown severity map preset '" + name + "'");
}

SeverityMap load_severity_map(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open severity map file: " + path);
  SeverityMap map;
  map.name = "custom";
  bool seen[4] = {false, false, false, false};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string where = path + ":" + std::to_string(lineno);
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto colon = line.find(':');
    require(colon != std::string::npos, where + ": expected 'key: value'");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 1));
    require(!value.empty(), where + ": missing value for '" + key + "'");
    if (key == "name") {
      map.name = value;
      continue;
    }
    double* slot = nullptr;
    int idx = -1;
    if (key == "correct") { slot = &map.w_correct; idx = 0; }
    else if (key == "minor") { slot = &map.w_minor; idx = 1; }
    else if (key == "major") { slot = &map.w_major; idx = 2; }
    else if (key == "critical") { slot = &map.w_critical; idx = 3; }
    require(slot != nullptr, where + ": unknown key '" + key + "'");
    require(!seen[idx], where + ": duplicate key '" + key + "'");
    std::size_t pos = 0;
    double parsed = 0;
    try {
      parsed = std::stod(value, &pos);
    } catch (const std::exception&) {
      throw ValidationError(where + ": not a number: '" + value + "'");
    }
    require(pos == value.size() && std::isfinite(parsed),
            where + ": not a finite number: '" + value + "'");
    *slot = parsed;
    seen[idx] = true;
  }
  for (int i = 0; i < 4; ++i) {
    static const char* names[] = {"correct", "minor", "major", "critical"};
    require(seen[i], path + ": missing key '" + std::string(names[i]) + "'");
  }
  return map;
}

double severity_weight(const SeverityMap& map, Severity level) {
  switch (level) {
    case Severity::correct: return map.w_correct;
    case Severity::minor: return map.w_minor;
    case Severity::major: return map.w_major;
    default: return map.w_critical;
  }
}

TokenRewardVector map_spans_to_token_rewards(const TokenizedText& hyp,
                                             const std::vector<ErrorSpan>& spans,
                                             const SeverityMap& map) {
  int text_len = static_cast<int>(hyp.text.size());
  for (const auto& s : spans) {
    require(s.start >= 0 && s.start <= s.end && s.end <= text_len,
            "error span out of hypothesis bounds");
    require(s.severity != Severity::correct, "error span cannot have severity 'correct'");
  }
  // Worst severity per parent word; correct (0) orders below minor/major/critical.
  std::vector<Severity> word_sev(hyp.word_count, Severity::correct);
  for (const auto& s : spans) {
    if (s.start == s.end) continue;
    for (const auto& t : hyp.tokens) {
      if (t.char_start < s.end && s.start < t.char_end && s.severity > word_sev[t.word_index])
        word_sev[t.word_index] = s.severity;
    }
  }
  TokenRewardVector out;
  out.granularity = Granularity::token;
  out.rewards.reserve(hyp.tokens.size());
  for (const auto& t : hyp.tokens)
    out.rewards.push_back(severity_weight(map, word_sev[t.word_index]));
  return out;
}

double sentence_reward_from_spans(const TokenizedText& hyp, const std::vector<ErrorSpan>& spans,
                                  const SeverityMap& map) {
  if (hyp.tokens.empty()) return 0.0;
  TokenRewardVector v = map_spans_to_token_rewards(hyp, spans, map);
  double mean = 0.0;
  for (double r : v.rewards) mean += r;
  mean /= static_cast<double>(v.rewards.size());
  return map.w_correct != 0.0 ? mean / map.w_correct : mean;
}

std::vector<double> partial_bleu_word_rewards(const std::vector<std::string>& hyp_words,
                                              const std::vector<std::string>& ref_words,
                                              const BleuConfig& cfg) {
  require(cfg.smoothing != BleuSmoothing::none,
          "partial BLEU rewards need smoothing enabled");
  std::vector<double> rewards(hyp_words.size());
  double prev = 0.0;  // BLEU of the empty prefix
  std::vector<std::string> prefix;
  prefix.reserve(hyp_words.size());
  for (std::size_t t = 0; t < hyp_words.size(); ++t) {
    prefix.push_back(hyp_words[t]);
    double cur = sentence_bleu(prefix, ref_words, cfg);
    rewards[t] = cur - prev;
    prev = cur;
  }
  return rewards;
}

TokenRewardVector broadcast_word_rewards(const std::vector<double>& word_rewards,
                                         const TokenizedText& hyp) {
  require(static_cast<int>(word_rewards.size()) == hyp.word_count,
          "word reward count disagrees with hypothesis word count");
  std::vector<int> counts(hyp.word_count, 0);
  for (const auto& t : hyp.tokens) ++counts[t.word_index];
  for (int c : counts) require(c > 0, "hypothesis word has no tokens");
  TokenRewardVector out;
  out.granularity = Granularity::token;
  out.rewards.reserve(hyp.tokens.size());
  for (const auto& t : hyp.tokens)
    out.rewards.push_back(word_rewards[t.word_index] / counts[t.word_index]);
  return out;
}

std::vector<TokenRewardVector> normalize_rewards(const std::vector<TokenRewardVector>& batch,
                                                 const NormalizeSpec& spec) {
  require(!batch.empty(), "normalize_rewards: empty batch");
  std::vector<TokenRewardVector> out = batch;
  switch (spec.mode) {
    case NormalizeMode::none:
      break;
    case NormalizeMode::whiten: {
      double sum = 0.0;
      long long n = 0;
      for (const auto& v : out)
        for (double r : v.rewards) { sum += r; ++n; }
      require(n > 0, "normalize_rewards: no scalars to whiten");
      double mean = sum / static_cast<double>(n);
      double var = 0.0;
      for (const auto& v : out)
        for (double r : v.rewards) var += (r - mean) * (r - mean);
      double std_dev = std::sqrt(var / static_cast<double>(n));
      for (auto& v : out)
        for (double& r : v.rewards) r = (r - mean) / (std_dev + 1e-8);
      break;
    }
    case NormalizeMode::clip: {
      require(spec.clip >= 0, "clip bound must be >= 0");
      for (auto& v : out)
        for (double& r : v.rewards) r = std::clamp(r, -spec.clip, spec.clip);
      break;
    }
  }
  return out;
}

}  // namespace tokrl
