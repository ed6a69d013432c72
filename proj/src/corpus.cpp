#include "tokrl/corpus.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "tokrl/errors.hpp"
#include "tokrl/jsonl.hpp"
#include "tokrl/parallel.hpp"
#include "tokrl/rng.hpp"
#include "tokrl/textcore.hpp"

namespace tokrl {

ReorderRule parse_reorder_rule(const std::string& name) {
  if (name == "identity") return ReorderRule::identity;
  if (name == "reverse") return ReorderRule::reverse;
  if (name == "swap-pairs" || name == "swap_pairs") return ReorderRule::swap_pairs;
  throw ValidationError("unknown reorder rule '" + name + "'");
}

const char* reorder_rule_name(ReorderRule r) {
  switch (r) {
    case ReorderRule::identity: return "identity";
    case ReorderRule::reverse: return "reverse";
    default: return "swap-pairs";
  }
}

namespace {

// Source and target words are built from disjoint consonant sets, so the two
// sides of the cipher can never collide.  Words are syllable (CV) strings.
std::string syllable_word(int index, const char* consonants) {
  static const char* vowels = "aeiou";
  std::string out;
  int digits[4];
  int nd = 0;
  int x = index;
  do {
    digits[nd++] = x % 50;
    x /= 50;
  } while (x > 0 && nd < 4);
  while (nd < 2) digits[nd++] = 0;  // at least two syllables
  for (int i = nd - 1; i >= 0; --i) {
    out += consonants[digits[i] / 5];
    out += vowels[digits[i] % 5];
  }
  return out;
}

void validate_spec(const TaskSpec& spec) {
  require(spec.lexicon_size >= 10, "lexicon_size must be >= 10");
  require(spec.min_len >= 1 && spec.min_len <= spec.max_len,
          "sentence length bounds must satisfy 1 <= min_len <= max_len");
  require(spec.suffix.every >= 0, "suffix_rule.every must be >= 0");
}

}  // namespace

CipherLexicon make_lexicon(int lexicon_size) {
  require(lexicon_size >= 10, "lexicon_size must be >= 10");
  CipherLexicon lex;
  lex.entries.reserve(lexicon_size);
  for (int i = 0; i < lexicon_size; ++i) {
    LexEntry e;
    e.src = syllable_word(i, "bdgklmnprs");
    e.tgt = syllable_word(i, "vzfcwjtyqh");
    e.synonym = e.tgt + "x";  // target words end in a vowel, so this is unique
    lex.entries.push_back(std::move(e));
  }
  return lex;
}

std::string translate(const CipherLexicon& lex, const TaskSpec& spec, const std::string& src) {
  validate_spec(spec);
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < lex.entries.size(); ++i) index.emplace(lex.entries[i].src, i);
  std::vector<std::string> words = split_whitespace(src);
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    auto it = index.find(w);
    require(it != index.end(), "source word not in lexicon: '" + w + "'");
    out.push_back(lex.entries[it->second].tgt);
  }
  switch (spec.reorder) {
    case ReorderRule::identity: break;
    case ReorderRule::reverse: std::reverse(out.begin(), out.end()); break;
    case ReorderRule::swap_pairs:
      for (std::size_t i = 0; i + 1 < out.size(); i += 2) std::swap(out[i], out[i + 1]);
      break;
  }
  if (spec.suffix.every > 0) {
    for (std::size_t i = 0; i < out.size(); ++i)
      if ((i + 1) % static_cast<std::size_t>(spec.suffix.every) == 0)
        out[i] += spec.suffix.suffix;
  }
  std::string joined;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) joined += ' ';
    joined += out[i];
  }
  return joined;
}

std::vector<ParallelPair> gen_synthetic(const TaskSpec& spec, int n, std::uint64_t seed) {
  validate_spec(spec);
  require(n >= 0, "pair count must be >= 0");
  CipherLexicon lex = make_lexicon(spec.lexicon_size);
  std::vector<ParallelPair> pairs(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    int len = spec.min_len +
              static_cast<int>(rng.uniform_int(
                  static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
    std::string src;
    for (int w = 0; w < len; ++w) {
      if (w) src += ' ';
      src += lex.entries[rng.uniform_int(lex.entries.size())].src;
    }
    char id[24];
    std::snprintf(id, sizeof id, "p%06zu", i);
    pairs[i] = {id, src, translate(lex, spec, src)};
  });
  return pairs;
}

SynonymTable make_synonym_table(const CipherLexicon& lex, const TaskSpec& spec) {
  SynonymTable table;
  for (const auto& e : lex.entries) {
    table.emplace(e.tgt, e.synonym);
    if (spec.suffix.every > 0)
      table.emplace(e.tgt + spec.suffix.suffix, e.synonym + spec.suffix.suffix);
  }
  return table;
}

CorruptionContext make_corruption_context(const CipherLexicon& lex, const TaskSpec& spec) {
  CorruptionContext ctx;
  ctx.synonyms = make_synonym_table(lex, spec);
  ctx.word_inventory.reserve(lex.entries.size());
  for (const auto& e : lex.entries) ctx.word_inventory.push_back(e.tgt);
  return ctx;
}

CorruptionRecord corrupt(const ParallelPair& pair, const CorruptionRates& rates,
                         std::uint64_t seed, const CorruptionContext& ctx) {
  require(rates.p_minor >= 0 && rates.p_major >= 0 && rates.p_critical >= 0 &&
              rates.p_minor <= 1 && rates.p_major <= 1 && rates.p_critical <= 1 &&
              rates.p_minor + rates.p_major + rates.p_critical <= 1.0,
          "corruption rates must lie in [0,1] and sum to at most 1");
  require(!ctx.word_inventory.empty(), "corruption context has an empty word inventory");

  Rng rng(seed);
  std::vector<std::string> ref_words = split_whitespace(pair.ref);
  CorruptionRecord rec;
  rec.pair_id = pair.id;

  auto random_other = [&](const std::string& avoid1, const std::string& avoid2) {
    for (int tries = 0; tries < 200; ++tries) {
      const std::string& w = ctx.word_inventory[rng.uniform_int(ctx.word_inventory.size())];
      if (w != avoid1 && w != avoid2) return w;
    }
    throw ValidationError("word inventory too small for substitution draws");
  };

  int pending = 0;  // deletions awaiting the next emitted word's start position
  auto emit_word = [&](const std::string& w, Severity sev) {
    int start = static_cast<int>(rec.hyp.size()) + (rec.hyp.empty() ? 0 : 1);
    if (!rec.hyp.empty()) rec.hyp += ' ';
    rec.hyp += w;
    while (pending > 0) {
      rec.gold_spans.push_back({start, start, Severity::major});
      --pending;
    }
    if (sev != Severity::correct)
      rec.gold_spans.push_back({start, start + static_cast<int>(w.size()), sev});
  };

  for (std::size_t i = 0; i < ref_words.size(); ++i) {
    const std::string& w = ref_words[i];
    double u = rng.uniform();
    if (u < rates.p_minor) {
      auto syn = ctx.synonyms.find(w);
      if (syn == ctx.synonyms.end()) {
        emit_word(w, Severity::correct);  // no designated synonym: leave intact
        continue;
      }
      rec.plan.push_back({EditKind::substitute_synonym, static_cast<int>(i), syn->second});
      emit_word(syn->second, Severity::minor);
    } else if (u < rates.p_minor + rates.p_major) {
      bool do_delete = ref_words.size() >= 2 && rng.uniform() < 0.5;
      if (do_delete) {
        rec.plan.push_back({EditKind::erase, static_cast<int>(i), ""});
        ++pending;
      } else {
        auto syn = ctx.synonyms.find(w);
        std::string repl = random_other(w, syn == ctx.synonyms.end() ? "" : syn->second);
        rec.plan.push_back({EditKind::substitute_random, static_cast<int>(i), repl});
        emit_word(repl, Severity::major);
      }
    } else if (u < rates.p_minor + rates.p_major + rates.p_critical) {
      emit_word(w, Severity::correct);
      // Avoid neighbours so the minimal alignment pins the insertion here.
      std::string ins = random_other(w, i + 1 < ref_words.size() ? ref_words[i + 1] : "");
      rec.plan.push_back({EditKind::insert, static_cast<int>(i), ins});
      emit_word(ins, Severity::critical);
    } else {
      emit_word(w, Severity::correct);
    }
  }
  // Deletions at the very end sit at hyp end.
  while (pending > 0) {
    int pos = static_cast<int>(rec.hyp.size());
    rec.gold_spans.push_back({pos, pos, Severity::major});
    --pending;
  }
  return rec;
}

std::vector<ParallelPair> load_jsonl(const std::string& path) {
  auto rows = read_jsonl(path);
  std::vector<ParallelPair> pairs;
  pairs.reserve(rows.size());
  std::unordered_set<std::string> seen;
  // read_jsonl skips blank lines, so recover line numbers by re-reading; the
  // parse order matches non-blank line order which is what errors cite.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& j = rows[i];
    std::string where = path + ": record " + std::to_string(i + 1);
    for (const char* field : {"id", "src", "ref"})
      require(j.contains(field) && j[field].is_string(),
              where + ": missing string field '" + std::string(field) + "'");
    ParallelPair p{j["id"].get<std::string>(), j["src"].get<std::string>(),
                   j["ref"].get<std::string>()};
    require(!p.id.empty() && !p.src.empty() && !p.ref.empty(),
            where + ": id/src/ref must be non-empty");
    require(seen.insert(p.id).second, where + ": duplicate id '" + p.id + "'");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_jsonl(const std::vector<ParallelPair>& pairs, const std::string& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs)
    rows.push_back({{"id", p.id}, {"src", p.src}, {"ref", p.ref}});
  write_jsonl(path, rows);
}

void save_corruptions(const std::vector<CorruptionRecord>& records, const std::string& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& s : r.gold_spans)
      spans.push_back({{"start", s.start}, {"end", s.end}, {"severity", severity_name(s.severity)}});
    rows.push_back({{"id", r.pair_id}, {"hyp", r.hyp}, {"spans", spans}});
  }
  write_jsonl(path, rows);
}

void save_lexicon(const CipherLexicon& lex, const std::string& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(lex.entries.size());
  for (const auto& e : lex.entries)
    rows.push_back({{"src", e.src}, {"tgt", e.tgt}, {"synonym", e.synonym}});
  write_jsonl(path, rows);
}

CipherLexicon load_lexicon(const std::string& path) {
  CipherLexicon lex;
  auto rows = read_jsonl(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& j = rows[i];
    std::string where = path + ": record " + std::to_string(i + 1);
    for (const char* field : {"src", "tgt", "synonym"})
      require(j.contains(field) && j[field].is_string(),
              where + ": missing string field '" + std::string(field) + "'");
    lex.entries.push_back({j["src"].get<std::string>(), j["tgt"].get<std::string>(),
                           j["synonym"].get<std::string>()});
  }
  require(!lex.entries.empty(), path + ": empty lexicon");
  return lex;
}

}  // namespace tokrl
