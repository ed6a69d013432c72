#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tokrl/annotator.hpp"

namespace tokrl {

struct ParallelPair {
  std::string id;
  std::string src;
  std::string ref;
};

enum class ReorderRule { identity, reverse, swap_pairs };

ReorderRule parse_reorder_rule(const std::string& name);
const char* reorder_rule_name(ReorderRule r);

// Appends `suffix` to every k-th word (1-based positions divisible by every);
// every == 0 disables the rule.
struct SuffixRule {
  int every = 0;
  std::string suffix = "ka";
};

struct TaskSpec {
  int lexicon_size = 100;
  int min_len = 1;  // sentence length in words
  int max_len = 10;
  ReorderRule reorder = ReorderRule::identity;
  SuffixRule suffix;
};

struct LexEntry {
  std::string src;
  std::string tgt;
  std::string synonym;  // designated synonym of tgt
};

// The cipher language: a fixed bijective word mapping derived purely from
// lexicon_size, so corpora with different sampling seeds share one language.
struct CipherLexicon {
  std::vector<LexEntry> entries;
};

CipherLexicon make_lexicon(int lexicon_size);

// Pure word-by-word mapping, then reorder, then suffix rule.
std::string translate(const CipherLexicon& lex, const TaskSpec& spec, const std::string& src);

std::vector<ParallelPair> gen_synthetic(const TaskSpec& spec, int n, std::uint64_t seed);

// Surface form -> designated synonym, covering plain and suffixed forms.
SynonymTable make_synonym_table(const CipherLexicon& lex, const TaskSpec& spec);

struct CorruptionRates {
  double p_minor = 0.0;
  double p_major = 0.0;
  double p_critical = 0.0;
};

enum class EditKind { substitute_synonym, substitute_random, erase, insert };

struct EditDescriptor {
  EditKind kind = EditKind::substitute_random;
  int word_index = 0;    // reference word the edit applies to
  std::string payload;   // replacement / inserted word
};

struct CorruptionRecord {
  std::string pair_id;
  std::string hyp;
  std::vector<ErrorSpan> gold_spans;
  std::vector<EditDescriptor> plan;
};

// Per-word independent edits on the reference: synonym substitution (minor),
// non-synonym substitution or deletion (major), spurious insertion after the
// word (critical).  Single-word references are never deleted.
struct CorruptionContext {
  SynonymTable synonyms;
  std::vector<std::string> word_inventory;  // plain target surface forms
};
CorruptionContext make_corruption_context(const CipherLexicon& lex, const TaskSpec& spec);

CorruptionRecord corrupt(const ParallelPair& pair, const CorruptionRates& rates,
                         std::uint64_t seed, const CorruptionContext& ctx);

// {"id","src","ref"} per line.
std::vector<ParallelPair> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<ParallelPair>& pairs, const std::string& path);

// Corruption output in the annotation schema {"id","hyp","spans":[...]}.
void save_corruptions(const std::vector<CorruptionRecord>& records, const std::string& path);

// Lexicon sidecar {"src","tgt","synonym"} per line, so evaluation tooling can
// rebuild the synonym table for externally stored corpora.
void save_lexicon(const CipherLexicon& lex, const std::string& path);
CipherLexicon load_lexicon(const std::string& path);

}  // namespace tokrl
