#include "tokrl/textcore.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "tokrl/errors.hpp"
#include "tokrl/jsonl.hpp"

namespace tokrl {

namespace {

const char* kReserved[kNumReserved] = {"<pad>", "<bos>", "<eos>", "<unk>"};

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         c >= 0x80;
}

// Length of the UTF-8 character starting at text[pos], clamped to the range.
std::size_t utf8_len(const std::string& text, std::size_t pos, std::size_t end) {
  unsigned char c = static_cast<unsigned char>(text[pos]);
  std::size_t n = 1;
  if (c >= 0xF0)
    n = 4;
  else if (c >= 0xE0)
    n = 3;
  else if (c >= 0xC0)
    n = 2;
  std::size_t avail = end - pos;
  if (n > avail) n = avail;
  // Stop early if a continuation byte is missing.
  std::size_t k = 1;
  while (k < n && (static_cast<unsigned char>(text[pos + k]) & 0xC0) == 0x80) ++k;
  return k;
}

}  // namespace

std::vector<WordSpan> split_words(const std::string& text) {
  std::vector<WordSpan> words;
  std::size_t i = 0, n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space_byte(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      std::size_t j = i;
      while (j < n && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
      words.push_back({i, j});
      i = j;
    } else {
      // Punctuation: each character is its own word.
      words.push_back({i, i + 1});
      ++i;
    }
  }
  return words;
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0, n = text.size();
  while (i < n) {
    if (is_space_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !is_space_byte(static_cast<unsigned char>(text[j]))) ++j;
    out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, int max_size) {
  require(!corpus.empty(), "empty corpus");
  require(max_size >= 2 * kNumReserved, "max_size must be >= 8");

  struct Cand {
    long long freq = 0;
    std::size_t first = 0;  // order of first appearance
  };
  std::map<std::string, Cand> words;
  std::size_t order = 0;
  for (const auto& line : corpus) {
    for (const auto& w : split_words(line)) {
      std::string s = line.substr(w.start, w.end - w.start);
      auto [it, inserted] = words.try_emplace(s);
      if (inserted) it->second.first = order;
      it->second.freq += 1;
      ++order;
    }
  }
  require(!words.empty(), "empty corpus");

  Vocabulary vocab;
  for (const char* r : kReserved) vocab.id_to_piece.emplace_back(r);

  auto add_piece = [&](const std::string& p) {
    if (vocab.size() >= max_size) return false;
    if (vocab.piece_to_id.count(p)) return true;
    vocab.piece_to_id.emplace(p, vocab.size());
    vocab.id_to_piece.push_back(p);
    return true;
  };

  std::vector<std::pair<std::string, Cand>> by_freq(words.begin(), words.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second.freq != b.second.freq) return a.second.freq > b.second.freq;
    return a.second.first < b.second.first;
  });
  for (const auto& [w, c] : by_freq)
    if (!add_piece(w)) break;

  if (vocab.size() < max_size) {
    // Frequent substrings (single characters surface first naturally).
    std::map<std::string, long long> subs;
    for (const auto& [w, c] : by_freq) {
      for (std::size_t len = 1; len < w.size(); ++len)
        for (std::size_t s = 0; s + len <= w.size(); ++s) subs[w.substr(s, len)] += c.freq;
    }
    std::vector<std::pair<std::string, long long>> sub_list(subs.begin(), subs.end());
    std::sort(sub_list.begin(), sub_list.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      if (a.first.size() != b.first.size()) return a.first.size() < b.first.size();
      return a.first < b.first;
    });
    for (const auto& [s, f] : sub_list)
      if (!add_piece(s)) break;
  }

  vocab.max_piece_len = 0;
  for (int id = kNumReserved; id < vocab.size(); ++id)
    vocab.max_piece_len =
        std::max(vocab.max_piece_len, static_cast<int>(vocab.id_to_piece[id].size()));
  return vocab;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::string out;
  for (const auto& p : vocab.id_to_piece) {
    out += p;
    out += '\n';
  }
  write_file(path, out);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open vocabulary: " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.id_to_piece.push_back(line);
  }
  require(vocab.size() >= kNumReserved, path + ": vocabulary too small");
  for (int i = 0; i < kNumReserved; ++i)
    require(vocab.id_to_piece[i] == kReserved[i],
            path + ": reserved piece mismatch at id " + std::to_string(i));
  for (int id = kNumReserved; id < vocab.size(); ++id) {
    const auto& p = vocab.id_to_piece[id];
    require(!p.empty(), path + ": empty piece at id " + std::to_string(id));
    require(vocab.piece_to_id.emplace(p, id).second,
            path + ": duplicate piece '" + p + "'");
    vocab.max_piece_len = std::max(vocab.max_piece_len, static_cast<int>(p.size()));
  }
  return vocab;
}

TokenizedText tokenize(const Vocabulary& vocab, const std::string& text) {
  TokenizedText out;
  out.text = text;
  auto words = split_words(text);
  out.word_count = static_cast<int>(words.size());
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    std::size_t p = words[wi].start;
    const std::size_t end = words[wi].end;
    while (p < end) {
      std::size_t best = 0;
      int best_id = -1;
      std::size_t cap = std::min(end - p, static_cast<std::size_t>(vocab.max_piece_len));
      for (std::size_t len = cap; len >= 1 && best == 0; --len) {
        int id = vocab.piece_id(text.substr(p, len));
        if (id >= 0) {
          best = len;
          best_id = id;
        }
      }
      if (best == 0) {
        best = utf8_len(text, p, end);
        best_id = kUnkId;
      }
      out.tokens.push_back({best_id, static_cast<int>(p), static_cast<int>(p + best),
                            static_cast<int>(wi)});
      p += best;
    }
  }
  return out;
}

std::string detokenize(const TokenizedText& tok) {
  const std::string& text = tok.text;
  const auto fail = []() -> std::string { throw ValidationError("corrupt tokenization"); };
  std::size_t cursor = 0;
  int prev_word = -1;
  for (const auto& t : tok.tokens) {
    if (t.char_start < 0 || t.char_end < t.char_start ||
        static_cast<std::size_t>(t.char_end) > text.size())
      return fail();
    if (static_cast<std::size_t>(t.char_start) < cursor) return fail();
    if (t.char_start == t.char_end) return fail();
    if (t.word_index < prev_word) return fail();
    // Gaps are only allowed between words, and must be whitespace.
    for (std::size_t i = cursor; i < static_cast<std::size_t>(t.char_start); ++i)
      if (!is_space_byte(static_cast<unsigned char>(text[i]))) return fail();
    if (t.word_index == prev_word && static_cast<std::size_t>(t.char_start) != cursor)
      return fail();
    prev_word = t.word_index;
    cursor = static_cast<std::size_t>(t.char_end);
  }
  for (std::size_t i = cursor; i < text.size(); ++i)
    if (!is_space_byte(static_cast<unsigned char>(text[i]))) return fail();
  return text;
}

std::string render_pieces(const Vocabulary& vocab, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    require(id >= 0 && id < vocab.size(), "piece id out of range: " + std::to_string(id));
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    if (!out.empty()) out += ' ';
    out += vocab.id_to_piece[id];
  }
  return out;
}

TokenizedText render_tokenized(const Vocabulary& vocab, const std::vector<int>& ids) {
  TokenizedText out;
  for (int id : ids) {
    require(id >= 0 && id < vocab.size(), "piece id out of range: " + std::to_string(id));
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    if (!out.text.empty()) out.text += ' ';
    const std::string& piece = vocab.id_to_piece[id];
    Token t;
    t.piece_id = id;
    t.char_start = static_cast<int>(out.text.size());
    out.text += piece;
    t.char_end = static_cast<int>(out.text.size());
    t.word_index = out.word_count++;
    out.tokens.push_back(t);
  }
  return out;
}

}  // namespace tokrl
