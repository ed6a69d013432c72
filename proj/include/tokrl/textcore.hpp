#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace tokrl {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumReserved = 4;

struct Vocabulary {
  std::vector<std::string> id_to_piece;
  std::unordered_map<std::string, int> piece_to_id;
  int max_piece_len = 0;

  int size() const { return static_cast<int>(id_to_piece.size()); }
  // -1 when the piece is unknown.
  int piece_id(const std::string& piece) const {
    auto it = piece_to_id.find(piece);
    return it == piece_to_id.end() ? -1 : it->second;
  }
  const std::string& piece(int id) const { return id_to_piece.at(id); }
};

// Whole corpus words first (by frequency, then first occurrence), then
// frequent substrings until max_size.  Deterministic given corpus order.
Vocabulary build_vocab(const std::vector<std::string>& corpus, int max_size);

// Plain text, one piece per line, line number = id.
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

struct Token {
  int piece_id = 0;
  int char_start = 0;  // byte offsets, half-open
  int char_end = 0;
  int word_index = 0;
};

struct TokenizedText {
  std::string text;
  std::vector<Token> tokens;
  int word_count = 0;

  std::vector<int> piece_ids() const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(t.piece_id);
    return ids;
  }
};

// Word = maximal run of word bytes (alnum, '_' excluded, bytes >= 0x80);
// every other non-whitespace byte is its own single-char word.
struct WordSpan {
  std::size_t start = 0;
  std::size_t end = 0;
};
std::vector<WordSpan> split_words(const std::string& text);

// Whitespace-split word strings; the unit MT metrics operate on.
std::vector<std::string> split_whitespace(const std::string& text);

// Greedy longest-match within words; unknown characters become UNK tokens
// covering one UTF-8 character.
TokenizedText tokenize(const Vocabulary& vocab, const std::string& text);

// Validates offsets against tok.text and returns the exact original string.
std::string detokenize(const TokenizedText& tok);

// Surface form of generated piece ids: pieces joined by single spaces
// (generation is word-synchronous, one piece per word).  PAD/BOS/EOS render
// empty; UNK renders as its piece literal.
std::string render_pieces(const Vocabulary& vocab, const std::vector<int>& ids);

// Same rendering, but keeps the piece/word alignment: one token per rendered
// piece, each its own word.  Reward vectors over these tokens line up with
// the generating episode's steps by construction.
TokenizedText render_tokenized(const Vocabulary& vocab, const std::vector<int>& ids);

}  // namespace tokrl
