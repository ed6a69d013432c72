#include "tokrl/annotator.hpp"

#include <algorithm>
#include <cctype>

#include "tokrl/errors.hpp"
#include "tokrl/jsonl.hpp"
#include "tokrl/textcore.hpp"

namespace tokrl {

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::correct: return "correct";
    case Severity::minor: return "minor";
    case Severity::major: return "major";
    default: return "critical";
  }
}

Severity parse_severity(const std::string& label, const std::string& context) {
  std::string low;
  low.reserve(label.size());
  for (char c : label) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (low == "minor") return Severity::minor;
  if (low == "major") return Severity::major;
  if (low == "critical") return Severity::critical;
  throw ValidationError(context + ": unknown severity label '" + label + "'");
}

double mqm_sentence_score(int n_minor, int n_major, int n_critical) {
  double penalty = (1.0 * n_minor + 5.0 * n_major + 25.0 * n_critical) / 25.0;
  double s = 1.0 - penalty;
  return s < 0.0 ? 0.0 : s;
}

namespace {

bool whitespace_only(const std::string& text, int from, int to) {
  for (int i = from; i < to; ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\v' && c != '\f')
      return false;
  }
  return true;
}

void check_span_bounds(const ErrorSpan& s, std::size_t len, const std::string& context) {
  if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) > len)
    throw ValidationError(context + ": span [" + std::to_string(s.start) + "," +
                          std::to_string(s.end) + ") out of bounds for length " +
                          std::to_string(len));
  if (s.severity == Severity::correct)
    throw ValidationError(context + ": spans cannot carry severity 'correct'");
}

}  // namespace

std::vector<ErrorSpan> normalize_spans(std::vector<ErrorSpan> spans, const std::string& hyp) {
  for (const auto& s : spans) check_span_bounds(s, hyp.size(), "normalize_spans");

  // Canonical form via per-character worst-severity painting: overlapping
  // spans resolve to the worst severity character-wise, runs of equal
  // severity separated only by whitespace merge.
  const int len = static_cast<int>(hyp.size());
  std::vector<Severity> paint(len, Severity::correct);
  for (const auto& s : spans)
    for (int i = s.start; i < s.end; ++i)
      if (s.severity > paint[i]) paint[i] = s.severity;

  std::vector<ErrorSpan> out;
  int i = 0;
  while (i < len) {
    if (paint[i] == Severity::correct) {
      ++i;
      continue;
    }
    int j = i;
    while (j < len && paint[j] == paint[i]) ++j;
    if (!out.empty() && out.back().severity == paint[i] &&
        whitespace_only(hyp, out.back().end, i)) {
      out.back().end = j;
    } else {
      out.push_back({i, j, paint[i]});
    }
    i = j;
  }

  // Zero-width markers survive unless an equal-or-worse painted span touches
  // their position; duplicates collapse.
  std::vector<ErrorSpan> zero;
  for (const auto& s : spans) {
    if (s.start != s.end) continue;
    bool absorbed = false;
    for (const auto& o : out)
      if (o.start <= s.start && s.start <= o.end && o.severity >= s.severity) {
        absorbed = true;
        break;
      }
    for (const auto& z : zero)
      if (z.start == s.start && z.severity == s.severity) {
        absorbed = true;
        break;
      }
    if (!absorbed) zero.push_back(s);
  }
  out.insert(out.end(), zero.begin(), zero.end());
  std::sort(out.begin(), out.end(), [](const ErrorSpan& a, const ErrorSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.severity < b.severity;
  });
  return out;
}

SpanAnnotation Annotator::annotate(const std::string& hyp, const std::string& ref) const {
  require(!split_whitespace(ref).empty(), "annotate: empty ref");

  std::vector<WordSpan> hyp_spans;
  std::vector<std::string> hyp_words;
  {
    std::size_t i = 0, n = hyp.size();
    while (i < n) {
      unsigned char c = static_cast<unsigned char>(hyp[i]);
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n) {
        unsigned char d = static_cast<unsigned char>(hyp[j]);
        if (d == ' ' || d == '\t' || d == '\n' || d == '\r' || d == '\v' || d == '\f') break;
        ++j;
      }
      hyp_spans.push_back({i, j});
      hyp_words.push_back(hyp.substr(i, j - i));
      i = j;
    }
  }
  std::vector<std::string> ref_words = split_whitespace(ref);

  const int m = static_cast<int>(hyp_words.size());
  const int n = static_cast<int>(ref_words.size());

  // dp[i][j]: (edit distance, non-synonym substitution count) between
  // hyp[0..i) and ref[0..j), minimized lexicographically.  The secondary
  // count picks, among minimal alignments, the one pairing synonym forms
  // with their reference words instead of an arbitrary neighbour.
  struct Cell {
    int cost = 0;
    int bad = 0;
    bool operator<(const Cell& o) const {
      return cost != o.cost ? cost < o.cost : bad < o.bad;
    }
    bool operator==(const Cell& o) const { return cost == o.cost && bad == o.bad; }
  };
  auto sub_step = [&](const Cell& from, int i, int j) {
    const std::string& hw = hyp_words[i - 1];
    const std::string& rw = ref_words[j - 1];
    if (hw == rw) return from;
    auto syn = synonyms_.find(rw);
    bool is_syn = syn != synonyms_.end() && syn->second == hw;
    return Cell{from.cost + 1, from.bad + (is_syn ? 0 : 1)};
  };
  std::vector<std::vector<Cell>> dp(m + 1, std::vector<Cell>(n + 1));
  for (int i = 0; i <= m; ++i) dp[i][0] = {i, 0};
  for (int j = 0; j <= n; ++j) dp[0][j] = {j, 0};
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= n; ++j) {
      Cell sub = sub_step(dp[i - 1][j - 1], i, j);
      Cell ins{dp[i - 1][j].cost + 1, dp[i - 1][j].bad};  // spurious hyp word
      Cell del{dp[i][j - 1].cost + 1, dp[i][j - 1].bad};  // missing ref word
      dp[i][j] = std::min({sub, ins, del});
    }
  }

  // Backtrace, tie-break substitution > insertion > deletion.
  enum class Op { sub, ins, del };
  std::vector<Op> ops;
  {
    int i = m, j = n;
    while (i > 0 || j > 0) {
      if (i > 0 && j > 0 && dp[i][j] == sub_step(dp[i - 1][j - 1], i, j)) {
        ops.push_back(Op::sub);
        --i;
        --j;
      } else if (i > 0 && dp[i][j] == Cell{dp[i - 1][j].cost + 1, dp[i - 1][j].bad}) {
        ops.push_back(Op::ins);
        --i;
      } else {
        ops.push_back(Op::del);
        --j;
      }
    }
    std::reverse(ops.begin(), ops.end());
  }

  SpanAnnotation out;
  out.hyp = hyp;
  int n_minor = 0, n_major = 0, n_critical = 0;
  int fi = 0, fj = 0;
  for (Op op : ops) {
    switch (op) {
      case Op::sub: {
        const std::string& hw = hyp_words[fi];
        const std::string& rw = ref_words[fj];
        if (hw != rw) {
          auto syn = synonyms_.find(rw);
          Severity sev = (syn != synonyms_.end() && syn->second == hw) ? Severity::minor
                                                                       : Severity::major;
          out.spans.push_back({static_cast<int>(hyp_spans[fi].start),
                               static_cast<int>(hyp_spans[fi].end), sev});
          (sev == Severity::minor ? n_minor : n_major)++;
        }
        ++fi;
        ++fj;
        break;
      }
      case Op::ins: {
        out.spans.push_back({static_cast<int>(hyp_spans[fi].start),
                             static_cast<int>(hyp_spans[fi].end), Severity::critical});
        ++n_critical;
        ++fi;
        break;
      }
      case Op::del: {
        int pos = fi < m ? static_cast<int>(hyp_spans[fi].start)
                         : static_cast<int>(hyp.size());
        out.spans.push_back({pos, pos, Severity::major});
        ++n_major;
        ++fj;
        break;
      }
    }
  }
  out.sentence_score = mqm_sentence_score(n_minor, n_major, n_critical);
  out.spans = normalize_spans(std::move(out.spans), hyp);
  return out;
}

std::vector<SpanAnnotation> load_annotations(const std::string& path) {
  std::vector<SpanAnnotation> out;
  auto rows = read_jsonl(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& j = rows[i];
    std::string where = path + ": record " + std::to_string(i + 1);
    require(j.contains("id") && j["id"].is_string(), where + ": missing string field 'id'");
    SpanAnnotation a;
    a.pair_id = j["id"].get<std::string>();
    where = path + ": pair '" + a.pair_id + "'";
    require(j.contains("hyp") && j["hyp"].is_string(), where + ": missing string field 'hyp'");
    a.hyp = j["hyp"].get<std::string>();
    require(j.contains("spans") && j["spans"].is_array(), where + ": missing array field 'spans'");
    int n_minor = 0, n_major = 0, n_critical = 0;
    for (const auto& js : j["spans"]) {
      require(js.contains("start") && js.contains("end") && js.contains("severity"),
              where + ": span needs start/end/severity");
      ErrorSpan s;
      s.start = js["start"].get<int>();
      s.end = js["end"].get<int>();
      s.severity = parse_severity(js["severity"].get<std::string>(), where);
      check_span_bounds(s, a.hyp.size(), where);
      switch (s.severity) {
        case Severity::minor: ++n_minor; break;
        case Severity::major: ++n_major; break;
        default: ++n_critical; break;
      }
      a.spans.push_back(s);
    }
    if (j.contains("score")) {
      require(j["score"].is_number(), where + ": score must be a number");
      a.sentence_score = j["score"].get<double>();
      require(a.sentence_score >= 0.0 && a.sentence_score <= 1.0,
              where + ": score outside [0,1]");
    } else {
      a.sentence_score = mqm_sentence_score(n_minor, n_major, n_critical);
    }
    a.spans = normalize_spans(std::move(a.spans), a.hyp);
    out.push_back(std::move(a));
  }
  return out;
}

void save_annotations(const std::vector<SpanAnnotation>& annotations, const std::string& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(annotations.size());
  for (const auto& a : annotations) {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& s : a.spans)
      spans.push_back({{"start", s.start}, {"end", s.end}, {"severity", severity_name(s.severity)}});
    rows.push_back({{"id", a.pair_id}, {"hyp", a.hyp}, {"spans", spans}, {"score", a.sentence_score}});
  }
  write_jsonl(path, rows);
}

}  // namespace tokrl
