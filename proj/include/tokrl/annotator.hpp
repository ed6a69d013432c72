#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace tokrl {

enum class Severity { correct = 0, minor = 1, major = 2, critical = 3 };

const char* severity_name(Severity s);
// Case-insensitive "minor"/"major"/"critical"; context prefixes the error.
Severity parse_severity(const std::string& label, const std::string& context);

// Character-offset region of a hypothesis, half-open.  Zero-width spans mark
// deletion points.
struct ErrorSpan {
  int start = 0;
  int end = 0;
  Severity severity = Severity::major;
};

struct SpanAnnotation {
  std::string pair_id;
  std::string hyp;
  std::vector<ErrorSpan> spans;
  double sentence_score = 1.0;
};

// Sort spans, merge same-severity spans separated only by whitespace, and
// trim lower-severity overlap against higher-severity spans.
std::vector<ErrorSpan> normalize_spans(std::vector<ErrorSpan> spans, const std::string& hyp);

// max(0, 1 - (1*minor + 5*major + 25*critical)/25), the MQM magnitudes.
double mqm_sentence_score(int n_minor, int n_major, int n_critical);

// ref surface word -> its designated synonym surface form.
using SynonymTable = std::unordered_map<std::string, std::string>;

// Oracle reference-based annotator: word-level Levenshtein alignment with
// unit costs; substitution by the designated synonym is minor, any other
// substitution major, a missing reference word major (zero-width), a spurious
// hypothesis word critical.
class Annotator {
 public:
  Annotator() = default;
  explicit Annotator(SynonymTable synonyms) : synonyms_(std::move(synonyms)) {}

  SpanAnnotation annotate(const std::string& hyp, const std::string& ref) const;

 private:
  SynonymTable synonyms_;
};

// Annotation JSONL: {"id","hyp","spans":[{"start","end","severity"}],"score"?}.
// Missing score is recomputed from the raw (pre-merge) span counts.
std::vector<SpanAnnotation> load_annotations(const std::string& path);
void save_annotations(const std::vector<SpanAnnotation>& annotations, const std::string& path);

}  // namespace tokrl
