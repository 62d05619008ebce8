#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stabaudit/embedding.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/text.hpp"

// Reasoning-stability pipeline: strategy-based fingerprint extraction from
// justification text, embedding, density clustering at a strict cosine
// threshold, and the dominant-cluster share R_stab.

namespace stabaudit {

// ---------------------------------------------------------------------------
// Fingerprint extraction
// ---------------------------------------------------------------------------

struct FingerprintResult {
  Strategy strategy_used = Strategy::Assertion;
  std::string fingerprint;
  bool fell_back = false;  // requested strategy yielded nothing; Assertion applied
};

// Function-word stop list used by the Assertion strategy. Negations (not,
// no, never, neither, nor, n't contractions) are deliberately absent: they
// flip the meaning of a verdict rationale. The same list ships as
// assets/stopwords.txt.
inline const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a",     "an",    "the",   "is",    "are",   "was",   "were",  "be",    "been",  "being",
      "am",    "do",    "does",  "did",   "have",  "has",   "had",   "it",    "its",   "this",
      "that",  "these", "those", "there", "and",   "or",    "if",    "then",  "than",  "as",
      "of",    "in",    "on",    "at",    "by",    "for",   "with",  "to",    "from",  "very",
      "also",  "just",  "which", "what",  "who",   "whom",  "whose", "when",  "where", "how",
  };
  return words;
}

// Keyword lists driving the Numeric strategy's primary-integer selection.
// All configurable: deployments with different rubric phrasing can extend
// them.
struct FingerprintOptions {
  std::vector<std::string> count_keywords = {"words",      "word",  "count",  "length",
                                             "characters", "items", "skills", "examples"};
  std::vector<std::string> limit_markers = {"limit", "maximum", "max", "cap"};
  std::vector<std::string> limit_comparators = {"≤", "<=", "<", "under", "below",
                                                "within", "than"};
  const std::set<std::string>* stopwords = &default_stopwords();
};

namespace fp_detail {

inline bool is_word_byte(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || static_cast<unsigned char>(c) >= 0x80;
}

// Leading/trailing non-word bytes removed; the stripped prefix is kept for
// comparator detection ("<=200").
struct TokenView {
  std::string prefix;
  std::string core;
};

inline TokenView split_token(const std::string& raw) {
  size_t b = 0, e = raw.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1]))) --e;
  return {raw.substr(0, b), raw.substr(b, e - b)};
}

inline std::optional<long long> parse_integer(const std::string& core) {
  if (core.empty()) return std::nullopt;
  bool all_digits = true;
  for (char c : core) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      all_digits = false;
      break;
    }
  }
  if (all_digits) return std::stoll(core);
  // Thousands separators: 1,234 or 12,345,678.
  size_t group = 0;
  bool seen_comma = false;
  for (size_t i = 0; i < core.size(); ++i) {
    const char c = core[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ++group;
      if (group > 3 || (i == 0 && group > 3)) return std::nullopt;
    } else if (c == ',') {
      if (group == 0 || group > 3 || (seen_comma && group != 3)) return std::nullopt;
      seen_comma = true;
      group = 0;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_comma || group != 3) return std::nullopt;
  std::string digits;
  for (char c : core) {
    if (c != ',') digits.push_back(c);
  }
  return std::stoll(digits);
}

inline bool in_list(const std::vector<std::string>& list, const std::string& word) {
  return std::find(list.begin(), list.end(), word) != list.end();
}

}  // namespace fp_detail

// Lowercase, strip punctuation, drop stop words (negations survive),
// collapse whitespace. When stop-word removal empties the text the
// punctuation-stripped form is kept, so extraction is idempotent.
inline std::string normalize_assertion(std::string_view justification,
                                       const FingerprintOptions& options = {}) {
  std::string cleaned;
  cleaned.reserve(justification.size());
  size_t i = 0;
  const std::string_view s = justification;
  while (i < s.size()) {
    const unsigned char c = s[i];
    // Curly quotes and dashes arrive as UTF-8; quotes vanish, dashes space.
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
      const unsigned char third = s[i + 2];
      if (third >= 0x98 && third <= 0x9D) {  // curly single/double quotes
        i += 3;
        continue;
      }
      if (third == 0x93 || third == 0x94 || third == 0xA6) {  // dashes, ellipsis
        cleaned.push_back(' ');
        i += 3;
        continue;
      }
    }
    if (std::isalnum(c) || std::isspace(c) || c >= 0x80) {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '-' || c == '/') {
      cleaned.push_back(' ');
    }
    ++i;
  }

  std::string kept;
  for (const auto& token : text::split_whitespace(cleaned)) {
    if (options.stopwords->count(token)) continue;
    if (!kept.empty()) kept.push_back(' ');
    kept += token;
  }
  if (kept.empty()) return text::collapse_whitespace(cleaned);
  return kept;
}

// All maximal spans inside straight or curly quotes, whitespace-collapsed,
// deduplicated, sorted, joined with '|'. Word-internal straight single
// quotes are apostrophes, not delimiters.
inline std::vector<std::string> extract_quoted_spans(std::string_view s) {
  std::vector<std::string> spans;
  size_t i = 0;
  auto curly_at = [&](size_t pos) -> int {
    // returns 1 for opening double, 2 for closing double, 3 opening single,
    // 4 closing single, 0 otherwise
    if (pos + 2 >= s.size()) return 0;
    if (static_cast<unsigned char>(s[pos]) != 0xE2 ||
        static_cast<unsigned char>(s[pos + 1]) != 0x80) {
      return 0;
    }
    switch (static_cast<unsigned char>(s[pos + 2])) {
      case 0x9C: return 1;
      case 0x9D: return 2;
      case 0x98: return 3;
      case 0x99: return 4;
      default: return 0;
    }
  };
  auto is_apostrophe = [&](size_t pos) {
    const bool prev_word = pos > 0 && fp_detail::is_word_byte(s[pos - 1]);
    const bool next_word = pos + 1 < s.size() && fp_detail::is_word_byte(s[pos + 1]);
    return prev_word && next_word;
  };

  while (i < s.size()) {
    size_t content_start = 0, content_end = 0, next_i = 0;
    bool found = false;
    if (s[i] == '"' || (s[i] == '\'' && !is_apostrophe(i))) {
      const char open = s[i];
      for (size_t j = i + 1; j < s.size(); ++j) {
        if (s[j] == open && (open != '\'' || !is_apostrophe(j))) {
          content_start = i + 1;
          content_end = j;
          next_i = j + 1;
          found = true;
          break;
        }
      }
    } else if (const int kind = curly_at(i); kind == 1 || kind == 3) {
      const int closer = kind + 1;
      for (size_t j = i + 3; j < s.size(); ++j) {
        if (curly_at(j) == closer) {
          content_start = i + 3;
          content_end = j;
          next_i = j + 3;
          found = true;
          break;
        }
      }
    }
    if (found) {
      const std::string span =
          text::collapse_whitespace(s.substr(content_start, content_end - content_start));
      if (!span.empty()) spans.push_back(span);
      i = next_i;
    } else {
      ++i;
    }
  }

  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  return spans;
}

// The primary verifiable integer from a justification: the integer nearest
// (in tokens) to a count keyword, first occurrence on ties. Integers that
// appear only in limit phrasing ("200-word limit", "limit of 200", "<= 200")
// are demoted below any non-limit integer.
inline std::optional<std::string> extract_primary_integer(std::string_view justification,
                                                          const FingerprintOptions& options = {}) {
  const auto raw_tokens = text::split_whitespace(justification);
  struct Candidate {
    size_t index;
    long long value;
    bool limit;
  };
  std::vector<Candidate> candidates;
  std::vector<size_t> keyword_positions;
  std::vector<std::string> cores(raw_tokens.size());

  for (size_t i = 0; i < raw_tokens.size(); ++i) {
    const auto tv = fp_detail::split_token(raw_tokens[i]);
    cores[i] = text::to_lower(tv.core);
    if (fp_detail::in_list(options.count_keywords, cores[i])) keyword_positions.push_back(i);
  }

  for (size_t i = 0; i < raw_tokens.size(); ++i) {
    const auto tv = fp_detail::split_token(raw_tokens[i]);
    bool limit = false;
    std::optional<long long> value = fp_detail::parse_integer(tv.core);

    if (!value) {
      // Hyphen compounds like "200-word" carry the integer in limit context.
      const auto dash = tv.core.find('-');
      if (dash != std::string::npos) {
        const auto head = fp_detail::parse_integer(tv.core.substr(0, dash));
        const std::string tail = text::to_lower(tv.core.substr(dash + 1));
        if (head && text::starts_with(tail, "word")) {
          value = head;
          limit = true;
        }
      }
    }
    if (!value) continue;

    // Comparator glued to the number ("<=200") or in the preceding token.
    for (const auto& cmp : options.limit_comparators) {
      if (tv.prefix.find(cmp) != std::string::npos) limit = true;
    }
    if (i > 0) {
      const std::string& prev = cores[i - 1];
      const std::string prev_raw = text::to_lower(raw_tokens[i - 1]);
      for (const auto& cmp : options.limit_comparators) {
        if (prev == cmp || prev_raw == cmp) limit = true;
      }
      if (fp_detail::in_list(options.limit_markers, prev)) limit = true;
      if (prev == "of" && i > 1 && fp_detail::in_list(options.limit_markers, cores[i - 2])) {
        limit = true;
      }
    }
    if (i + 1 < raw_tokens.size() && fp_detail::in_list(options.limit_markers, cores[i + 1])) {
      limit = true;
    }
    candidates.push_back({i, *value, limit});
  }

  if (candidates.empty()) return std::nullopt;

  const bool any_primary = std::any_of(candidates.begin(), candidates.end(),
                                       [](const Candidate& c) { return !c.limit; });
  const Candidate* best = nullptr;
  size_t best_dist = SIZE_MAX;
  for (const auto& c : candidates) {
    if (any_primary && c.limit) continue;
    size_t dist = SIZE_MAX - 1;
    for (size_t kw : keyword_positions) {
      const size_t d = kw > c.index ? kw - c.index : c.index - kw;
      dist = std::min(dist, d);
    }
    if (dist < best_dist) {  // strict: ties keep the first occurrence
      best_dist = dist;
      best = &c;
    }
  }
  return std::to_string(best->value);
}

inline FingerprintResult extract_fingerprint(std::string_view justification, Strategy strategy,
                                             const FingerprintOptions& options = {}) {
  if (text::trim(justification).empty()) {
    raise(ErrorCode::EmptyJustification, "cannot fingerprint an empty justification");
  }
  FingerprintResult result;
  switch (strategy) {
    case Strategy::Numeric: {
      if (auto value = extract_primary_integer(justification, options)) {
        result.strategy_used = Strategy::Numeric;
        result.fingerprint = *value;
        return result;
      }
      break;  // fall back
    }
    case Strategy::Quote: {
      const auto spans = extract_quoted_spans(justification);
      if (!spans.empty()) {
        result.strategy_used = Strategy::Quote;
        std::string joined;
        for (const auto& span : spans) {
          if (!joined.empty()) joined.push_back('|');
          joined += span;
        }
        result.fingerprint = joined;
        return result;
      }
      break;  // fall back
    }
    case Strategy::Assertion:
      result.strategy_used = Strategy::Assertion;
      result.fingerprint = normalize_assertion(justification, options);
      if (result.fingerprint.empty()) result.fingerprint = text::trim(justification);
      return result;
  }
  result = extract_fingerprint(justification, Strategy::Assertion, options);
  result.fell_back = true;
  return result;
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

struct ClusterOutcome {
  std::vector<int> labels;  // per input, deterministic given input order
  int dominant_size = 0;
  int total = 0;
  double r_stab = 0.0;  // 100 * dominant_size / total
};

namespace cluster_detail {

// Relabels clusters in order of first appearance and fills the dominant
// cluster fields; size ties go to the cluster containing the earliest
// input.
inline ClusterOutcome finish(std::vector<int> raw_labels) {
  ClusterOutcome out;
  std::map<int, int> rename;
  for (int& label : raw_labels) {
    auto [it, inserted] = rename.emplace(label, int(rename.size()));
    label = it->second;
  }
  out.total = int(raw_labels.size());
  std::vector<int> sizes(rename.size(), 0);
  for (int label : raw_labels) ++sizes[label];
  // First-appearance labeling means lower labels contain earlier inputs, so
  // the first maximal size wins ties.
  for (int label = 0; label < int(sizes.size()); ++label) {
    if (sizes[label] > out.dominant_size) out.dominant_size = sizes[label];
  }
  out.labels = std::move(raw_labels);
  out.r_stab = 100.0 * double(out.dominant_size) / double(out.total);
  return out;
}

}  // namespace cluster_detail

// DBSCAN over cosine distance d(u,v) = 1 - u.v. With the default
// min_pts = 1 every point is core and the clusters are exactly the
// connected components of the epsilon-threshold graph. For min_pts > 1,
// points DBSCAN would call noise become singleton clusters so the result
// stays a total partition and the dominant-share ratio stays well-defined.
inline ClusterOutcome cluster(const std::vector<EmbeddingVector>& vectors, double epsilon = 0.05,
                              int min_pts = 1) {
  if (vectors.empty()) raise(ErrorCode::EmptyInput, "cannot cluster zero vectors");
  const size_t n = vectors.size();

  std::vector<std::vector<size_t>> neighbors(n);
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = 0; b < n; ++b) {
      if (1.0 - vectors[a].dot(vectors[b]) <= epsilon) neighbors[a].push_back(b);
    }
  }

  std::vector<int> labels(n, -1);
  int next_cluster = 0;
  for (size_t seed = 0; seed < n; ++seed) {
    if (labels[seed] != -1) continue;
    if (int(neighbors[seed].size()) < min_pts) continue;  // resolved below
    const int cluster_id = next_cluster++;
    labels[seed] = cluster_id;
    std::deque<size_t> frontier{seed};
    while (!frontier.empty()) {
      const size_t p = frontier.front();
      frontier.pop_front();
      if (int(neighbors[p].size()) < min_pts) continue;  // border point
      for (size_t q : neighbors[p]) {
        if (labels[q] == -1) {
          labels[q] = cluster_id;
          frontier.push_back(q);
        }
      }
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] == -1) labels[i] = next_cluster++;
  }
  return cluster_detail::finish(std::move(labels));
}

// Exact-match clustering: one cluster per distinct fingerprint string.
// Bypasses embeddings; integer separation under an embedder is a model
// property, equality is a guarantee.
inline ClusterOutcome cluster_exact(const std::vector<std::string>& fingerprints) {
  if (fingerprints.empty()) raise(ErrorCode::EmptyInput, "cannot cluster zero fingerprints");
  std::map<std::string, int> ids;
  std::vector<int> labels;
  labels.reserve(fingerprints.size());
  for (const auto& f : fingerprints) {
    auto [it, inserted] = ids.emplace(f, int(ids.size()));
    labels.push_back(it->second);
  }
  return cluster_detail::finish(std::move(labels));
}

// ---------------------------------------------------------------------------
// Reasoning stability over a clustering scope
// ---------------------------------------------------------------------------

struct ReasoningOptions {
  double epsilon = 0.05;
  int min_pts = 1;
  bool exact_numeric = false;  // cluster Numeric fingerprints by equality
  FingerprintOptions fingerprint;
};

// All records must share one (scenario, profile, generator, judge, test
// set, question) scope; error-answer runs are excluded from N.
inline ClusterOutcome reasoning_stability(const std::vector<JudgmentRecord>& records,
                                          Strategy strategy, EmbeddingProvider& provider,
                                          const ReasoningOptions& options = {}) {
  if (records.empty()) raise(ErrorCode::EmptyInput, "no records in clustering scope");
  const auto& first = records.front();
  for (const auto& r : records) {
    const bool same_scope = r.scenario_id == first.scenario_id &&
                            r.profile_id == first.profile_id &&
                            r.generator_id == first.generator_id &&
                            r.judge_id == first.judge_id && r.test_set == first.test_set &&
                            r.question_id == first.question_id;
    if (!same_scope) {
      raise(ErrorCode::MixedScope, "records span more than one clustering scope");
    }
  }

  std::vector<std::string> fingerprints;
  for (const auto& r : records) {
    if (r.answer == Answer::Error) continue;
    fingerprints.push_back(
        extract_fingerprint(r.justification, strategy, options.fingerprint).fingerprint);
  }
  if (fingerprints.empty()) {
    raise(ErrorCode::EmptyInput, "clustering scope contains only error runs");
  }

  if (options.exact_numeric && strategy == Strategy::Numeric) {
    return cluster_exact(fingerprints);
  }
  const auto vectors = embed(fingerprints, provider);
  return cluster(vectors, options.epsilon, options.min_pts);
}

}  // namespace stabaudit
