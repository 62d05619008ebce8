#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stabaudit::text {

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Runs of whitespace become a single space; leading/trailing removed.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space && !out.empty()) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) tokens.emplace_back(s.substr(start, i - start));
  }
  return tokens;
}

// Words are maximal runs of non-whitespace.
inline size_t word_count(std::string_view s) {
  size_t count = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

// Strips a ``` / ```json fence pair when the whole body is wrapped in one.
// Bare text is returned unchanged, so stripping is conservative.
inline std::string strip_code_fences(std::string_view raw) {
  std::string s = trim(raw);
  if (s.rfind("```", 0) != 0) return s;
  size_t body_start = s.find('\n');
  if (body_start == std::string::npos) return s;
  size_t closing = s.rfind("```");
  if (closing <= body_start) return s;
  return trim(std::string_view(s).substr(body_start + 1, closing - body_start - 1));
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

inline bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

inline bool contains_ci(std::string_view hay, std::string_view needle) {
  return to_lower(hay).find(to_lower(needle)) != std::string::npos;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  if (from.empty()) return s;
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// First sentence: up to and including the first '.', '!' or '?' that is
// followed by whitespace or end-of-text. Whole text when none is found.
inline std::string first_sentence(std::string_view s) {
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '.' || s[i] == '!' || s[i] == '?') {
      if (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1]))) {
        return std::string(s.substr(0, i + 1));
      }
    }
  }
  return std::string(s);
}

// FNV-1a, used where hashes must be stable across platforms and processes.
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 1469598103934665603ULL) {
  uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Filesystem-safe id: anything outside [A-Za-z0-9._-] becomes '_'.
inline std::string sanitize_id(std::string_view id) {
  std::string out(id);
  for (char& c : out) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

}  // namespace stabaudit::text
