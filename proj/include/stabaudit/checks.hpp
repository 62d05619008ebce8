#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stabaudit/corpus.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/text.hpp"

// Tier-1 code-first verifiers for deterministically checkable rubric
// questions, plus the cross-check that compares judge verdicts against code
// verdicts. All checkers are pure: same text, same CheckResult.

namespace stabaudit {

struct CheckResult {
  std::string question_id;
  Answer verdict = Answer::No;  // Yes or No only
  std::string evidence;
};

// ---------------------------------------------------------------------------
// Core checkers
// ---------------------------------------------------------------------------

struct JsonObjectExpectation {
  std::vector<std::string> expect_keys;  // exact key set when non-empty
  bool forbid_fences = false;            // markdown fencing fails the check
};

inline CheckResult check_valid_json_object(std::string_view raw,
                                           const JsonObjectExpectation& expect = {}) {
  CheckResult result;
  const std::string trimmed = text::trim(raw);
  const bool fenced = text::starts_with(trimmed, "```");
  if (fenced && expect.forbid_fences) {
    result.verdict = Answer::No;
    result.evidence = "markdown fencing present";
    return result;
  }
  const std::string body = text::strip_code_fences(trimmed);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(body);
  } catch (const std::exception& e) {
    result.verdict = Answer::No;
    result.evidence = std::string("parse error: ") + e.what();
    return result;
  }
  if (!doc.is_object()) {
    result.verdict = Answer::No;
    result.evidence = "top-level value is not an object";
    return result;
  }
  std::vector<std::string> keys;
  for (auto it = doc.begin(); it != doc.end(); ++it) keys.push_back(it.key());
  std::string key_list;
  for (const auto& k : keys) {
    if (!key_list.empty()) key_list += ", ";
    key_list += k;
  }
  if (!expect.expect_keys.empty()) {
    std::set<std::string> want(expect.expect_keys.begin(), expect.expect_keys.end());
    std::set<std::string> have(keys.begin(), keys.end());
    if (want != have) {
      result.verdict = Answer::No;
      result.evidence = "keys: " + (key_list.empty() ? std::string("<none>") : key_list);
      return result;
    }
  }
  result.verdict = Answer::Yes;
  result.evidence = "keys: " + (key_list.empty() ? std::string("<none>") : key_list);
  return result;
}

inline CheckResult check_word_count_le(std::string_view content, long limit) {
  if (limit < 0) raise(ErrorCode::InvalidArgument, "word-count limit must be non-negative");
  CheckResult result;
  const size_t count = text::word_count(content);
  result.verdict = long(count) <= limit ? Answer::Yes : Answer::No;
  result.evidence = std::to_string(count);
  return result;
}

inline CheckResult check_contains_verbatim(std::string_view content,
                                           const std::vector<std::string>& needles,
                                           int min_matches, bool case_sensitive = true) {
  CheckResult result;
  std::vector<std::string> matched;
  for (const auto& needle : needles) {
    const bool hit = case_sensitive ? text::contains(content, needle)
                                    : text::contains_ci(content, needle);
    if (hit) matched.push_back(needle);
  }
  result.verdict = int(matched.size()) >= min_matches ? Answer::Yes : Answer::No;
  std::string listing;
  for (const auto& m : matched) {
    if (!listing.empty()) listing += " | ";
    listing += m;
  }
  result.evidence = "matched " + std::to_string(matched.size()) + "/" +
                    std::to_string(needles.size()) +
                    (listing.empty() ? "" : ": " + listing);
  return result;
}

inline CheckResult check_begins_with(std::string_view content, std::string_view prefix) {
  CheckResult result;
  // Byte-exact after trimming leading whitespace only.
  size_t b = 0;
  while (b < content.size() && std::isspace(static_cast<unsigned char>(content[b]))) ++b;
  const std::string_view body = content.substr(b);
  result.verdict = text::starts_with(body, prefix) ? Answer::Yes : Answer::No;
  result.evidence = "leading text: '" +
                    std::string(body.substr(0, std::min<size_t>(body.size(), prefix.size() + 20))) +
                    "'";
  return result;
}

inline const std::vector<std::string>& first_person_pronouns() {
  // "I" stays case-sensitive so stray capitals in odd tokens do not match.
  static const std::vector<std::string> pronouns = {"I",    "me",   "my",   "mine",
                                                    "I'm",  "I'll", "I've", "I'd"};
  return pronouns;
}

inline CheckResult check_first_person_pronoun(std::string_view content) {
  CheckResult result;
  // Word tokens may carry apostrophes (I'm, I'll).
  std::vector<std::string> tokens;
  std::string current;
  for (char c : content) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'') {
      current.push_back(c);
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);

  for (const auto& token : tokens) {
    for (const auto& pronoun : first_person_pronouns()) {
      const bool hit = pronoun == "I" ? token == "I"
                                      : text::to_lower(token) == text::to_lower(pronoun);
      if (hit) {
        result.verdict = Answer::Yes;
        result.evidence = "found '" + token + "'";
        return result;
      }
    }
  }
  result.verdict = Answer::No;
  result.evidence = "no first-person pronoun token";
  return result;
}

// ---------------------------------------------------------------------------
// Checker bindings: rubric question id -> checker + parameters
// ---------------------------------------------------------------------------

// The shipped mapping covers every objective question that is
// deterministically checkable; the rest are explicitly Tier-2 (LLM-only).
struct ScenarioBindings {
  std::map<std::string, nlohmann::ordered_json> bindings;  // question id -> spec
  std::set<std::string> tier2;
};

struct CheckerBindings {
  std::map<std::string, ScenarioBindings> scenarios;

  static CheckerBindings from_json(const nlohmann::ordered_json& doc) {
    CheckerBindings out;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      ScenarioBindings sb;
      const auto& entry = it.value();
      if (entry.contains("bindings")) {
        for (auto b = entry["bindings"].begin(); b != entry["bindings"].end(); ++b) {
          sb.bindings[b.key()] = b.value();
        }
      }
      if (entry.contains("tier2")) {
        for (const auto& id : entry["tier2"]) sb.tier2.insert(id.get<std::string>());
      }
      out.scenarios[it.key()] = std::move(sb);
    }
    return out;
  }

  static CheckerBindings load(const std::string& path) {
    return from_json(nlohmann::ordered_json::parse(read_file(path)));
  }
};

namespace check_detail {

// Resolves a binding's target within the AUT output: the whole text, one
// JSON key's value (optionally its first sentence), or several key values
// combined. Returns nullopt when the output is not the JSON object the
// target requires; the constraint then fails with that evidence.
inline std::optional<std::string> resolve_target(const nlohmann::ordered_json& binding,
                                                 const std::string& output) {
  if (!binding.contains("target") || binding["target"].value("whole", false)) {
    return output;
  }
  const auto& target = binding["target"];
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text::strip_code_fences(output));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (!doc.is_object()) return std::nullopt;

  auto key_text = [&](const std::string& key) -> std::optional<std::string> {
    if (!doc.contains(key)) return std::nullopt;
    const auto& v = doc[key];
    return v.is_string() ? v.get<std::string>() : v.dump();
  };

  if (target.contains("key")) {
    auto value = key_text(target["key"].get<std::string>());
    if (!value) return std::nullopt;
    if (target.value("first_sentence", false)) return text::first_sentence(*value);
    return value;
  }
  if (target.contains("keys_combined")) {
    std::string combined;
    for (const auto& key : target["keys_combined"]) {
      auto value = key_text(key.get<std::string>());
      if (!value) return std::nullopt;
      if (!combined.empty()) combined += "\n\n";
      combined += *value;
    }
    return combined;
  }
  return output;
}

inline std::vector<std::string> needles_from(const nlohmann::ordered_json& binding,
                                             const Profile& profile) {
  std::vector<std::string> needles;
  if (binding.contains("needles")) {
    for (const auto& n : binding["needles"]) needles.push_back(n.get<std::string>());
  }
  if (binding.contains("needles_from")) {
    for (const auto& field : binding["needles_from"]) {
      const std::string name = field.get<std::string>();
      if (!profile.fields.contains(name)) continue;
      for (auto& n : field_as_needles(profile.fields[name])) needles.push_back(std::move(n));
    }
  }
  return needles;
}

}  // namespace check_detail

// Runs the bound checker for one rubric question against one AUT output.
inline CheckResult run_checker(const nlohmann::ordered_json& binding,
                               const std::string& question_id, const std::string& output,
                               const Profile& profile) {
  const std::string checker = binding.value("checker", "");

  if (checker == "all_of") {
    CheckResult combined;
    combined.question_id = question_id;
    combined.verdict = Answer::Yes;
    for (const auto& sub : binding["checks"]) {
      const auto r = run_checker(sub, question_id, output, profile);
      if (!combined.evidence.empty()) combined.evidence += "; ";
      combined.evidence += r.evidence;
      if (r.verdict == Answer::No) combined.verdict = Answer::No;
    }
    return combined;
  }

  CheckResult result;
  if (checker == "valid_json_object") {
    JsonObjectExpectation expect;
    if (binding.contains("expect_keys")) {
      for (const auto& k : binding["expect_keys"]) expect.expect_keys.push_back(k.get<std::string>());
    }
    expect.forbid_fences = binding.value("forbid_fences", false);
    result = check_valid_json_object(output, expect);
  } else {
    const auto target = check_detail::resolve_target(binding, output);
    if (!target) {
      result.verdict = Answer::No;
      result.evidence = "target not reachable: output is not a JSON object with the required keys";
    } else if (checker == "word_count_le") {
      result = check_word_count_le(*target, binding.value("limit", 0L));
    } else if (checker == "contains_verbatim") {
      result = check_contains_verbatim(*target, check_detail::needles_from(binding, profile),
                                       binding.value("min_matches", 1),
                                       binding.value("case_sensitive", true));
    } else if (checker == "begins_with") {
      const std::string prefix = binding.value("prefix", "");
      if (binding.contains("followed_by_any_from")) {
        const std::string field = binding["followed_by_any_from"].get<std::string>();
        result.verdict = Answer::No;
        result.evidence = "no '" + prefix + "<item>' lead";
        if (profile.fields.contains(field)) {
          for (const auto& item : field_as_needles(profile.fields[field])) {
            const auto r = check_begins_with(*target, prefix + item);
            if (r.verdict == Answer::Yes) {
              result.verdict = Answer::Yes;
              result.evidence = "begins with '" + prefix + item + "'";
              break;
            }
          }
        }
      } else {
        result = check_begins_with(*target, prefix);
      }
    } else if (checker == "first_person_pronoun") {
      result = check_first_person_pronoun(*target);
    } else {
      raise(ErrorCode::NoCheckerForQuestion,
            "question '" + question_id + "' is bound to unknown checker '" + checker + "'");
    }
  }
  result.question_id = question_id;
  return result;
}

// ---------------------------------------------------------------------------
// Cross-check of judge verdicts against code verdicts
// ---------------------------------------------------------------------------

struct CheckComparison {
  std::string scenario_id;
  std::string profile_id;
  std::string generator_id;
  std::string judge_id;
  int group_k = 0;
  int run_index = 0;
  std::string question_id;
  Answer judge_answer = Answer::Yes;
  std::string judge_justification;
  Answer code_verdict = Answer::Yes;
  std::string code_evidence;
  bool agree = false;
};

struct QuestionCrossSummary {
  std::string question_id;
  int compared = 0;
  int agreements = 0;

  double agreement_rate() const {
    return compared == 0 ? 0.0 : double(agreements) / double(compared);
  }
};

struct DiscrepancyReport {
  std::vector<CheckComparison> comparisons;
  std::vector<QuestionCrossSummary> per_question;  // rubric order
  int tier2_skipped = 0;
  int error_runs_skipped = 0;
  int outputs_missing = 0;
};

// Key for locating the AUT output a record judged.
inline std::string output_key(const std::string& scenario_id, const std::string& profile_id,
                              const std::string& generator_id) {
  return scenario_id + "\x1f" + profile_id + "\x1f" + generator_id;
}

// Compares every judge verdict with the bound code verdict. Questions
// listed as Tier-2 are counted and skipped; an objective question that is
// neither bound nor listed is a coverage hole and errors out.
inline DiscrepancyReport cross_check(const std::vector<JudgmentRecord>& records,
                                     const std::map<std::string, std::string>& outputs,
                                     const Rubric& rubric,
                                     const CheckerBindings& all_bindings,
                                     const std::vector<Profile>& profiles) {
  DiscrepancyReport report;
  std::map<std::string, QuestionCrossSummary> summaries;
  for (const auto& q : rubric.questions) summaries[q.id] = {q.id, 0, 0};

  for (const auto& record : records) {
    if (!rubric.find(record.question_id)) continue;  // another rubric's records
    const auto scenario_it = all_bindings.scenarios.find(record.scenario_id);
    const ScenarioBindings* sb =
        scenario_it == all_bindings.scenarios.end() ? nullptr : &scenario_it->second;
    const nlohmann::ordered_json* binding = nullptr;
    if (sb) {
      const auto b = sb->bindings.find(record.question_id);
      if (b != sb->bindings.end()) binding = &b->second;
    }
    if (!binding) {
      if (sb && sb->tier2.count(record.question_id)) {
        ++report.tier2_skipped;
        continue;
      }
      raise(ErrorCode::NoCheckerForQuestion,
            "no deterministic checker for question '" + record.question_id + "'");
    }
    if (record.answer == Answer::Error) {
      ++report.error_runs_skipped;
      continue;
    }

    const Profile* profile = nullptr;
    for (const auto& p : profiles) {
      if (p.id == record.profile_id) {
        profile = &p;
        break;
      }
    }
    if (!profile) {
      raise(ErrorCode::EmptyCorpus, "profile '" + record.profile_id + "' missing from corpus");
    }
    const auto out_it =
        outputs.find(output_key(record.scenario_id, record.profile_id, record.generator_id));
    if (out_it == outputs.end()) {
      ++report.outputs_missing;
      continue;
    }

    const auto check = run_checker(*binding, record.question_id, out_it->second, *profile);
    CheckComparison cmp;
    cmp.scenario_id = record.scenario_id;
    cmp.profile_id = record.profile_id;
    cmp.generator_id = record.generator_id;
    cmp.judge_id = record.judge_id;
    cmp.group_k = record.group_k;
    cmp.run_index = record.run_index;
    cmp.question_id = record.question_id;
    cmp.judge_answer = record.answer;
    cmp.judge_justification = record.justification;
    cmp.code_verdict = check.verdict;
    cmp.code_evidence = check.evidence;
    cmp.agree = record.answer == check.verdict;

    auto& summary = summaries[record.question_id];
    ++summary.compared;
    if (cmp.agree) ++summary.agreements;
    report.comparisons.push_back(std::move(cmp));
  }

  for (const auto& q : rubric.questions) {
    if (summaries[q.id].compared > 0) report.per_question.push_back(summaries[q.id]);
  }
  return report;
}

// Coverage audit: objective rubric questions that are neither bound to a
// checker nor explicitly Tier-2.
inline std::vector<std::string> unmapped_questions(const Rubric& rubric,
                                                   const CheckerBindings& bindings) {
  std::vector<std::string> missing;
  const auto scenario_it = bindings.scenarios.find(rubric.scenario_id);
  for (const auto& q : rubric.questions) {
    if (q.test_set != TestSet::Objective) continue;
    if (scenario_it != bindings.scenarios.end()) {
      if (scenario_it->second.bindings.count(q.id)) continue;
      if (scenario_it->second.tier2.count(q.id)) continue;
    }
    missing.push_back(q.id);
  }
  return missing;
}

}  // namespace stabaudit
