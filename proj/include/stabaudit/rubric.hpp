#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stabaudit/errors.hpp"
#include "stabaudit/prompts.hpp"
#include "stabaudit/text.hpp"

// Instruction taxonomy, operational scoping, the rubric data model, rubric
// generation prompt assembly, and the file-review HITL validation workflow.

namespace stabaudit {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Taxonomy
// ---------------------------------------------------------------------------

enum class Verifiability { ObjectiveSyntactic, ObjectiveSemantic, Subjective };
enum class Dependency { Conditional, NonConditional };
enum class ScopeStatus { InScope, ExcludedConditional, ExcludedOther };
enum class TestSet { Objective, Subjective };
enum class Strategy { Numeric, Quote, Assertion };

enum class QuestionCategory {
  InstructionCompleteness,
  DataFieldUtilization,
  FormatAdherence,
  StyleAdherence,
};

inline constexpr std::array<std::string_view, 4> kCategoryNames = {
    "Instruction Completeness",
    "Data Field Utilization",
    "Format Adherence",
    "Style Adherence",
};

inline std::string_view category_name(QuestionCategory c) {
  return kCategoryNames[static_cast<size_t>(c)];
}

inline std::optional<QuestionCategory> category_from_name(std::string_view name) {
  for (size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (name == kCategoryNames[i]) return static_cast<QuestionCategory>(i);
  }
  return std::nullopt;
}

inline std::string_view test_set_name(TestSet t) {
  return t == TestSet::Objective ? "Objective" : "Subjective";
}

inline TestSet test_set_from_string(std::string_view s) {
  if (s == "Objective" || s == "objective") return TestSet::Objective;
  if (s == "Subjective" || s == "subjective") return TestSet::Subjective;
  raise(ErrorCode::UnknownMode, "unknown test set '" + std::string(s) + "'");
}

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Numeric: return "Numeric";
    case Strategy::Quote: return "Quote";
    case Strategy::Assertion: return "Assertion";
  }
  raise(ErrorCode::InvalidArgument, "invalid strategy value");
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "Numeric" || s == "N") return Strategy::Numeric;
  if (s == "Quote" || s == "Q") return Strategy::Quote;
  if (s == "Assertion" || s == "A") return Strategy::Assertion;
  raise(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct InstructionRecord {
  std::string id;
  std::string text;
  Verifiability verifiability = Verifiability::ObjectiveSyntactic;
  Dependency dependency = Dependency::NonConditional;
  ScopeStatus scope_status = ScopeStatus::InScope;
  std::string exclusion_reason;  // non-empty whenever scope_status is an exclusion
};

struct RubricQuestion {
  std::string id;  // e.g. "A-obj-Q8"
  std::string text;
  QuestionCategory category = QuestionCategory::InstructionCompleteness;
  TestSet test_set = TestSet::Objective;
  Strategy strategy = Strategy::Assertion;
  std::string scenario_id;
  std::string source_instruction_id;  // lineage back to an InstructionRecord, when known

  bool operator==(const RubricQuestion&) const = default;
};

enum class HitlAction { Accept, Edit, Reject };

inline std::string_view hitl_action_name(HitlAction a) {
  switch (a) {
    case HitlAction::Accept: return "accept";
    case HitlAction::Edit: return "edit";
    case HitlAction::Reject: return "reject";
  }
  raise(ErrorCode::InvalidArgument, "invalid HITL action");
}

struct HitlDecision {
  std::string question_id;
  HitlAction action = HitlAction::Accept;
  std::string new_text;  // only for Edit
};

struct HitlDecisions {
  std::string approver;
  std::string timestamp;
  std::vector<HitlDecision> items;
};

struct ValidationRecord {
  std::string approver;
  std::string timestamp;
  // One entry per decided question id, rejected ones included.
  std::vector<std::pair<std::string, HitlAction>> decisions;

  bool operator==(const ValidationRecord&) const = default;
};

struct IgnoredInstruction {
  std::string text;
  std::string reason;  // Subjective | Conditional | Objective (captured verbatim)
};

struct Rubric {
  std::string scenario_id;
  TestSet test_set = TestSet::Objective;
  std::vector<QuestionCategory> categories;  // ordered; every question's category is listed
  std::vector<RubricQuestion> questions;     // ordered
  bool validated = false;
  std::optional<ValidationRecord> validation;

  const RubricQuestion* find(std::string_view question_id) const {
    for (const auto& q : questions) {
      if (q.id == question_id) return &q;
    }
    return nullptr;
  }

  bool operator==(const Rubric&) const = default;
};

// ---------------------------------------------------------------------------
// Operational scoping
// ---------------------------------------------------------------------------

// Conditional instructions are excluded from reference-free evaluation: a
// missing gated action is indistinguishable from a correct non-action.
inline std::vector<InstructionRecord> apply_scope(std::vector<InstructionRecord> records) {
  for (auto& r : records) {
    if (r.dependency == Dependency::Conditional) {
      r.scope_status = ScopeStatus::ExcludedConditional;
      if (r.exclusion_reason.empty()) {
        r.exclusion_reason = "conditional instruction; not verifiable without input manipulation";
      }
    } else {
      r.scope_status = ScopeStatus::InScope;
      r.exclusion_reason.clear();
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Rubric generation prompt
// ---------------------------------------------------------------------------

inline std::string build_generation_prompt(std::string_view aut_system_prompt, TestSet mode) {
  if (text::trim(aut_system_prompt).empty()) {
    raise(ErrorCode::InvalidArgument, "AUT system prompt is empty");
  }
  std::string_view tpl;
  switch (mode) {
    case TestSet::Objective: tpl = prompts::kObjectiveRubricGeneration; break;
    case TestSet::Subjective: tpl = prompts::kSubjectiveRubricGeneration; break;
    default: raise(ErrorCode::UnknownMode, "mode is not a valid test set");
  }
  return text::replace_all(std::string(tpl), "{aut_system_prompt}", aut_system_prompt);
}

// ---------------------------------------------------------------------------
// Strategy assignment
// ---------------------------------------------------------------------------

// Keyword heuristic over the question text. Checks naming verbatim content
// win over quantitative phrasing; a strategy pinned in the rubric file is
// never overwritten by this heuristic.
inline Strategy infer_strategy(std::string_view question_text) {
  const std::string t = text::to_lower(question_text);
  static constexpr std::string_view quote_cues[] = {
      "verbatim", "exact", "begin with", "begins with", "start with",
      "starts with", "quote", "string match", "string matches",
  };
  static constexpr std::string_view numeric_cues[] = {
      "word count", "character count", "at least", "at most", "no more than",
      "fewer than", "less than", "word limit", "number of words", "how many",
  };
  for (auto cue : quote_cues) {
    if (t.find(cue) != std::string::npos) return Strategy::Quote;
  }
  for (auto cue : numeric_cues) {
    if (t.find(cue) != std::string::npos) return Strategy::Numeric;
  }
  return Strategy::Assertion;
}

inline RubricQuestion assign_strategy(RubricQuestion q) {
  q.strategy = infer_strategy(q.text);
  return q;
}

// ---------------------------------------------------------------------------
// Parsing and serialization
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_interrogative(std::string_view s) {
  const std::string t = text::trim(s);
  return !t.empty() && t.back() == '?';
}

inline const char* obj_subj_slug(TestSet t) {
  return t == TestSet::Objective ? "obj" : "subj";
}

inline ValidationRecord validation_from_json(const ordered_json& j) {
  ValidationRecord rec;
  rec.approver = j.value("approver", "");
  rec.timestamp = j.value("timestamp", "");
  if (j.contains("decisions") && j["decisions"].is_object()) {
    for (auto it = j["decisions"].begin(); it != j["decisions"].end(); ++it) {
      const std::string action = it.value().get<std::string>();
      HitlAction a = HitlAction::Accept;
      if (action == "edit") a = HitlAction::Edit;
      else if (action == "reject") a = HitlAction::Reject;
      else if (action != "accept") {
        raise(ErrorCode::MalformedRubricJson, "unknown validation action '" + action + "'");
      }
      rec.decisions.emplace_back(it.key(), a);
    }
  }
  return rec;
}

}  // namespace detail

// Parses the categorized-checklist schema produced by the generation prompt.
// Also accepts the extended rubric-file form where question entries are
// objects carrying {id, text, strategy}; a strategy pinned there wins over
// the heuristic. Returns the rubric plus the ignored-instructions list.
inline std::pair<Rubric, std::vector<IgnoredInstruction>> parse_candidate_rubric(
    std::string_view raw, TestSet mode, std::string_view scenario_id = "") {
  const std::string body = text::strip_code_fences(raw);
  ordered_json doc;
  try {
    doc = ordered_json::parse(body);
  } catch (const std::exception& e) {
    raise(ErrorCode::MalformedRubricJson, std::string("rubric body is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    raise(ErrorCode::MalformedRubricJson, "rubric body is not a JSON object");
  }

  Rubric rubric;
  rubric.scenario_id = doc.value("scenario_id", std::string(scenario_id));
  rubric.test_set = doc.contains("test_set")
                        ? test_set_from_string(doc["test_set"].get<std::string>())
                        : mode;
  std::vector<IgnoredInstruction> ignored;

  int seq = 0;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string& key = it.key();
    if (key == "scenario_id" || key == "test_set" || key == "validated" || key == "validation") {
      continue;
    }
    if (key == "Ignored Instructions") {
      for (const auto& entry : it.value()) {
        IgnoredInstruction ii;
        if (entry.is_object()) {
          ii.text = entry.contains("instruction") ? entry["instruction"].get<std::string>()
                                                  : entry.value("text", "");
          ii.reason = entry.value("reason", "");
        } else if (entry.is_string()) {
          ii.text = entry.get<std::string>();
        }
        ignored.push_back(std::move(ii));
      }
      continue;
    }
    const auto category = category_from_name(key);
    if (!category) {
      raise(ErrorCode::UnknownCategory, "'" + key + "' is not a rubric category");
    }
    rubric.categories.push_back(*category);
    if (!it.value().is_array()) {
      raise(ErrorCode::MalformedRubricJson, "category '" + key + "' is not a list");
    }
    for (const auto& entry : it.value()) {
      RubricQuestion q;
      q.category = *category;
      q.test_set = rubric.test_set;
      q.scenario_id = rubric.scenario_id;
      ++seq;
      if (entry.is_string()) {
        q.text = text::trim(entry.get<std::string>());
        q = assign_strategy(std::move(q));
      } else if (entry.is_object()) {
        q.text = text::trim(entry.value("text", ""));
        q.id = entry.value("id", "");
        q.source_instruction_id = entry.value("source_instruction_id", "");
        if (entry.contains("strategy")) {
          q.strategy = strategy_from_string(entry["strategy"].get<std::string>());
        } else {
          q = assign_strategy(std::move(q));
        }
      } else {
        raise(ErrorCode::MalformedRubricJson, "question entries must be strings or objects");
      }
      if (q.text.empty()) {
        raise(ErrorCode::MalformedRubricJson, "empty question text in category '" + key + "'");
      }
      if (!detail::is_interrogative(q.text)) {
        raise(ErrorCode::MalformedRubricJson, "question is not interrogative: '" + q.text + "'");
      }
      if (q.id.empty()) {
        q.id = rubric.scenario_id.empty()
                   ? "Q" + std::to_string(seq)
                   : rubric.scenario_id + "-" + detail::obj_subj_slug(rubric.test_set) + "-Q" +
                         std::to_string(seq);
      }
      rubric.questions.push_back(std::move(q));
    }
  }

  // Uniqueness of ids within the rubric.
  for (size_t i = 0; i < rubric.questions.size(); ++i) {
    for (size_t j = i + 1; j < rubric.questions.size(); ++j) {
      if (rubric.questions[i].id == rubric.questions[j].id) {
        raise(ErrorCode::MalformedRubricJson, "duplicate question id '" + rubric.questions[i].id + "'");
      }
    }
  }

  rubric.validated = doc.value("validated", false);
  if (doc.contains("validation")) {
    rubric.validation = detail::validation_from_json(doc["validation"]);
  }
  return {std::move(rubric), std::move(ignored)};
}

inline ordered_json serialize_rubric(const Rubric& rubric) {
  ordered_json doc;
  doc["scenario_id"] = rubric.scenario_id;
  doc["test_set"] = std::string(test_set_name(rubric.test_set));
  doc["validated"] = rubric.validated;
  if (rubric.validation) {
    ordered_json v;
    v["approver"] = rubric.validation->approver;
    v["timestamp"] = rubric.validation->timestamp;
    ordered_json decisions = ordered_json::object();
    for (const auto& [id, action] : rubric.validation->decisions) {
      decisions[id] = std::string(hitl_action_name(action));
    }
    v["decisions"] = std::move(decisions);
    doc["validation"] = std::move(v);
  }
  for (const auto category : rubric.categories) {
    ordered_json list = ordered_json::array();
    for (const auto& q : rubric.questions) {
      if (q.category != category) continue;
      ordered_json entry;
      entry["id"] = q.id;
      entry["text"] = q.text;
      entry["strategy"] = std::string(strategy_name(q.strategy));
      if (!q.source_instruction_id.empty()) {
        entry["source_instruction_id"] = q.source_instruction_id;
      }
      list.push_back(std::move(entry));
    }
    doc[std::string(category_name(category))] = std::move(list);
  }
  return doc;
}

// The category-keyed question-text document handed to the judge. Only
// non-empty categories appear, in rubric order.
inline ordered_json categorized_questions_json(const Rubric& rubric) {
  ordered_json doc = ordered_json::object();
  for (const auto category : rubric.categories) {
    ordered_json list = ordered_json::array();
    for (const auto& q : rubric.questions) {
      if (q.category == category) list.push_back(q.text);
    }
    if (!list.empty()) doc[std::string(category_name(category))] = std::move(list);
  }
  return doc;
}

// ---------------------------------------------------------------------------
// HITL validation
// ---------------------------------------------------------------------------

inline HitlDecisions parse_decisions_json(const ordered_json& doc) {
  HitlDecisions out;
  out.approver = doc.value("approver", "");
  out.timestamp = doc.value("timestamp", "");
  if (!doc.contains("decisions") || !doc["decisions"].is_array()) {
    raise(ErrorCode::MalformedJson, "decisions file must contain a 'decisions' list");
  }
  for (const auto& entry : doc["decisions"]) {
    HitlDecision d;
    d.question_id = entry.value("id", "");
    const std::string action = entry.value("action", "");
    if (action == "accept") d.action = HitlAction::Accept;
    else if (action == "edit") d.action = HitlAction::Edit;
    else if (action == "reject") d.action = HitlAction::Reject;
    else raise(ErrorCode::MalformedJson, "unknown decision action '" + action + "'");
    d.new_text = entry.value("text", "");
    out.items.push_back(std::move(d));
  }
  return out;
}

// Applies an SME decisions file: rejected questions are removed, edits are
// applied, and the validation record is attached. Every question id must be
// covered. Edited text keeps the question's pinned strategy.
inline Rubric validate_rubric(Rubric rubric, const HitlDecisions& decisions) {
  ValidationRecord record;
  record.approver = decisions.approver;
  record.timestamp = decisions.timestamp;

  std::vector<RubricQuestion> kept;
  kept.reserve(rubric.questions.size());
  for (auto& q : rubric.questions) {
    const HitlDecision* decision = nullptr;
    for (const auto& d : decisions.items) {
      if (d.question_id == q.id) {
        decision = &d;
        break;
      }
    }
    if (!decision) {
      raise(ErrorCode::MissingDecision, "no decision for question '" + q.id + "'");
    }
    record.decisions.emplace_back(q.id, decision->action);
    switch (decision->action) {
      case HitlAction::Reject:
        break;
      case HitlAction::Edit: {
        const std::string edited = text::trim(decision->new_text);
        if (!detail::is_interrogative(edited)) {
          raise(ErrorCode::EditBreaksInvariant,
                "edited text for '" + q.id + "' is not interrogative");
        }
        q.text = edited;
        kept.push_back(std::move(q));
        break;
      }
      case HitlAction::Accept:
        kept.push_back(std::move(q));
        break;
    }
  }
  rubric.questions = std::move(kept);
  rubric.validation = std::move(record);
  rubric.validated = true;
  return rubric;
}

// Question ids whose source instruction is Conditional — a validated rubric
// must have none.
inline std::vector<std::string> lineage_violations(const Rubric& rubric,
                                                   const std::vector<InstructionRecord>& records) {
  std::vector<std::string> bad;
  for (const auto& q : rubric.questions) {
    if (q.source_instruction_id.empty()) continue;
    for (const auto& r : records) {
      if (r.id == q.source_instruction_id && r.dependency == Dependency::Conditional) {
        bad.push_back(q.id);
      }
    }
  }
  return bad;
}

}  // namespace stabaudit
