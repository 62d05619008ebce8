#pragma once

#include <string>
#include <string_view>
#include <tuple>

#include <json.hpp>

#include "stabaudit/errors.hpp"
#include "stabaudit/rubric.hpp"

namespace stabaudit {

enum class Answer { Yes, No, Error };

inline std::string_view answer_name(Answer a) {
  switch (a) {
    case Answer::Yes: return "Yes";
    case Answer::No: return "No";
    case Answer::Error: return "Error";
  }
  raise(ErrorCode::InvalidArgument, "invalid answer value");
}

inline Answer answer_from_string(std::string_view s) {
  if (s == "Yes") return Answer::Yes;
  if (s == "No") return Answer::No;
  if (s == "Error") return Answer::Error;
  raise(ErrorCode::InvalidAnswer, "unknown answer '" + std::string(s) + "'");
}

// One judge answer for one rubric question in one run. The key tuple
// (scenario, profile, generator, judge, group_k, run_index, question) is
// unique within a store; answer == Error carries the failure detail in the
// justification field.
struct JudgmentRecord {
  std::string scenario_id;
  std::string profile_id;
  std::string generator_id;
  std::string judge_id;
  TestSet test_set = TestSet::Objective;
  int group_k = 0;
  int run_index = 0;
  std::string question_id;
  Answer answer = Answer::Yes;
  std::string justification;
  std::string created_at;

  auto key() const {
    return std::tie(scenario_id, profile_id, generator_id, judge_id, group_k, run_index,
                    question_id);
  }

  bool operator==(const JudgmentRecord&) const = default;
};

inline ordered_json to_json(const JudgmentRecord& r) {
  ordered_json j;
  j["scenario"] = r.scenario_id;
  j["profile"] = r.profile_id;
  j["generator"] = r.generator_id;
  j["judge"] = r.judge_id;
  j["test_set"] = std::string(test_set_name(r.test_set));
  j["group_k"] = r.group_k;
  j["run_index"] = r.run_index;
  j["question"] = r.question_id;
  j["answer"] = std::string(answer_name(r.answer));
  j["justification"] = r.justification;
  j["created_at"] = r.created_at;
  return j;
}

inline JudgmentRecord judgment_from_json(const ordered_json& j) {
  JudgmentRecord r;
  r.scenario_id = j.value("scenario", "");
  r.profile_id = j.value("profile", "");
  r.generator_id = j.value("generator", "");
  r.judge_id = j.value("judge", "");
  r.test_set = test_set_from_string(j.value("test_set", "Objective"));
  r.group_k = j.value("group_k", 0);
  r.run_index = j.value("run_index", 0);
  r.question_id = j.value("question", "");
  r.answer = answer_from_string(j.value("answer", ""));
  r.justification = j.value("justification", "");
  r.created_at = j.value("created_at", "");
  return r;
}

}  // namespace stabaudit
