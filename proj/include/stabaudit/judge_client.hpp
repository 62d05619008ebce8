#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/prompts.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/text.hpp"

// Chat-completion client for judge and generator calls: prompt assembly,
// HTTP invocation with retries, and strict parsing of the judge's
// structured JSON response. Endpoints with a mock: scheme are served
// in-process so the whole pipeline runs offline.

namespace stabaudit {

// ---------------------------------------------------------------------------
// Provider configuration
// ---------------------------------------------------------------------------

struct ProviderConfig {
  std::string id;
  std::string endpoint_url;
  std::string model_id;
  double temperature = 0.0;
  int max_retries = 2;
  int timeout_ms = 30000;
  int base_backoff_ms = 250;
  // Credentials travel only as an environment-variable name; the resolved
  // value never reaches logs or run records.
  std::string credential_env;
  // Dot path to the completion text, so any vendor dialect maps on.
  std::string response_text_path = "choices.0.message.content";

  bool is_mock() const { return text::starts_with(endpoint_url, "mock:"); }

  static ProviderConfig from_json(const std::string& id, const ordered_json& j) {
    ProviderConfig cfg;
    cfg.id = id;
    cfg.endpoint_url = j.value("endpoint_url", "");
    cfg.model_id = j.value("model_id", "");
    cfg.temperature = j.value("temperature", 0.0);
    cfg.max_retries = j.value("max_retries", 2);
    cfg.timeout_ms = j.value("timeout_ms", 30000);
    cfg.base_backoff_ms = j.value("base_backoff_ms", 250);
    cfg.credential_env = j.value("credential_env", "");
    cfg.response_text_path = j.value("response_text_path", "choices.0.message.content");
    if (cfg.temperature < 0.0) {
      raise(ErrorCode::InvalidArgument, "provider '" + id + "': temperature must be >= 0");
    }
    if (cfg.max_retries < 0) {
      raise(ErrorCode::InvalidArgument, "provider '" + id + "': max_retries must be >= 0");
    }
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Judge prompt
// ---------------------------------------------------------------------------

inline std::string build_judge_prompt(std::string_view filled_prompt,
                                      std::string_view model_output, const Rubric& rubric) {
  if (text::trim(filled_prompt).empty()) {
    raise(ErrorCode::InvalidArgument, "filled prompt is empty");
  }
  if (text::trim(model_output).empty()) {
    raise(ErrorCode::InvalidArgument, "model output is empty");
  }
  if (!rubric.validated) {
    raise(ErrorCode::UnvalidatedRubric, "judge prompts require a validated rubric");
  }
  std::string prompt(prompts::kJudgeScoring);
  prompt = text::replace_all(std::move(prompt), "{filled_prompt}", filled_prompt);
  prompt = text::replace_all(std::move(prompt), "{model_output}", model_output);
  prompt = text::replace_all(std::move(prompt), "{categorized_rubric_json}",
                             categorized_questions_json(rubric).dump(2));
  return prompt;
}

// ---------------------------------------------------------------------------
// Mock providers
// ---------------------------------------------------------------------------

namespace mock_detail {

// Pulls the categorized rubric JSON back out of a judge prompt.
inline std::optional<ordered_json> rubric_from_judge_prompt(std::string_view prompt) {
  constexpr std::string_view begin_marker = "Evaluation Rubric Start:\n---\n";
  constexpr std::string_view end_marker = "\n---\nEvaluation Rubric End";
  const auto begin = prompt.find(begin_marker);
  if (begin == std::string_view::npos) return std::nullopt;
  const auto body_start = begin + begin_marker.size();
  const auto end = prompt.find(end_marker, body_start);
  if (end == std::string_view::npos) return std::nullopt;
  try {
    return ordered_json::parse(prompt.substr(body_start, end - body_start));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Deterministic judge: every rubric question gets a Yes with a
// justification that is a pure function of the question text, so repeated
// runs are bit-identical.
inline std::string yes_judge(std::string_view prompt) {
  const auto rubric = rubric_from_judge_prompt(prompt);
  if (!rubric) {
    raise(ErrorCode::Provider, "mock judge: prompt carries no rubric section");
  }
  ordered_json response = ordered_json::object();
  for (auto it = rubric->begin(); it != rubric->end(); ++it) {
    ordered_json items = ordered_json::array();
    for (const auto& question : it.value()) {
      ordered_json item;
      item["question"] = question.get<std::string>();
      item["justification"] = "Verified against the output: " + question.get<std::string>();
      item["answer"] = "Yes";
      items.push_back(std::move(item));
    }
    response[it.key()] = std::move(items);
  }
  return response.dump(2);
}

// Deterministic generator keyed off the scenario's required JSON keys.
inline std::string generator(std::string_view prompt) {
  ordered_json out;
  if (prompt.find("strengths_summary") != std::string_view::npos) {
    out["strengths_summary"] =
        "The employee delivered consistent results across the review period and owned "
        "several cross-team efforts end to end.";
    out["growth_areas_summary"] =
        "To address planning, schedule a short weekly review to keep priorities visible.";
  } else if (prompt.find("headline_summary") != std::string_view::npos) {
    out["headline_summary"] = "Building the platform I want to run tomorrow.";
    out["detailed_vision_statement"] =
        "I will grow from my current role into broader ownership, pairing my top skills "
        "with the areas I want to master next. My path will stay anchored to measurable "
        "outcomes.";
  } else {
    return "OK";
  }
  return out.dump();
}

}  // namespace mock_detail

// ---------------------------------------------------------------------------
// Invocation
// ---------------------------------------------------------------------------

namespace client_detail {

inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Walks a dot path; integer segments index arrays.
inline std::optional<std::string> extract_text(const nlohmann::json& doc,
                                               const std::string& path) {
  const nlohmann::json* node = &doc;
  size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string segment =
        path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!segment.empty()) {
      if (node->is_array()) {
        size_t index = 0;
        try {
          index = std::stoul(segment);
        } catch (const std::exception&) {
          return std::nullopt;
        }
        if (index >= node->size()) return std::nullopt;
        node = &(*node)[index];
      } else if (node->is_object() && node->contains(segment)) {
        node = &(*node)[segment];
      } else {
        return std::nullopt;
      }
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!node->is_string()) return std::nullopt;
  return node->get<std::string>();
}

}  // namespace client_detail

// Sends one chat completion and returns the completion text. Transport
// failures and retryable statuses (429, 5xx) back off exponentially up to
// max_retries; auth rejections fail immediately.
inline std::string invoke(const ProviderConfig& cfg, const std::string& prompt) {
  if (cfg.is_mock()) {
    const std::string_view kind(cfg.endpoint_url);
    if (kind == "mock:judge-yes") return mock_detail::yes_judge(prompt);
    if (kind == "mock:generator") return mock_detail::generator(prompt);
    if (text::starts_with(kind, "mock:static:")) {
      return cfg.endpoint_url.substr(std::string_view("mock:static:").size());
    }
    raise(ErrorCode::Provider, "unknown mock endpoint '" + cfg.endpoint_url + "'");
  }

  std::string bearer;
  if (!cfg.credential_env.empty()) {
    const char* value = std::getenv(cfg.credential_env.c_str());
    if (!value || !*value) {
      raise(ErrorCode::Auth, "credential environment variable '" + cfg.credential_env +
                                 "' is not set");
    }
    bearer = value;
  }

  nlohmann::json body;
  body["model"] = cfg.model_id;
  body["temperature"] = cfg.temperature;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  const std::string payload = body.dump();

  const auto [base, path] = client_detail::split_url(cfg.endpoint_url);
  std::string last_failure;
  ErrorCode exhausted_code = ErrorCode::Transport;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(cfg.base_backoff_ms * (1L << (attempt - 1))));
    }
    httplib::Client client(base);
    client.set_connection_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_failure = httplib::to_string(res.error());
      exhausted_code = ErrorCode::Transport;
      continue;  // transport: retry
    }
    if (res->status == 401 || res->status == 403) {
      raise(ErrorCode::Auth, "provider rejected the credential (HTTP " +
                                 std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
      exhausted_code = ErrorCode::Provider;
      continue;  // retryable
    }
    if (res->status < 200 || res->status >= 300) {
      raise(ErrorCode::Provider,
            "HTTP " + std::to_string(res->status) + ": " + res->body);
    }

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
      raise(ErrorCode::Provider, std::string("response is not JSON: ") + e.what() +
                                     "; body: " + res->body);
    }
    const auto completion = client_detail::extract_text(doc, cfg.response_text_path);
    if (!completion) {
      raise(ErrorCode::Provider,
            "no completion text at '" + cfg.response_text_path + "'; body: " + res->body);
    }
    return *completion;
  }
  raise(exhausted_code, "gave up after " + std::to_string(cfg.max_retries + 1) +
                            " attempts; last failure: " + last_failure);
}

// ---------------------------------------------------------------------------
// Judge response parsing
// ---------------------------------------------------------------------------

struct JudgeResponseItem {
  std::string question;  // matches the rubric question verbatim
  std::string justification;
  Answer answer = Answer::Yes;  // Yes or No only
};

// Strict parse of the judge's structured response: fences stripped, every
// rubric question present exactly once, answers normalized
// case-insensitively to Yes/No, items returned in rubric order. Any
// deviation marks the whole run unusable.
inline std::vector<JudgeResponseItem> parse_judge_output(std::string_view raw,
                                                         const Rubric& rubric) {
  if (!rubric.validated) {
    raise(ErrorCode::UnvalidatedRubric, "judge responses are parsed against validated rubrics");
  }
  ordered_json doc;
  try {
    doc = ordered_json::parse(text::strip_code_fences(raw));
  } catch (const std::exception& e) {
    raise(ErrorCode::MalformedJson, std::string("judge response is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    raise(ErrorCode::MalformedJson, "judge response is not a JSON object");
  }

  std::vector<JudgeResponseItem> found;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto category = category_from_name(it.key());
    if (!category) {
      raise(ErrorCode::MalformedJson, "unexpected top-level key '" + it.key() + "'");
    }
    if (!it.value().is_array()) {
      raise(ErrorCode::MalformedJson, "category '" + it.key() + "' is not a list");
    }
    for (const auto& entry : it.value()) {
      if (!entry.is_object()) {
        raise(ErrorCode::MalformedJson, "category entries must be objects");
      }
      JudgeResponseItem item;
      item.question = text::trim(entry.value("question", ""));
      item.justification = text::trim(entry.value("justification", ""));
      const std::string answer = text::to_lower(text::trim(entry.value("answer", "")));
      if (answer == "yes") {
        item.answer = Answer::Yes;
      } else if (answer == "no") {
        item.answer = Answer::No;
      } else {
        raise(ErrorCode::InvalidAnswer, "'" + entry.value("answer", "") + "' for question '" +
                                            item.question + "'");
      }
      if (item.justification.empty()) {
        raise(ErrorCode::MalformedJson, "empty justification for question '" + item.question + "'");
      }
      found.push_back(std::move(item));
    }
  }

  std::vector<JudgeResponseItem> ordered;
  ordered.reserve(rubric.questions.size());
  for (const auto& q : rubric.questions) {
    const JudgeResponseItem* match = nullptr;
    for (const auto& item : found) {
      if (item.question == q.text) {
        if (match) {
          raise(ErrorCode::MalformedJson, "question answered twice: '" + q.text + "'");
        }
        match = &item;
      }
    }
    if (!match) {
      raise(ErrorCode::MissingQuestion, q.id);
    }
    ordered.push_back(*match);
  }
  if (found.size() != ordered.size()) {
    for (const auto& item : found) {
      if (!std::any_of(rubric.questions.begin(), rubric.questions.end(),
                       [&](const RubricQuestion& q) { return q.text == item.question; })) {
        raise(ErrorCode::InventedQuestion, item.question);
      }
    }
  }
  return ordered;
}

}  // namespace stabaudit
