#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabaudit/corpus.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/text.hpp"

// Append-only experiment store. One JudgmentRecord per line, partitioned by
// (scenario, judge, generator); AUT outputs and rubrics live beside the
// records so a store directory is self-describing:
//
//   <root>/records/<scenario>/<judge>__<generator>.jsonl
//   <root>/outputs/<scenario>/<generator>/<profile>.json
//   <root>/rubrics/<scenario>-<obj|subj>.json

namespace stabaudit {

inline std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ", utc.tm_year + 1900,
                utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec);
  return buffer;
}

// Counters shared by plan execution, output generation, and simulation.
struct RunSummary {
  long planned_cells = 0;
  long skipped_cells = 0;  // already complete in the store
  long executed_cells = 0;
  long rubric_evaluations = 0;
  long error_evaluations = 0;  // judge runs recorded as Error answers
  long records_appended = 0;

  ordered_json to_json() const {
    ordered_json j;
    j["planned_cells"] = planned_cells;
    j["skipped_cells"] = skipped_cells;
    j["executed_cells"] = executed_cells;
    j["rubric_evaluations"] = rubric_evaluations;
    j["error_evaluations"] = error_evaluations;
    j["records_appended"] = records_appended;
    return j;
  }
};

struct RecordFilter {
  std::optional<std::string> scenario_id;
  std::optional<std::string> profile_id;
  std::optional<std::string> generator_id;
  std::optional<std::string> judge_id;
  std::optional<TestSet> test_set;
  std::optional<int> group_k;
  std::optional<std::string> question_id;

  bool matches(const JudgmentRecord& r) const {
    if (scenario_id && r.scenario_id != *scenario_id) return false;
    if (profile_id && r.profile_id != *profile_id) return false;
    if (generator_id && r.generator_id != *generator_id) return false;
    if (judge_id && r.judge_id != *judge_id) return false;
    if (test_set && r.test_set != *test_set) return false;
    if (group_k && r.group_k != *group_k) return false;
    if (question_id && r.question_id != *question_id) return false;
    return true;
  }
};

struct OutputRecord {
  std::string scenario_id;
  std::string profile_id;
  std::string generator_id;
  std::string filled_prompt;
  std::string output;
  std::string created_at;
};

class JsonlStore {
 public:
  explicit JsonlStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  bool has_records() const {
    const auto dir = root_ / "records";
    if (!std::filesystem::exists(dir)) return false;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl" &&
          entry.file_size() > 0) {
        return true;
      }
    }
    return false;
  }

  // ------------------------------------------------------------------
  // Judgment records
  // ------------------------------------------------------------------

  // Single-writer contract per partition: the partition mutex makes each
  // append a line-complete write even with concurrent workers.
  void append(const std::vector<JudgmentRecord>& records) {
    for (const auto& r : records) {
      const auto path = partition_path(r.scenario_id, r.judge_id, r.generator_id);
      std::lock_guard<std::mutex> lock(partition_mutex(path.string()));
      std::filesystem::create_directories(path.parent_path());
      std::ofstream out(path, std::ios::app | std::ios::binary);
      if (!out) raise(ErrorCode::UnwritablePath, "cannot append to '" + path.string() + "'");
      out << to_json(r).dump() << '\n';
    }
  }

  // Stable ordering: sorted by the full record key. Lines that do not parse
  // (for example a line still being written by a concurrent writer) are
  // skipped and counted.
  std::vector<JudgmentRecord> load_records(const RecordFilter& filter = {}) const {
    std::vector<JudgmentRecord> records;
    const auto dir = root_ / "records";
    if (!std::filesystem::exists(dir)) return records;

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      std::string line;
      while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        try {
          auto record = judgment_from_json(ordered_json::parse(line));
          if (filter.matches(record)) records.push_back(std::move(record));
        } catch (const std::exception&) {
          ++corrupt_lines_;
        }
      }
    }
    std::sort(records.begin(), records.end(),
              [](const JudgmentRecord& a, const JudgmentRecord& b) { return a.key() < b.key(); });
    // The record key is unique by contract; replayed appends collapse here.
    records.erase(std::unique(records.begin(), records.end(),
                              [](const JudgmentRecord& a, const JudgmentRecord& b) {
                                return a.key() == b.key();
                              }),
                  records.end());
    return records;
  }

  // Key set for resume checks, cheaper than materializing records.
  std::set<std::string> existing_keys() const {
    std::set<std::string> keys;
    for (const auto& r : load_records()) {
      keys.insert(record_key_string(r));
    }
    return keys;
  }

  static std::string record_key_string(const JudgmentRecord& r) {
    return r.scenario_id + "\x1f" + r.profile_id + "\x1f" + r.generator_id + "\x1f" + r.judge_id +
           "\x1f" + std::to_string(r.group_k) + "\x1f" + std::to_string(r.run_index) + "\x1f" +
           r.question_id;
  }

  int corrupt_lines() const { return corrupt_lines_; }

  // ------------------------------------------------------------------
  // AUT outputs
  // ------------------------------------------------------------------

  void save_output(const OutputRecord& output) {
    const auto path = output_path(output.scenario_id, output.generator_id, output.profile_id);
    std::filesystem::create_directories(path.parent_path());
    ordered_json doc;
    doc["scenario"] = output.scenario_id;
    doc["profile"] = output.profile_id;
    doc["generator"] = output.generator_id;
    doc["filled_prompt"] = output.filled_prompt;
    doc["output"] = output.output;
    doc["created_at"] = output.created_at;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
  }

  std::optional<OutputRecord> load_output(const std::string& scenario_id,
                                          const std::string& generator_id,
                                          const std::string& profile_id) const {
    const auto path = output_path(scenario_id, generator_id, profile_id);
    if (!std::filesystem::exists(path)) return std::nullopt;
    const auto doc = ordered_json::parse(read_file(path.string()));
    OutputRecord out;
    out.scenario_id = doc.value("scenario", "");
    out.profile_id = doc.value("profile", "");
    out.generator_id = doc.value("generator", "");
    out.filled_prompt = doc.value("filled_prompt", "");
    out.output = doc.value("output", "");
    out.created_at = doc.value("created_at", "");
    return out;
  }

  std::vector<OutputRecord> load_all_outputs() const {
    std::vector<OutputRecord> outputs;
    const auto dir = root_ / "outputs";
    if (!std::filesystem::exists(dir)) return outputs;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const auto doc = ordered_json::parse(read_file(file.string()));
      OutputRecord out;
      out.scenario_id = doc.value("scenario", "");
      out.profile_id = doc.value("profile", "");
      out.generator_id = doc.value("generator", "");
      out.filled_prompt = doc.value("filled_prompt", "");
      out.output = doc.value("output", "");
      out.created_at = doc.value("created_at", "");
      outputs.push_back(std::move(out));
    }
    return outputs;
  }

  // ------------------------------------------------------------------
  // Rubrics
  // ------------------------------------------------------------------

  void save_rubric(const Rubric& rubric) {
    const auto path = rubric_path(rubric.scenario_id, rubric.test_set);
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + path.string() + "'");
    out << serialize_rubric(rubric).dump(2) << '\n';
  }

  std::vector<Rubric> load_rubrics() const {
    std::vector<Rubric> rubrics;
    const auto dir = root_ / "rubrics";
    if (!std::filesystem::exists(dir)) return rubrics;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      auto [rubric, ignored] =
          parse_candidate_rubric(read_file(file.string()), TestSet::Objective);
      rubrics.push_back(std::move(rubric));
    }
    return rubrics;
  }

 private:
  std::filesystem::path partition_path(const std::string& scenario, const std::string& judge,
                                       const std::string& generator) const {
    return root_ / "records" / text::sanitize_id(scenario) /
           (text::sanitize_id(judge) + "__" + text::sanitize_id(generator) + ".jsonl");
  }

  std::filesystem::path output_path(const std::string& scenario, const std::string& generator,
                                    const std::string& profile) const {
    return root_ / "outputs" / text::sanitize_id(scenario) / text::sanitize_id(generator) /
           (text::sanitize_id(profile) + ".json");
  }

  std::filesystem::path rubric_path(const std::string& scenario, TestSet test_set) const {
    const std::string slug = test_set == TestSet::Objective ? "objective" : "subjective";
    return root_ / "rubrics" / (text::sanitize_id(scenario) + "-" + slug + ".json");
  }

  std::mutex& partition_mutex(const std::string& key) {
    std::lock_guard<std::mutex> lock(registry_mutex_);
    auto& slot = partition_mutexes_[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  std::filesystem::path root_;
  std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> partition_mutexes_;
  mutable int corrupt_lines_ = 0;
};

}  // namespace stabaudit
