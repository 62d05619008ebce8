#pragma once

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "stabaudit/config.hpp"
#include "stabaudit/corpus.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judge_client.hpp"
#include "stabaudit/store.hpp"

// Plans and executes the repeated-measures design: run groups are
// independent batches of fresh judge calls, every judgment is persisted,
// and a finished or crashed plan can be re-executed without duplicating
// records.

namespace stabaudit {

// One judge invocation: a profile's output evaluated by one judge in one
// run of one group. Every rubric attached to the scenario is scored within
// the cell.
struct PlanCell {
  std::string scenario_id;
  std::string profile_id;
  std::string generator_id;
  std::string judge_id;
  int group_k = 0;
  int run_index = 0;
};

struct RunPlan {
  std::vector<PlanCell> cells;
};

// Cartesian plan over profiles x generators x judges x run groups x run
// indices, in that nesting order. Only profiles whose scenario is
// configured participate.
inline RunPlan plan_runs(const ExperimentConfig& cfg, const std::vector<Profile>& profiles) {
  for (const auto& id : cfg.generators) cfg.provider(id);
  for (const auto& id : cfg.judges) cfg.provider(id);

  RunPlan plan;
  for (const auto& profile : profiles) {
    if (!cfg.scenario(profile.scenario_id)) continue;
    for (const auto& generator : cfg.generators) {
      for (const auto& judge : cfg.judges) {
        for (const int k : cfg.run_groups) {
          for (int run = 0; run < k; ++run) {
            plan.cells.push_back({profile.scenario_id, profile.id, generator, judge, k, run});
          }
        }
      }
    }
  }
  if (plan.cells.empty()) {
    raise(ErrorCode::EmptyCorpus, "no profiles match the configured scenarios");
  }
  return plan;
}

namespace harness_detail {

// One retry budget covers transport and parse failures alike: the provider
// is re-invoked up to max_retries times, whatever went wrong, and auth
// rejections stop immediately.
struct RubricEvalOutcome {
  std::vector<JudgeResponseItem> items;
  std::string error_detail;  // empty on success
};

inline RubricEvalOutcome evaluate_rubric(const ProviderConfig& judge_cfg,
                                         const std::string& judge_prompt, const Rubric& rubric) {
  ProviderConfig single_attempt = judge_cfg;
  single_attempt.max_retries = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= judge_cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(judge_cfg.base_backoff_ms * (1L << (attempt - 1))));
    }
    try {
      const std::string raw = invoke(single_attempt, judge_prompt);
      return {parse_judge_output(raw, rubric), ""};
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Auth) throw;
      last_error = std::string(code_name(e.code())) + ": " + e.detail();
    }
  }
  return {{}, last_error};
}

}  // namespace harness_detail

// Generates one AUT output per (profile, generator) with provenance;
// existing outputs are kept, so reruns are cheap and stable.
inline RunSummary generate_outputs(const ExperimentConfig& cfg, JsonlStore& store,
                                   const std::vector<Profile>& profiles) {
  RunSummary summary;
  std::map<std::string, std::string> prompt_templates;
  for (const auto& scenario : cfg.scenarios) {
    prompt_templates[scenario.id] = read_file(scenario.aut_prompt_path);
  }
  for (const auto& profile : profiles) {
    const auto tpl = prompt_templates.find(profile.scenario_id);
    if (tpl == prompt_templates.end()) continue;
    for (const auto& generator_id : cfg.generators) {
      ++summary.planned_cells;
      if (store.load_output(profile.scenario_id, generator_id, profile.id)) {
        ++summary.skipped_cells;
        continue;
      }
      const std::string filled = fill_template(tpl->second, profile);
      const std::string output = invoke(cfg.provider(generator_id), filled);
      OutputRecord record{profile.scenario_id, profile.id, generator_id, filled, output,
                          now_iso8601()};
      store.save_output(record);
      ++summary.executed_cells;
    }
  }
  return summary;
}

// Executes every incomplete cell through the judge client. A failed rubric
// evaluation never aborts the plan: each of its questions is recorded with
// answer = Error and the failure detail in the justification field.
// Executing the same plan twice yields the same record set as once.
inline RunSummary execute_plan(const RunPlan& plan, const ExperimentConfig& cfg,
                               JsonlStore& store,
                               const std::map<std::string, std::vector<Rubric>>& rubrics) {
  RunSummary summary;
  summary.planned_cells = long(plan.cells.size());

  // Outputs must exist for every judged (scenario, profile, generator).
  std::map<std::string, OutputRecord> outputs;
  for (const auto& cell : plan.cells) {
    const std::string key = cell.scenario_id + "\x1f" + cell.profile_id + "\x1f" +
                            cell.generator_id;
    if (outputs.count(key)) continue;
    auto output = store.load_output(cell.scenario_id, cell.generator_id, cell.profile_id);
    if (!output) {
      raise(ErrorCode::MissingOutput,
            "no stored output for scenario '" + cell.scenario_id + "', profile '" +
                cell.profile_id + "', generator '" + cell.generator_id +
                "'; generate outputs first");
    }
    outputs.emplace(key, std::move(*output));
  }

  const std::set<std::string> existing = store.existing_keys();
  std::mutex summary_mutex;
  std::atomic<size_t> next_cell{0};
  std::exception_ptr first_failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    while (true) {
      const size_t index = next_cell.fetch_add(1);
      if (index >= plan.cells.size()) return;
      const PlanCell& cell = plan.cells[index];
      try {
        const auto rubric_it = rubrics.find(cell.scenario_id);
        if (rubric_it == rubrics.end()) {
          raise(ErrorCode::InvalidArgument,
                "no rubrics loaded for scenario '" + cell.scenario_id + "'");
        }
        const auto& output = outputs.at(cell.scenario_id + "\x1f" + cell.profile_id + "\x1f" +
                                        cell.generator_id);

        long evals = 0, error_evals = 0, appended = 0;
        bool any_missing = false;
        for (const Rubric& rubric : rubric_it->second) {
          std::vector<const RubricQuestion*> missing;
          for (const auto& q : rubric.questions) {
            JudgmentRecord probe;
            probe.scenario_id = cell.scenario_id;
            probe.profile_id = cell.profile_id;
            probe.generator_id = cell.generator_id;
            probe.judge_id = cell.judge_id;
            probe.group_k = cell.group_k;
            probe.run_index = cell.run_index;
            probe.question_id = q.id;
            if (!existing.count(JsonlStore::record_key_string(probe))) {
              missing.push_back(&q);
            }
          }
          if (missing.empty()) continue;
          any_missing = true;

          const std::string judge_prompt =
              build_judge_prompt(output.filled_prompt, output.output, rubric);
          const auto outcome = harness_detail::evaluate_rubric(cfg.provider(cell.judge_id),
                                                               judge_prompt, rubric);
          ++evals;
          const std::string stamp = now_iso8601();
          std::vector<JudgmentRecord> records;
          for (const RubricQuestion* q : missing) {
            JudgmentRecord r;
            r.scenario_id = cell.scenario_id;
            r.profile_id = cell.profile_id;
            r.generator_id = cell.generator_id;
            r.judge_id = cell.judge_id;
            r.test_set = rubric.test_set;
            r.group_k = cell.group_k;
            r.run_index = cell.run_index;
            r.question_id = q->id;
            r.created_at = stamp;
            if (outcome.error_detail.empty()) {
              for (size_t i = 0; i < rubric.questions.size(); ++i) {
                if (rubric.questions[i].id == q->id) {
                  r.answer = outcome.items[i].answer;
                  r.justification = outcome.items[i].justification;
                  break;
                }
              }
            } else {
              r.answer = Answer::Error;
              r.justification = outcome.error_detail;
            }
            records.push_back(std::move(r));
          }
          if (!outcome.error_detail.empty()) ++error_evals;
          store.append(records);
          appended += long(records.size());
        }

        std::lock_guard<std::mutex> lock(summary_mutex);
        summary.rubric_evaluations += evals;
        summary.error_evaluations += error_evals;
        summary.records_appended += appended;
        if (any_missing) ++summary.executed_cells;
        else ++summary.skipped_cells;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!first_failure) first_failure = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  const int workers = std::max(1, cfg.parallelism);
  pool.reserve(size_t(workers));
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_failure) std::rethrow_exception(first_failure);
  return summary;
}

}  // namespace stabaudit
