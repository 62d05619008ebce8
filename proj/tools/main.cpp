// stabaudit: stability auditing for LLM-as-a-judge rubric evaluation.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3
// provider/transport error. Failures print a machine-parseable error object
// on stderr: {"error": {"code": "...", "message": "..."}}.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabaudit/stabaudit.hpp"

namespace fs = std::filesystem;
using namespace stabaudit;

namespace {

void print_error(std::string_view code, const std::string& message) {
  ordered_json err;
  err["error"]["code"] = std::string(code);
  err["error"]["message"] = message;
  std::cerr << err.dump() << "\n";
}

std::map<std::string, std::vector<Rubric>> load_config_rubrics(const ExperimentConfig& cfg) {
  std::map<std::string, std::vector<Rubric>> rubrics;
  for (const auto& scenario : cfg.scenarios) {
    for (const auto& path : scenario.rubric_paths) {
      auto [rubric, ignored] = parse_candidate_rubric(read_file(path), TestSet::Objective,
                                                      scenario.id);
      rubrics[scenario.id].push_back(std::move(rubric));
    }
  }
  return rubrics;
}

// Rubrics for metrics come from the store itself (judge-run and simulate
// both save them); a config is the fallback for stores written by other
// tooling.
std::vector<Rubric> rubrics_for_store(const JsonlStore& store,
                                      const std::optional<ExperimentConfig>& cfg) {
  auto rubrics = store.load_rubrics();
  if (rubrics.empty() && cfg) {
    for (auto& [scenario, list] : load_config_rubrics(*cfg)) {
      for (auto& rubric : list) rubrics.push_back(std::move(rubric));
    }
  }
  if (rubrics.empty()) {
    raise(ErrorCode::MissingStratum,
          "no rubrics found in the store and no config supplied them");
  }
  return rubrics;
}

RecordFilter group_filter(const std::string& group) {
  RecordFilter filter;
  if (group.empty() || group == "pooled" || group == "Pooled") return filter;
  try {
    filter.group_k = std::stoi(group);
  } catch (const std::exception&) {
    raise(ErrorCode::UnknownMode, "--group expects a run-group size or 'pooled'");
  }
  return filter;
}

std::vector<JudgmentRecord> require_records(const JsonlStore& store, const RecordFilter& filter) {
  if (!store.has_records()) {
    raise(ErrorCode::EmptyStore, "empty store at '" + store.root().string() + "'");
  }
  auto records = store.load_records(filter);
  if (records.empty()) {
    raise(ErrorCode::MissingStratum, "no records match the requested stratum");
  }
  return records;
}

AggregationOptions aggregation_options(const std::optional<ExperimentConfig>& cfg) {
  AggregationOptions options;
  if (cfg) {
    options.agreement_mode = cfg->agreement_mode;
    options.sigma_sample = cfg->sigma_sample;
    options.per_profile_stats = cfg->per_profile_stats;
    options.reasoning.epsilon = cfg->epsilon;
    options.reasoning.min_pts = cfg->min_pts;
    options.reasoning.exact_numeric = cfg->exact_numeric;
  }
  return options;
}

ReportBundle build_bundle(const JsonlStore& store, const std::vector<JudgmentRecord>& records,
                          const std::vector<Rubric>& rubrics, EmbeddingProvider& embedder,
                          const AggregationOptions& options) {
  ReportBundle bundle;
  bundle.verdict = aggregate_verdict(records, rubrics, options);
  bundle.reasoning = aggregate_reasoning(records, rubrics, embedder, options);
  bundle.total_records = long(records.size());
  for (const auto& r : records) {
    if (r.answer == Answer::Error) ++bundle.error_records;
  }
  bundle.corrupt_lines = store.corrupt_lines();
  return bundle;
}

// ---------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------

int cmd_rubric_generate(const std::string& config_path, const std::string& scenario_id,
                        const std::string& mode_name, const std::string& provider_id,
                        const std::string& aut_prompt_override, const std::string& out_path) {
  const auto cfg = ExperimentConfig::load(config_path);
  const TestSet mode = test_set_from_string(mode_name);

  std::string aut_prompt_path = aut_prompt_override;
  if (aut_prompt_path.empty()) {
    const auto* scenario = cfg.scenario(scenario_id);
    if (!scenario) {
      raise(ErrorCode::InvalidArgument,
            "scenario '" + scenario_id + "' is not in the config and no --aut-prompt given");
    }
    aut_prompt_path = scenario->aut_prompt_path;
  }
  const std::string aut_prompt = read_file(aut_prompt_path);
  const std::string generation_prompt = build_generation_prompt(aut_prompt, mode);
  const std::string raw = invoke(cfg.provider(provider_id), generation_prompt);
  auto [rubric, ignored] = parse_candidate_rubric(raw, mode, scenario_id);

  {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + out_path + "'");
    out << serialize_rubric(rubric).dump(2) << "\n";
  }
  ordered_json ignored_doc = ordered_json::array();
  for (const auto& entry : ignored) {
    ignored_doc.push_back({{"instruction", entry.text}, {"reason", entry.reason}});
  }
  const std::string ignored_path = out_path + ".ignored.json";
  {
    std::ofstream out(ignored_path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + ignored_path + "'");
    out << ignored_doc.dump(2) << "\n";
  }

  ordered_json summary;
  summary["rubric"] = out_path;
  summary["questions"] = rubric.questions.size();
  summary["ignored"] = ignored.size();
  summary["ignored_file"] = ignored_path;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_rubric_validate(const std::string& rubric_path, const std::string& decisions_path,
                        const std::string& out_path) {
  auto [rubric, ignored] =
      parse_candidate_rubric(read_file(rubric_path), TestSet::Objective);
  const auto decisions = parse_decisions_json(ordered_json::parse(read_file(decisions_path)));
  const auto validated = validate_rubric(std::move(rubric), decisions);

  const std::string target = out_path.empty() ? rubric_path : out_path;
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + target + "'");
  out << serialize_rubric(validated).dump(2) << "\n";

  ordered_json summary;
  summary["rubric"] = target;
  summary["questions"] = validated.questions.size();
  summary["validated"] = true;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_judge_run(const std::string& config_path, const std::string& storage_override) {
  auto cfg = ExperimentConfig::load(config_path);
  if (!storage_override.empty()) cfg.storage = storage_override;
  if (cfg.profiles_path.empty()) {
    raise(ErrorCode::InvalidArgument, "config has no 'profiles' corpus path");
  }
  const auto profiles = load_profiles(cfg.profiles_path);
  const auto rubrics = load_config_rubrics(cfg);

  JsonlStore store(cfg.storage);
  for (const auto& [scenario, list] : rubrics) {
    for (const auto& rubric : list) store.save_rubric(rubric);
  }

  const auto generated = generate_outputs(cfg, store, profiles);
  const auto plan = plan_runs(cfg, profiles);
  const auto executed = execute_plan(plan, cfg, store, rubrics);

  ordered_json summary;
  summary["storage"] = cfg.storage;
  summary["outputs"] = generated.to_json();
  summary["judgments"] = executed.to_json();
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_metrics_verdict(const std::string& store_path, const std::string& group,
                        const std::optional<ExperimentConfig>& cfg) {
  JsonlStore store(store_path);
  const auto records = require_records(store, group_filter(group));
  const auto rubrics = rubrics_for_store(store, cfg);
  ReportBundle bundle;
  bundle.verdict = aggregate_verdict(records, rubrics, aggregation_options(cfg));
  bundle.total_records = long(records.size());
  for (const auto& r : records) {
    if (r.answer == Answer::Error) ++bundle.error_records;
  }
  bundle.corrupt_lines = store.corrupt_lines();
  std::cout << report_detail::markdown_verdict(bundle);
  return 0;
}

int cmd_metrics_reasoning(const std::string& store_path, const std::string& group,
                          const std::optional<ExperimentConfig>& cfg) {
  JsonlStore store(store_path);
  const auto records = require_records(store, group_filter(group));
  const auto rubrics = rubrics_for_store(store, cfg);
  const auto embedder = make_embedding_provider(cfg ? cfg->embedding : EmbeddingConfig{});
  ReportBundle bundle;
  bundle.reasoning = aggregate_reasoning(records, rubrics, *embedder, aggregation_options(cfg));
  std::cout << report_detail::markdown_reasoning(bundle);
  return 0;
}

int cmd_cross_check(const std::string& store_path, const std::string& corpus_path,
                    const std::string& bindings_path, const std::string& out_path) {
  JsonlStore store(store_path);
  if (!store.has_records()) {
    raise(ErrorCode::EmptyStore, "empty store at '" + store_path + "'");
  }
  const auto records = store.load_records();
  const auto profiles = load_profiles(corpus_path);
  const auto bindings = CheckerBindings::load(bindings_path);
  const auto rubrics = rubrics_for_store(store, std::nullopt);

  std::map<std::string, std::string> outputs;
  for (const auto& output : store.load_all_outputs()) {
    outputs[output_key(output.scenario_id, output.profile_id, output.generator_id)] =
        output.output;
  }

  ordered_json detail = ordered_json::array();
  std::string table = "| Scenario | Test set | Question | Compared | Agree | Rate |\n";
  table += "|---|---|---|---|---|---|\n";
  std::string notes;
  long disagreements = 0;
  for (const auto& rubric : rubrics) {
    if (rubric.test_set != TestSet::Objective) continue;
    const auto report = cross_check(records, outputs, rubric, bindings, profiles);
    for (const auto& summary : report.per_question) {
      char rate[16];
      std::snprintf(rate, sizeof(rate), "%.2f%%", 100.0 * summary.agreement_rate());
      table += "| " + rubric.scenario_id + " | " + std::string(test_set_name(rubric.test_set)) +
               " | " + summary.question_id + " | " + std::to_string(summary.compared) + " | " +
               std::to_string(summary.agreements) + " | " + rate + " |\n";
    }
    for (const auto& cmp : report.comparisons) {
      if (cmp.agree) continue;
      ++disagreements;
      ordered_json row;
      row["scenario"] = cmp.scenario_id;
      row["profile"] = cmp.profile_id;
      row["generator"] = cmp.generator_id;
      row["judge"] = cmp.judge_id;
      row["group_k"] = cmp.group_k;
      row["run_index"] = cmp.run_index;
      row["question"] = cmp.question_id;
      row["judge_answer"] = std::string(answer_name(cmp.judge_answer));
      row["judge_justification"] = cmp.judge_justification;
      row["code_verdict"] = std::string(answer_name(cmp.code_verdict));
      row["code_evidence"] = cmp.code_evidence;
      detail.push_back(std::move(row));
    }
    notes += "- scenario " + rubric.scenario_id + ": Tier-2 (LLM-only) runs skipped " +
             std::to_string(report.tier2_skipped) + ", error runs skipped " +
             std::to_string(report.error_runs_skipped) + "\n";
  }
  std::cout << "# Tier-1 Cross-Check\n\n" << table << "\n" << notes
            << "\nTotal disagreements: " << disagreements << "\n";

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + out_path + "'");
    out << detail.dump(2) << "\n";
  }
  return 0;
}

int cmd_simulate(const std::string& preset_name, std::optional<long> seed,
                 const std::string& store_path, const std::vector<int>& groups) {
  auto bundle = preset(preset_from_string(preset_name));
  if (seed) bundle.profile.seed = uint64_t(*seed);
  JsonlStore store(store_path);
  const auto summary = run_simulation(bundle, groups, store);

  ordered_json out;
  out["preset"] = bundle.name;
  out["seed"] = bundle.profile.seed;
  out["profiles"] = bundle.n_profiles;
  out["store"] = store_path;
  out["records_appended"] = summary.records_appended;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& store_path, const std::string& format_name,
               const std::string& out_dir, const std::string& group,
               const std::optional<ExperimentConfig>& cfg) {
  JsonlStore store(store_path);
  const auto records = require_records(store, group_filter(group));
  const auto rubrics = rubrics_for_store(store, cfg);
  const auto embedder = make_embedding_provider(cfg ? cfg->embedding : EmbeddingConfig{});
  const auto bundle =
      build_bundle(store, records, rubrics, *embedder, aggregation_options(cfg));
  const auto format = report_format_from_string(format_name);
  const auto written = emit_report(bundle, format, out_dir);

  ordered_json summary;
  summary["files"] = ordered_json::array();
  for (const auto& path : written) summary["files"].push_back(path.string());
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_sweep_epsilon(const std::string& store_path, const std::vector<double>& epsilons,
                      const std::optional<ExperimentConfig>& cfg) {
  JsonlStore store(store_path);
  const auto records = require_records(store, {});
  const auto rubrics = rubrics_for_store(store, cfg);
  const auto embedder = make_embedding_provider(cfg ? cfg->embedding : EmbeddingConfig{});

  std::cout << "| epsilon | rubric-mean R_stab (pooled) |\n|---|---|\n";
  for (const double epsilon : epsilons) {
    auto options = aggregation_options(cfg);
    options.reasoning.epsilon = epsilon;
    const auto tables = aggregate_reasoning(records, rubrics, *embedder, options);
    double sum = 0.0;
    int n = 0;
    for (const auto& table : tables) {
      const GroupKey pooled_key = table.groups.back();
      const auto it = table.rubric_row.find(pooled_key);
      if (it != table.rubric_row.end() && !std::isnan(it->second)) {
        sum += it->second;
        ++n;
      }
    }
    char value[32];
    std::snprintf(value, sizeof(value), "%.4f", n == 0 ? 0.0 : sum / n);
    std::cout << "| " << epsilon << " | " << value << " |\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability auditing for LLM-as-a-judge rubric evaluation"};
  app.require_subcommand(1);

  std::string config_path, scenario_id, mode_name, provider_id, aut_prompt, out_path;
  std::string store_path, group, corpus_path, bindings_path = "assets/checkers/bindings.json";
  std::string rubric_path, decisions_path, format_name = "md", preset_name;
  std::string storage_override;
  std::optional<long> seed;
  std::vector<int> groups = {5, 10, 20, 25, 30};
  std::vector<double> epsilons = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5};

  auto* rubric_generate = app.add_subcommand(
      "rubric-generate", "Draft a candidate rubric from an application's system prompt");
  rubric_generate->add_option("--config", config_path)->required();
  rubric_generate->add_option("--scenario", scenario_id)->required();
  rubric_generate->add_option("--mode", mode_name, "Objective or Subjective")->required();
  rubric_generate->add_option("--provider", provider_id)->required();
  rubric_generate->add_option("--aut-prompt", aut_prompt, "override the scenario prompt path");
  rubric_generate->add_option("--out", out_path)->required();

  auto* rubric_validate =
      app.add_subcommand("rubric-validate", "Apply an SME decisions file to a candidate rubric");
  rubric_validate->add_option("--rubric", rubric_path)->required();
  rubric_validate->add_option("--decisions", decisions_path)->required();
  rubric_validate->add_option("--out", out_path);

  auto* judge_run =
      app.add_subcommand("judge-run", "Plan and execute the repeated-measures design (resumable)");
  judge_run->add_option("--config", config_path)->required();
  judge_run->add_option("--storage", storage_override, "override the config storage directory");

  auto* metrics_verdict =
      app.add_subcommand("metrics-verdict", "Verdict-stability tables from a store");
  metrics_verdict->add_option("--store", store_path)->required();
  metrics_verdict->add_option("--group", group, "run-group size or 'pooled'");
  metrics_verdict->add_option("--config", config_path);

  auto* metrics_reasoning =
      app.add_subcommand("metrics-reasoning", "Reasoning-stability tables from a store");
  metrics_reasoning->add_option("--store", store_path)->required();
  metrics_reasoning->add_option("--group", group, "run-group size or 'pooled'");
  metrics_reasoning->add_option("--config", config_path);

  auto* cross_check_cmd =
      app.add_subcommand("cross-check", "Compare judge verdicts against Tier-1 code verdicts");
  cross_check_cmd->add_option("--store", store_path)->required();
  cross_check_cmd->add_option("--corpus", corpus_path)->required();
  cross_check_cmd->add_option("--bindings", bindings_path);
  cross_check_cmd->add_option("--out", out_path, "write disagreement detail JSON here");

  auto* simulate = app.add_subcommand("simulate", "Generate synthetic judgments into a store");
  simulate->add_option("--preset", preset_name, "StabilityTrap, KappaParadox, or Perfect")
      ->required();
  simulate->add_option("--seed", seed);
  simulate->add_option("--store", store_path)->required();
  simulate->add_option("--groups", groups, "run-group sizes")->delimiter(',');

  auto* report = app.add_subcommand("report", "Emit verdict + reasoning report files");
  report->add_option("--store", store_path)->required();
  report->add_option("--format", format_name, "md, json, or csv");
  report->add_option("--out", out_path, "output directory")->required();
  report->add_option("--group", group);
  report->add_option("--config", config_path);

  auto* sweep = app.add_subcommand("sweep-epsilon", "Rubric-mean R_stab across epsilon values");
  sweep->add_option("--store", store_path)->required();
  sweep->add_option("--values", epsilons)->delimiter(',');
  sweep->add_option("--config", config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    print_error("Usage", e.what());
    return 1;
  }

  try {
    std::optional<ExperimentConfig> cfg;
    if (!config_path.empty() && !rubric_generate->parsed() && !judge_run->parsed()) {
      cfg = ExperimentConfig::load(config_path);
    }
    if (rubric_generate->parsed()) {
      return cmd_rubric_generate(config_path, scenario_id, mode_name, provider_id, aut_prompt,
                                 out_path);
    }
    if (rubric_validate->parsed()) {
      return cmd_rubric_validate(rubric_path, decisions_path, out_path);
    }
    if (judge_run->parsed()) return cmd_judge_run(config_path, storage_override);
    if (metrics_verdict->parsed()) return cmd_metrics_verdict(store_path, group, cfg);
    if (metrics_reasoning->parsed()) return cmd_metrics_reasoning(store_path, group, cfg);
    if (cross_check_cmd->parsed()) {
      return cmd_cross_check(store_path, corpus_path, bindings_path, out_path);
    }
    if (simulate->parsed()) return cmd_simulate(preset_name, seed, store_path, groups);
    if (report->parsed()) return cmd_report(store_path, format_name, out_path, group, cfg);
    if (sweep->parsed()) return cmd_sweep_epsilon(store_path, epsilons, cfg);
    print_error("Usage", "no subcommand selected");
    return 1;
  } catch (const Error& e) {
    print_error(code_name(e.code()), e.detail());
    return exit_class(e.code());
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 2;
  }
}
