#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "stabaudit/corpus.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

struct CliFixture {
  fs::path dir;

  CliFixture() {
    static std::atomic<int> counter{0};
    dir = fs::temp_directory_path() /
          ("stabaudit_cli_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter.fetch_add(1)));
    fs::create_directories(dir);
  }
  ~CliFixture() { fs::remove_all(dir); }

  CliResult run(const std::string& args) const {
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string command = std::string(STABAUDIT_CLI_BIN) + " " + args + " > " +
                                out_file.string() + " 2> " + err_file.string();
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = stabaudit::read_file(out_file.string());
    result.err = stabaudit::read_file(err_file.string());
    return result;
  }

  std::string write(const std::string& name, const std::string& content) const {
    const fs::path path = dir / name;
    std::ofstream out(path);
    out << content;
    return path.string();
  }
};

const std::string kAssets = STABAUDIT_ASSETS_DIR;

std::string offline_config(const CliFixture& fx, const std::string& storage) {
  nlohmann::ordered_json doc;
  doc["storage"] = storage;
  doc["seed"] = 7;
  doc["run_groups"] = {5, 10};
  doc["parallelism"] = 2;
  doc["profiles"] = kAssets + "/corpus/profiles.json";
  doc["scenarios"] = nlohmann::ordered_json::array(
      {{{"id", "A"},
        {"aut_prompt", kAssets + "/prompts/scenario_a_system.txt"},
        {"rubrics", {kAssets + "/rubrics/scenario_a_objective.json",
                     kAssets + "/rubrics/scenario_a_subjective.json"}}},
       {{"id", "B"},
        {"aut_prompt", kAssets + "/prompts/scenario_b_system.txt"},
        {"rubrics", {kAssets + "/rubrics/scenario_b_objective.json",
                     kAssets + "/rubrics/scenario_b_subjective.json"}}}});
  doc["generators"] = {"mock-generator"};
  doc["judges"] = {"mock-judge"};
  doc["providers"]["mock-generator"] = {{"endpoint_url", "mock:generator"},
                                        {"model_id", "mock"}};
  doc["providers"]["mock-judge"] = {{"endpoint_url", "mock:judge-yes"}, {"model_id", "mock"}};
  doc["embedding"] = {{"endpoint_url", "offline:"}};
  doc["checker_bindings"] = kAssets + "/checkers/bindings.json";
  return fx.write("config.json", doc.dump(2));
}

}  // namespace

TEST_CASE("cli: simulate Perfect then metrics-verdict prints an all-ones table") {
  CliFixture fx;
  const auto sim = fx.run("simulate --preset Perfect --store " + (fx.dir / "store").string());
  REQUIRE(sim.exit_code == 0);
  CHECK(sim.out.find("\"records_appended\"") != std::string::npos);

  const auto metrics = fx.run("metrics-verdict --store " + (fx.dir / "store").string());
  REQUIRE(metrics.exit_code == 0);
  CHECK(metrics.out.find("Pooled (90)") != std::string::npos);
  CHECK(metrics.out.find("100.00 | 100.00 | (1.0000, 1.0000)") != std::string::npos);
  CHECK(metrics.out.find("Almost Perfect") != std::string::npos);
}

TEST_CASE("cli: stability trap report shows perfect verdicts beside low reasoning") {
  CliFixture fx;
  REQUIRE(fx.run("simulate --preset StabilityTrap --store " + (fx.dir / "store").string())
              .exit_code == 0);
  const auto rep = fx.run("report --store " + (fx.dir / "store").string() + " --format md --out " +
                          (fx.dir / "rep").string());
  REQUIRE(rep.exit_code == 0);

  const auto verdict = stabaudit::read_file((fx.dir / "rep" / "verdict_summary.md").string());
  CHECK(verdict.find("| 100.00 | 100.00 |") != std::string::npos);

  const auto reasoning =
      stabaudit::read_file((fx.dir / "rep" / "reasoning_stability.md").string());
  // The Numeric question's pooled share lands far below 100.
  CHECK(reasoning.find("SIM-obj-Q2 | N | 40.00") != std::string::npos);
  CHECK(reasoning.find("100.00") != std::string::npos);

  // Re-emission is byte-stable.
  REQUIRE(fx.run("report --store " + (fx.dir / "store").string() + " --format md --out " +
                 (fx.dir / "rep2").string())
              .exit_code == 0);
  CHECK(stabaudit::read_file((fx.dir / "rep" / "verdict_summary.md").string()) ==
        stabaudit::read_file((fx.dir / "rep2" / "verdict_summary.md").string()));

  // JSON and CSV variants also emit.
  CHECK(fx.run("report --store " + (fx.dir / "store").string() + " --format json --out " +
               (fx.dir / "repj").string())
            .exit_code == 0);
  CHECK(fx.run("report --store " + (fx.dir / "store").string() + " --format csv --out " +
               (fx.dir / "repc").string())
            .exit_code == 0);
  CHECK(fs::exists(fx.dir / "repj" / "report.json"));
  CHECK(fs::exists(fx.dir / "repc" / "reasoning.csv"));
}

TEST_CASE("cli: report on an empty store exits 2 with an error object") {
  CliFixture fx;
  const auto result = fx.run("report --store " + (fx.dir / "nothing").string() + " --out " +
                             (fx.dir / "rep").string());
  CHECK(result.exit_code == 2);
  const auto err = nlohmann::json::parse(result.err);
  CHECK(err["error"]["code"] == "EmptyStore");
  CHECK(err["error"]["message"].get<std::string>().find("empty store") != std::string::npos);
}

TEST_CASE("cli: usage errors exit 1") {
  CliFixture fx;
  CHECK(fx.run("no-such-subcommand").exit_code == 1);
  CHECK(fx.run("simulate --preset NoSuchPreset --store x").exit_code == 1);
}

TEST_CASE("cli: transport failures exit 3") {
  CliFixture fx;
  nlohmann::ordered_json doc;
  doc["storage"] = (fx.dir / "store").string();
  doc["run_groups"] = {2};
  doc["profiles"] = kAssets + "/corpus/profiles.json";
  doc["scenarios"] = nlohmann::ordered_json::array(
      {{{"id", "A"},
        {"aut_prompt", kAssets + "/prompts/scenario_a_system.txt"},
        {"rubrics", {kAssets + "/rubrics/scenario_a_objective.json"}}}});
  doc["generators"] = {"dead"};
  doc["judges"] = {"dead"};
  doc["providers"]["dead"] = {{"endpoint_url", "http://127.0.0.1:1/v1/chat/completions"},
                              {"model_id", "x"},
                              {"max_retries", 0},
                              {"timeout_ms", 500}};
  const auto config = fx.write("dead.json", doc.dump());
  const auto result = fx.run("judge-run --config " + config);
  CHECK(result.exit_code == 3);
  CHECK(nlohmann::json::parse(result.err)["error"]["code"] == "Transport");
}

TEST_CASE("cli: full offline pipeline with the bundled corpus") {
  CliFixture fx;
  const auto store = (fx.dir / "store").string();
  const auto config = offline_config(fx, store);

  const auto run = fx.run("judge-run --config " + config);
  REQUIRE(run.exit_code == 0);
  const auto summary = nlohmann::json::parse(run.out);
  CHECK(summary["outputs"]["executed_cells"] == 6);     // 6 profiles x 1 generator
  CHECK(summary["judgments"]["planned_cells"] == 90);   // 6 x 1 x 1 x (5+10)
  CHECK(summary["judgments"]["records_appended"] == 1350);

  // Resumable: a second invocation executes nothing new.
  const auto rerun = fx.run("judge-run --config " + config);
  REQUIRE(rerun.exit_code == 0);
  const auto rerun_summary = nlohmann::json::parse(rerun.out);
  CHECK(rerun_summary["judgments"]["executed_cells"] == 0);
  CHECK(rerun_summary["judgments"]["records_appended"] == 0);

  const auto metrics = fx.run("metrics-verdict --store " + store + " --config " + config);
  REQUIRE(metrics.exit_code == 0);
  CHECK(metrics.out.find("| A | Objective | Pooled (15) | 100.00") != std::string::npos);
  CHECK(metrics.out.find("| B | Subjective | Pooled (15) | 100.00") != std::string::npos);

  const auto group5 = fx.run("metrics-verdict --store " + store + " --group 5");
  REQUIRE(group5.exit_code == 0);
  CHECK(group5.out.find("k=5") != std::string::npos);
  CHECK(group5.out.find("k=10") == std::string::npos);

  const auto cross = fx.run("cross-check --store " + store + " --corpus " + kAssets +
                            "/corpus/profiles.json --bindings " + kAssets +
                            "/checkers/bindings.json --out " + (fx.dir / "detail.json").string());
  REQUIRE(cross.exit_code == 0);
  // Structural checks agree with the all-Yes judge on the mock outputs.
  CHECK(cross.out.find("| A | Objective | A-obj-Q7 | 45 | 45 | 100.00% |") != std::string::npos);
  CHECK(cross.out.find("Total disagreements:") != std::string::npos);
  CHECK(fs::exists(fx.dir / "detail.json"));

  const auto sweep = fx.run("sweep-epsilon --store " + store + " --values 0.05,0.5");
  REQUIRE(sweep.exit_code == 0);
  CHECK(sweep.out.find("| 0.05 |") != std::string::npos);
}

TEST_CASE("cli: rubric-generate and rubric-validate round the HITL loop") {
  CliFixture fx;

  // A canned generator response rides on the mock:static provider.
  nlohmann::ordered_json candidate;
  candidate["Format Adherence"] = {"Is the output a valid JSON object?",
                                   "Is the word count less than or equal to 200 words?"};
  candidate["Style Adherence"] = nlohmann::ordered_json::array();
  candidate["Ignored Instructions"] = nlohmann::ordered_json::array(
      {{{"instruction", "Maintain a supportive tone."}, {"reason", "Subjective"}}});

  nlohmann::ordered_json doc;
  doc["storage"] = (fx.dir / "store").string();
  doc["profiles"] = kAssets + "/corpus/profiles.json";
  doc["scenarios"] = nlohmann::ordered_json::array(
      {{{"id", "A"}, {"aut_prompt", kAssets + "/prompts/scenario_a_system.txt"}}});
  doc["providers"]["drafter"] = {
      {"endpoint_url", "mock:static:" + candidate.dump()}, {"model_id", "mock"}};
  const auto config = fx.write("gen.json", doc.dump());

  const auto rubric_path = (fx.dir / "candidate.json").string();
  const auto generate = fx.run("rubric-generate --config " + config +
                               " --scenario A --mode Objective --provider drafter --out " +
                               rubric_path);
  REQUIRE(generate.exit_code == 0);
  const auto gen_summary = nlohmann::json::parse(generate.out);
  CHECK(gen_summary["questions"] == 2);
  CHECK(gen_summary["ignored"] == 1);
  CHECK(fs::exists(rubric_path + ".ignored.json"));

  // SME decisions: accept one, edit the other.
  nlohmann::ordered_json decisions;
  decisions["approver"] = "sme-7";
  decisions["timestamp"] = "2026-08-10T12:00:00Z";
  decisions["decisions"] = nlohmann::ordered_json::array(
      {{{"id", "A-obj-Q1"}, {"action", "accept"}},
       {{"id", "A-obj-Q2"},
        {"action", "edit"},
        {"text", "Is the combined word count at most 200 words?"}}});
  const auto decisions_path = fx.write("decisions.json", decisions.dump());

  const auto validated_path = (fx.dir / "validated.json").string();
  const auto validate = fx.run("rubric-validate --rubric " + rubric_path + " --decisions " +
                               decisions_path + " --out " + validated_path);
  REQUIRE(validate.exit_code == 0);

  const auto validated = nlohmann::json::parse(stabaudit::read_file(validated_path));
  CHECK(validated["validated"] == true);
  CHECK(validated["validation"]["approver"] == "sme-7");
  CHECK(validated["Format Adherence"][1]["text"] ==
        "Is the combined word count at most 200 words?");

  // A decisions file that misses a question is a data error.
  nlohmann::ordered_json incomplete;
  incomplete["approver"] = "sme-7";
  incomplete["decisions"] =
      nlohmann::ordered_json::array({{{"id", "A-obj-Q1"}, {"action", "accept"}}});
  const auto incomplete_path = fx.write("incomplete.json", incomplete.dump());
  const auto failed = fx.run("rubric-validate --rubric " + rubric_path + " --decisions " +
                             incomplete_path + " --out " + (fx.dir / "x.json").string());
  CHECK(failed.exit_code == 2);
  CHECK(nlohmann::json::parse(failed.err)["error"]["code"] == "MissingDecision");
}
