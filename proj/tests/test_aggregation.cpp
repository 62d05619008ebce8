#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "oracle_helpers.hpp"
#include "stabaudit/aggregation.hpp"
#include "stabaudit/report.hpp"
#include "stabaudit/simulator.hpp"
#include "stabaudit/store.hpp"

using namespace stabaudit;
namespace fs = std::filesystem;

namespace {

Rubric two_question_rubric() {
  Rubric rubric;
  rubric.scenario_id = "T";
  rubric.test_set = TestSet::Objective;
  rubric.categories = {QuestionCategory::FormatAdherence};
  rubric.questions = {
      {"T-obj-Q1", "Is condition one met?", QuestionCategory::FormatAdherence, TestSet::Objective,
       Strategy::Assertion, "T", ""},
      {"T-obj-Q2", "Is condition two met?", QuestionCategory::FormatAdherence, TestSet::Objective,
       Strategy::Assertion, "T", ""},
  };
  rubric.validated = true;
  return rubric;
}

JudgmentRecord rec(const std::string& judge, const std::string& generator,
                   const std::string& profile, const std::string& question, int group_k, int run,
                   Answer answer, const std::string& justification = "evidence") {
  JudgmentRecord r;
  r.scenario_id = "T";
  r.profile_id = profile;
  r.generator_id = generator;
  r.judge_id = judge;
  r.test_set = TestSet::Objective;
  r.group_k = group_k;
  r.run_index = run;
  r.question_id = question;
  r.answer = answer;
  r.justification = justification;
  r.created_at = "1970-01-01T00:00:00Z";
  return r;
}

// The constructed 2-pair, 2-question, 3-profile, k=3 dataset. The answer
// pattern mixes unanimity and dissent across strata.
std::vector<JudgmentRecord> constructed_dataset() {
  std::vector<JudgmentRecord> records;
  const std::vector<std::string> judges = {"j1", "j2"};
  for (size_t pi = 0; pi < judges.size(); ++pi) {
    for (int qi = 1; qi <= 2; ++qi) {
      for (int profile = 0; profile < 3; ++profile) {
        for (int run = 0; run < 3; ++run) {
          const bool no = (int(pi) + qi + profile + run) % 4 == 0;
          records.push_back(rec(judges[pi], "g1", "p" + std::to_string(profile),
                                "T-obj-Q" + std::to_string(qi), 3, run,
                                no ? Answer::No : Answer::Yes));
        }
      }
    }
  }
  return records;
}

// Independent straightforward re-aggregation: nested loops, oracle
// statistics, no shared code with the library aggregation path.
struct ReferenceGlobal {
  double p_a_modal = 0, ac1 = 0, kappa = 0, sigma = 0, sigma_min = 0, sigma_max = 0;
};

ReferenceGlobal reference_aggregate(const std::vector<JudgmentRecord>& records) {
  const std::vector<std::string> judges = {"j1", "j2"};
  const std::vector<std::string> questions = {"T-obj-Q1", "T-obj-Q2"};
  const std::vector<std::string> profiles = {"p0", "p1", "p2"};

  std::vector<double> pair_pa, pair_ac1, pair_kappa, pair_sigma;
  for (const auto& judge : judges) {
    std::vector<double> q_pa, q_ac1, q_kappa;
    for (const auto& question : questions) {
      RatingMatrix matrix;
      for (const auto& profile : profiles) {
        ItemCounts item{profile, 0, 0};
        for (const auto& r : records) {
          if (r.judge_id != judge || r.question_id != question || r.profile_id != profile) {
            continue;
          }
          if (r.answer == Answer::Yes) ++item.yes;
          else ++item.no;
        }
        matrix.items.push_back(item);
      }
      q_pa.push_back(oracle::modal_agreement(matrix));
      if (matrix.all_unanimous()) {
        q_ac1.push_back(1.0);
        q_kappa.push_back(1.0);  // imputation rule
      } else {
        q_ac1.push_back(oracle::gwet_ac1(matrix));
        q_kappa.push_back(oracle::fleiss_kappa(matrix));
      }
    }
    pair_pa.push_back((q_pa[0] + q_pa[1]) / 2.0);
    pair_ac1.push_back((q_ac1[0] + q_ac1[1]) / 2.0);
    pair_kappa.push_back((q_kappa[0] + q_kappa[1]) / 2.0);

    std::vector<double> profile_sigmas;
    for (const auto& profile : profiles) {
      std::vector<double> run_scores;
      for (int run = 0; run < 3; ++run) {
        int yes = 0, total = 0;
        for (const auto& r : records) {
          if (r.judge_id != judge || r.profile_id != profile || r.run_index != run) continue;
          ++total;
          if (r.answer == Answer::Yes) ++yes;
        }
        run_scores.push_back(100.0 * yes / total);
      }
      const double mean = (run_scores[0] + run_scores[1] + run_scores[2]) / 3.0;
      double ss = 0;
      for (double s : run_scores) ss += (s - mean) * (s - mean);
      profile_sigmas.push_back(std::sqrt(ss / 2.0));  // sample, n-1
    }
    double sigma_sum = 0;
    for (double s : profile_sigmas) sigma_sum += s;
    pair_sigma.push_back(sigma_sum / double(profile_sigmas.size()));
  }

  ReferenceGlobal g;
  g.p_a_modal = (pair_pa[0] + pair_pa[1]) / 2.0;
  g.ac1 = (pair_ac1[0] + pair_ac1[1]) / 2.0;
  g.kappa = (pair_kappa[0] + pair_kappa[1]) / 2.0;
  g.sigma = (pair_sigma[0] + pair_sigma[1]) / 2.0;
  g.sigma_min = std::min(pair_sigma[0], pair_sigma[1]);
  g.sigma_max = std::max(pair_sigma[0], pair_sigma[1]);
  return g;
}

const VerdictCell& cell_for(const VerdictTable& table, bool pooled, int k = 0) {
  for (const auto& cell : table.cells) {
    if (cell.group.pooled == pooled && (pooled || cell.group.k == k)) return cell;
  }
  FAIL("group cell not found");
  return table.cells.front();
}

}  // namespace

TEST_CASE("aggregate_verdict: all unanimous collapses to exact ones") {
  std::vector<JudgmentRecord> records;
  for (int run = 0; run < 5; ++run) {
    records.push_back(rec("j1", "g1", "p0", "T-obj-Q1", 5, run, Answer::Yes));
    records.push_back(rec("j1", "g1", "p0", "T-obj-Q2", 5, run, Answer::Yes));
  }
  const auto tables = aggregate_verdict(records, {two_question_rubric()});
  REQUIRE(tables.size() == 1);
  const auto& pooled = cell_for(tables[0], true);
  CHECK(pooled.p_a_modal == 1.0);
  CHECK(pooled.p_a_pairwise == 1.0);
  CHECK(pooled.ac1 == 1.0);
  CHECK(pooled.kappa == 1.0);
  CHECK(pooled.sigma_mean == 0.0);
  for (const auto& q : pooled.global_questions) CHECK(q.kappa_imputed);
}

TEST_CASE("aggregate_verdict: global is the unweighted mean of pair rows") {
  // Pair 1: one profile, 49Y/1N on each question (modal 0.98).
  // Pair 2: unanimous (1.00). Global must be 0.99.
  std::vector<JudgmentRecord> records;
  for (int run = 0; run < 50; ++run) {
    for (const std::string q : {"T-obj-Q1", "T-obj-Q2"}) {
      records.push_back(rec("j1", "g1", "p0", q, 50, run, run == 0 ? Answer::No : Answer::Yes));
      records.push_back(rec("j2", "g1", "p0", q, 50, run, Answer::Yes));
    }
  }
  const auto tables = aggregate_verdict(records, {two_question_rubric()});
  const auto& pooled = cell_for(tables[0], true);
  CHECK(pooled.n_pairs == 2);
  CHECK_THAT(pooled.p_a_modal, Catch::Matchers::WithinAbs(0.99, 1e-12));
}

TEST_CASE("aggregate_verdict matches the naive reference aggregator") {
  const auto records = constructed_dataset();
  const auto reference = reference_aggregate(records);

  const auto tables = aggregate_verdict(records, {two_question_rubric()});
  REQUIRE(tables.size() == 1);
  const auto& pooled = cell_for(tables[0], true);

  CHECK(pooled.n_pairs == 2);
  CHECK_THAT(pooled.p_a_modal, Catch::Matchers::WithinAbs(reference.p_a_modal, 1e-9));
  CHECK_THAT(pooled.ac1, Catch::Matchers::WithinAbs(reference.ac1, 1e-9));
  CHECK_THAT(pooled.kappa, Catch::Matchers::WithinAbs(reference.kappa, 1e-9));
  CHECK_THAT(pooled.sigma_mean, Catch::Matchers::WithinAbs(reference.sigma, 1e-9));
  CHECK_THAT(pooled.sigma_min, Catch::Matchers::WithinAbs(reference.sigma_min, 1e-9));
  CHECK_THAT(pooled.sigma_max, Catch::Matchers::WithinAbs(reference.sigma_max, 1e-9));
}

TEST_CASE("pooled row aggregates the union multiset, not the mean of group rows") {
  Rubric rubric = two_question_rubric();
  rubric.questions.pop_back();  // one question suffices

  std::vector<JudgmentRecord> records;
  // Group k=2: one Yes, one No. Group k=4: all Yes.
  records.push_back(rec("j1", "g1", "p0", "T-obj-Q1", 2, 0, Answer::Yes));
  records.push_back(rec("j1", "g1", "p0", "T-obj-Q1", 2, 1, Answer::No));
  for (int run = 0; run < 4; ++run) {
    records.push_back(rec("j1", "g1", "p0", "T-obj-Q1", 4, run, Answer::Yes));
  }

  const auto tables = aggregate_verdict(records, {rubric});
  const auto& k2 = cell_for(tables[0], false, 2);
  const auto& k4 = cell_for(tables[0], false, 4);
  const auto& pooled = cell_for(tables[0], true);

  CHECK_THAT(k2.p_a_modal, Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(k4.p_a_modal, Catch::Matchers::WithinAbs(1.0, 1e-12));
  const double mean_of_groups = (k2.p_a_modal + k4.p_a_modal) / 2.0;
  CHECK_THAT(pooled.p_a_modal, Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-12));
  CHECK(std::abs(pooled.p_a_modal - mean_of_groups) > 0.05);
  CHECK(pooled.group.k == 6);
}

TEST_CASE("duplicated appends collapse by key and leave aggregation unchanged") {
  const fs::path dir = fs::temp_directory_path() / ("stabaudit_agg_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  {
    JsonlStore store(dir);
    const auto records = constructed_dataset();
    store.append(records);
    const auto once = aggregate_verdict(store.load_records(), {two_question_rubric()});
    store.append(records);  // byte-identical duplicates
    const auto twice = aggregate_verdict(store.load_records(), {two_question_rubric()});
    CHECK(cell_for(once[0], true).p_a_modal == cell_for(twice[0], true).p_a_modal);
    CHECK(cell_for(once[0], true).kappa == cell_for(twice[0], true).kappa);
    CHECK(cell_for(once[0], true).sigma_mean == cell_for(twice[0], true).sigma_mean);
  }
  fs::remove_all(dir);
}

TEST_CASE("aggregate_verdict: error answers reduce items and are counted") {
  Rubric rubric = two_question_rubric();
  rubric.questions.pop_back();
  std::vector<JudgmentRecord> records;
  for (int run = 0; run < 3; ++run) {
    records.push_back(
        rec("j1", "g1", "p0", "T-obj-Q1", 3, run, run == 2 ? Answer::Error : Answer::Yes));
    records.push_back(rec("j1", "g1", "p1", "T-obj-Q1", 3, run, Answer::Yes));
  }
  const auto tables = aggregate_verdict(records, {rubric});
  const auto& pooled = cell_for(tables[0], true);
  CHECK(pooled.error_runs == 1);
  CHECK(pooled.p_a_modal == 1.0);  // surviving runs are unanimous
}

TEST_CASE("aggregate_verdict: empty input raises MissingStratum") {
  CHECK_THROWS_MATCHES(aggregate_verdict({}, {two_question_rubric()}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::MissingStratum; }));
}

TEST_CASE("aggregate_reasoning: uniform scopes give 100 everywhere") {
  std::vector<JudgmentRecord> records;
  for (const std::string profile : {"p0", "p1"}) {
    for (int run = 0; run < 5; ++run) {
      records.push_back(rec("j1", "g1", profile, "T-obj-Q1", 5, run, Answer::Yes, "same trace"));
      records.push_back(rec("j1", "g1", profile, "T-obj-Q2", 5, run, Answer::Yes, "other trace"));
    }
  }
  OfflineHashEmbedder embedder;
  const auto tables = aggregate_reasoning(records, {two_question_rubric()}, embedder);
  REQUIRE(tables.size() == 1);
  for (const auto& row : tables[0].rows) {
    for (const auto& [group, value] : row.values) CHECK(value == 100.0);
  }
  for (const auto& [group, value] : tables[0].rubric_row) CHECK(value == 100.0);
}

TEST_CASE("aggregate_reasoning: two scopes average at the question level") {
  Rubric rubric = two_question_rubric();
  rubric.questions.pop_back();
  std::vector<JudgmentRecord> records;
  // Profile p0: 17 of 20 dominant (85); profile p1: 19 of 20 dominant (95).
  for (int run = 0; run < 20; ++run) {
    records.push_back(rec("j1", "g1", "p0", "T-obj-Q1", 20, run, Answer::Yes,
                          run < 17 ? "dominant evidence" : "variant evidence"));
    records.push_back(rec("j1", "g1", "p1", "T-obj-Q1", 20, run, Answer::Yes,
                          run < 19 ? "dominant evidence" : "variant evidence"));
  }
  OfflineHashEmbedder embedder;
  const auto tables = aggregate_reasoning(records, {rubric}, embedder);
  REQUIRE(tables[0].rows.size() == 1);
  CHECK_THAT(tables[0].rows[0].pooled, Catch::Matchers::WithinAbs(90.0, 1e-9));
}

TEST_CASE("aggregate_reasoning: rows sorted ascending by pooled stability") {
  Rubric rubric;
  rubric.scenario_id = "T";
  rubric.test_set = TestSet::Objective;
  rubric.categories = {QuestionCategory::FormatAdherence};
  for (int i = 1; i <= 3; ++i) {
    rubric.questions.push_back({"T-obj-Q" + std::to_string(i), "Is check " + std::to_string(i) +
                                " met?", QuestionCategory::FormatAdherence, TestSet::Objective,
                                Strategy::Assertion, "T", ""});
  }
  rubric.validated = true;

  std::vector<JudgmentRecord> records;
  const std::map<std::string, int> dominant = {{"T-obj-Q1", 18}, {"T-obj-Q2", 10},
                                               {"T-obj-Q3", 14}};
  for (const auto& [question, dom] : dominant) {
    for (int run = 0; run < 20; ++run) {
      records.push_back(rec("j1", "g1", "p0", question, 20, run, Answer::Yes,
                            run < dom ? "dominant evidence" : "variant " + std::to_string(run)));
    }
  }
  OfflineHashEmbedder embedder;
  const auto tables = aggregate_reasoning(records, {rubric}, embedder);
  REQUIRE(tables[0].rows.size() == 3);
  CHECK(tables[0].rows[0].question_id == "T-obj-Q2");
  CHECK(tables[0].rows[1].question_id == "T-obj-Q3");
  CHECK(tables[0].rows[2].question_id == "T-obj-Q1");
  CHECK(tables[0].rows[0].pooled <= tables[0].rows[1].pooled);
  CHECK(tables[0].rows[1].pooled <= tables[0].rows[2].pooled);
}

TEST_CASE("emit_report is byte-stable and covers all formats") {
  const fs::path dir = fs::temp_directory_path() / ("stabaudit_rep_" + std::to_string(::getpid()));
  fs::remove_all(dir);

  ReportBundle bundle;
  const auto records = constructed_dataset();
  bundle.verdict = aggregate_verdict(records, {two_question_rubric()});
  OfflineHashEmbedder embedder;
  bundle.reasoning = aggregate_reasoning(records, {two_question_rubric()}, embedder);
  bundle.total_records = long(records.size());

  const auto md_a = emit_report(bundle, ReportFormat::Markdown, dir / "a");
  const auto md_b = emit_report(bundle, ReportFormat::Markdown, dir / "b");
  REQUIRE(md_a.size() == 2);
  for (size_t i = 0; i < md_a.size(); ++i) {
    CHECK(read_file(md_a[i].string()) == read_file(md_b[i].string()));
  }
  const auto verdict_md = read_file(md_a[0].string());
  CHECK(verdict_md.find("| Scenario | Type | Group |") != std::string::npos);
  CHECK(verdict_md.find("Pooled (3)") != std::string::npos);
  CHECK(verdict_md.find("error runs recorded: 0") != std::string::npos);

  const auto json_paths = emit_report(bundle, ReportFormat::JsonDocument, dir / "j");
  REQUIRE(json_paths.size() == 1);
  const auto doc = nlohmann::json::parse(read_file(json_paths[0].string()));
  CHECK(doc.contains("verdict"));
  CHECK(doc.contains("reasoning"));
  CHECK(doc.contains("coverage"));
  CHECK(doc["verdict"][0]["groups"].size() == 2);  // k=3 and pooled

  const auto csv_paths = emit_report(bundle, ReportFormat::Csv, dir / "c");
  REQUIRE(csv_paths.size() == 2);
  CHECK(read_file(csv_paths[0].string()).rfind("scenario,test_set,group,level", 0) == 0);

  fs::remove_all(dir);
}
