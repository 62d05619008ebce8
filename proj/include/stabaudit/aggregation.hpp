#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stabaudit/embedding.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/reasoning_metrics.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/verdict_metrics.hpp"

// Stratified aggregation: metrics are computed per judge-generator pair
// first (question level over profiles-as-items, averaged to rubric level),
// then macro-averaged unweighted across all pairs. Run groups aggregate
// independently; the pooled column is the union multiset of all group runs,
// never the mean of group rows.

namespace stabaudit {

// ---------------------------------------------------------------------------
// Strata
// ---------------------------------------------------------------------------

struct GroupKey {
  bool pooled = false;
  int k = 0;  // group size, or total pooled runs

  std::string label() const {
    return pooled ? "Pooled (" + std::to_string(k) + ")" : "k=" + std::to_string(k);
  }

  bool operator<(const GroupKey& other) const {
    if (pooled != other.pooled) return !pooled;  // pooled sorts last
    return k < other.k;
  }
  bool operator==(const GroupKey& other) const = default;
};

struct PairKey {
  std::string judge_id;
  std::string generator_id;

  std::string label() const { return judge_id + " x " + generator_id; }
  bool operator<(const PairKey& other) const {
    return std::tie(judge_id, generator_id) < std::tie(other.judge_id, other.generator_id);
  }
};

struct AggregationOptions {
  AgreementMode agreement_mode = AgreementMode::Modal;
  bool sigma_sample = true;
  // Alternate reading of question-level stats: per profile (one item per
  // matrix) then averaged, instead of pooling profiles as items.
  bool per_profile_stats = false;
  ReasoningOptions reasoning;
};

namespace agg_detail {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  int n = 0;
  for (double v : values) {
    if (!std::isnan(v)) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? kNaN : sum / n;
}

}  // namespace agg_detail

// ---------------------------------------------------------------------------
// Verdict aggregation
// ---------------------------------------------------------------------------

// One question's verdict stats within a stratum. Chance-corrected values are
// NaN when the (error-pruned) matrix cannot support them; coverage counts
// say why.
struct QuestionVerdictStats {
  std::string question_id;
  double p_a = agg_detail::kNaN;  // in the configured agreement mode
  double p_a_modal = agg_detail::kNaN;
  double p_a_pairwise = agg_detail::kNaN;
  double ac1 = agg_detail::kNaN;
  double kappa = agg_detail::kNaN;
  bool kappa_imputed = false;
  int n_items = 0;
  int dropped_items = 0;  // error-reduced below k=2
  bool ragged = false;
};

struct PairVerdictStats {
  PairKey pair;
  std::vector<QuestionVerdictStats> questions;  // rubric order
  double p_a = agg_detail::kNaN;
  double p_a_modal = agg_detail::kNaN;
  double p_a_pairwise = agg_detail::kNaN;
  double ac1 = agg_detail::kNaN;
  double kappa = agg_detail::kNaN;
  double sigma = agg_detail::kNaN;  // mean over profiles of per-profile run volatility
  int error_runs = 0;               // runs excluded from adherence scores
};

// Global (macro) rows for one (scenario, test_set, group) stratum.
struct VerdictCell {
  GroupKey group;
  std::vector<PairVerdictStats> pairs;  // sorted by pair key
  std::vector<QuestionVerdictStats> global_questions;
  double p_a = agg_detail::kNaN;
  double p_a_modal = agg_detail::kNaN;
  double p_a_pairwise = agg_detail::kNaN;
  double ac1 = agg_detail::kNaN;
  double kappa = agg_detail::kNaN;
  double sigma_mean = agg_detail::kNaN;
  double sigma_min = agg_detail::kNaN;
  double sigma_max = agg_detail::kNaN;
  int n_pairs = 0;
  int error_runs = 0;
};

struct VerdictTable {
  std::string scenario_id;
  TestSet test_set = TestSet::Objective;
  std::vector<std::string> question_ids;  // rubric order
  std::vector<VerdictCell> cells;         // per group, pooled last
};

namespace agg_detail {

struct RecordIndex {
  // (scenario, test_set) -> pair -> question -> profile -> records
  using ProfileRuns = std::map<std::string, std::vector<const JudgmentRecord*>>;
  using QuestionMap = std::map<std::string, ProfileRuns>;
  std::map<PairKey, QuestionMap> pairs;
  std::set<int> groups;
};

inline QuestionVerdictStats question_stats_from_matrix(const RatingMatrix& matrix,
                                                       const std::string& question_id,
                                                       AgreementMode mode) {
  QuestionVerdictStats stats;
  stats.question_id = question_id;
  const auto pruned_modal = prune_items_below(matrix, 1);
  if (!pruned_modal.matrix.items.empty()) {
    stats.p_a_modal = percentage_agreement(pruned_modal.matrix, AgreementMode::Modal);
  }
  const auto pruned = prune_items_below(matrix, 2);
  stats.n_items = int(pruned.matrix.items.size());
  stats.dropped_items = pruned.dropped_items;
  if (!pruned.matrix.items.empty()) {
    stats.p_a_pairwise = percentage_agreement(pruned.matrix, AgreementMode::Pairwise);
    if (pruned.matrix.uniform_k()) {
      stats.ac1 = gwet_ac1(pruned.matrix);
      const auto kr = fleiss_kappa(pruned.matrix);
      stats.kappa = kr.kappa;
      stats.kappa_imputed = kr.imputed;
    } else {
      stats.ragged = true;
    }
  }
  stats.p_a = mode == AgreementMode::Modal ? stats.p_a_modal : stats.p_a_pairwise;
  return stats;
}

// Alternate protocol: stats per profile (single-item matrices), averaged.
inline QuestionVerdictStats question_stats_per_profile(const RatingMatrix& matrix,
                                                       const std::string& question_id,
                                                       AgreementMode mode) {
  QuestionVerdictStats stats;
  stats.question_id = question_id;
  std::vector<double> modal, pairwise, ac1s, kappas;
  bool any_imputed = false;
  for (const auto& item : matrix.items) {
    if (item.k() < 2) {
      ++stats.dropped_items;
      continue;
    }
    RatingMatrix single;
    single.items.push_back(item);
    ++stats.n_items;
    modal.push_back(percentage_agreement(single, AgreementMode::Modal));
    pairwise.push_back(percentage_agreement(single, AgreementMode::Pairwise));
    ac1s.push_back(gwet_ac1(single));
    const auto kr = fleiss_kappa(single);
    kappas.push_back(kr.kappa);
    any_imputed = any_imputed || kr.imputed;
  }
  stats.p_a_modal = mean_of(modal);
  stats.p_a_pairwise = mean_of(pairwise);
  stats.ac1 = mean_of(ac1s);
  stats.kappa = mean_of(kappas);
  stats.kappa_imputed = any_imputed;
  stats.p_a = mode == AgreementMode::Modal ? stats.p_a_modal : stats.p_a_pairwise;
  return stats;
}

}  // namespace agg_detail

// Verdict metrics for every (scenario, test_set, group) stratum found in the
// records, against the supplied rubrics.
inline std::vector<VerdictTable> aggregate_verdict(const std::vector<JudgmentRecord>& records,
                                                   const std::vector<Rubric>& rubrics,
                                                   const AggregationOptions& options = {}) {
  if (records.empty()) {
    raise(ErrorCode::MissingStratum, "no records to aggregate");
  }

  std::vector<VerdictTable> tables;
  for (const auto& rubric : rubrics) {
    agg_detail::RecordIndex index;
    for (const auto& r : records) {
      if (r.scenario_id != rubric.scenario_id || r.test_set != rubric.test_set) continue;
      index.pairs[{r.judge_id, r.generator_id}][r.question_id][r.profile_id].push_back(&r);
      index.groups.insert(r.group_k);
    }
    if (index.pairs.empty()) continue;

    VerdictTable table;
    table.scenario_id = rubric.scenario_id;
    table.test_set = rubric.test_set;
    for (const auto& q : rubric.questions) table.question_ids.push_back(q.id);

    std::vector<GroupKey> groups;
    for (int k : index.groups) groups.push_back({false, k});
    int pooled_total = 0;
    for (int k : index.groups) pooled_total += k;
    groups.push_back({true, pooled_total});

    for (const auto& group : groups) {
      VerdictCell cell;
      cell.group = group;

      for (const auto& [pair_key, question_map] : index.pairs) {
        PairVerdictStats pair_stats;
        pair_stats.pair = pair_key;

        // Question-level stats over profiles as items.
        for (const auto& q : rubric.questions) {
          RatingMatrix matrix;
          const auto qm = question_map.find(q.id);
          if (qm != question_map.end()) {
            for (const auto& [profile_id, runs] : qm->second) {
              ItemCounts item{profile_id, 0, 0};
              for (const JudgmentRecord* r : runs) {
                if (!group.pooled && r->group_k != group.k) continue;
                if (r->answer == Answer::Yes) ++item.yes;
                else if (r->answer == Answer::No) ++item.no;
              }
              matrix.items.push_back(item);
            }
          }
          pair_stats.questions.push_back(
              options.per_profile_stats
                  ? agg_detail::question_stats_per_profile(matrix, q.id, options.agreement_mode)
                  : agg_detail::question_stats_from_matrix(matrix, q.id, options.agreement_mode));
        }

        // Rubric level: unweighted means over questions.
        std::vector<double> pa, pam, pap, ac1s, kappas;
        for (const auto& qs : pair_stats.questions) {
          pa.push_back(qs.p_a);
          pam.push_back(qs.p_a_modal);
          pap.push_back(qs.p_a_pairwise);
          ac1s.push_back(qs.ac1);
          kappas.push_back(qs.kappa);
        }
        pair_stats.p_a = agg_detail::mean_of(pa);
        pair_stats.p_a_modal = agg_detail::mean_of(pam);
        pair_stats.p_a_pairwise = agg_detail::mean_of(pap);
        pair_stats.ac1 = agg_detail::mean_of(ac1s);
        pair_stats.kappa = agg_detail::mean_of(kappas);

        // Sigma: adherence-score volatility across runs, per profile, then
        // averaged over profiles. A run with any Error answer is excluded.
        std::map<std::string, std::map<std::pair<int, int>, std::pair<int, int>>> run_counts;
        std::map<std::string, std::set<std::pair<int, int>>> poisoned;
        for (const auto& q : rubric.questions) {
          const auto qm = question_map.find(q.id);
          if (qm == question_map.end()) continue;
          for (const auto& [profile_id, runs] : qm->second) {
            for (const JudgmentRecord* r : runs) {
              if (!group.pooled && r->group_k != group.k) continue;
              const std::pair<int, int> run_id{r->group_k, r->run_index};
              if (r->answer == Answer::Error) {
                poisoned[profile_id].insert(run_id);
              } else {
                auto& counts = run_counts[profile_id][run_id];
                ++counts.second;
                if (r->answer == Answer::Yes) ++counts.first;
              }
            }
          }
        }
        for (const auto& [profile_id, runs] : poisoned) {
          pair_stats.error_runs += int(runs.size());
        }
        std::vector<double> profile_sigmas;
        for (auto& [profile_id, runs] : run_counts) {
          std::vector<double> scores;
          for (const auto& [run_id, counts] : runs) {
            if (poisoned.count(profile_id) && poisoned[profile_id].count(run_id)) continue;
            if (counts.second == 0) continue;
            scores.push_back(100.0 * double(counts.first) / double(counts.second));
          }
          if (scores.size() >= 2) {
            profile_sigmas.push_back(score_volatility(scores, options.sigma_sample));
          }
        }
        pair_stats.sigma = agg_detail::mean_of(profile_sigmas);
        cell.pairs.push_back(std::move(pair_stats));
      }

      // Global macro-averaging across pairs.
      cell.n_pairs = int(cell.pairs.size());
      std::vector<double> pa, pam, pap, ac1s, kappas, sigmas;
      for (const auto& pair_stats : cell.pairs) {
        pa.push_back(pair_stats.p_a);
        pam.push_back(pair_stats.p_a_modal);
        pap.push_back(pair_stats.p_a_pairwise);
        ac1s.push_back(pair_stats.ac1);
        kappas.push_back(pair_stats.kappa);
        sigmas.push_back(pair_stats.sigma);
        cell.error_runs += pair_stats.error_runs;
      }
      cell.p_a = agg_detail::mean_of(pa);
      cell.p_a_modal = agg_detail::mean_of(pam);
      cell.p_a_pairwise = agg_detail::mean_of(pap);
      cell.ac1 = agg_detail::mean_of(ac1s);
      cell.kappa = agg_detail::mean_of(kappas);
      cell.sigma_mean = agg_detail::mean_of(sigmas);
      for (double s : sigmas) {
        if (std::isnan(s)) continue;
        if (std::isnan(cell.sigma_min) || s < cell.sigma_min) cell.sigma_min = s;
        if (std::isnan(cell.sigma_max) || s > cell.sigma_max) cell.sigma_max = s;
      }

      // Per-question global rows.
      for (size_t qi = 0; qi < rubric.questions.size(); ++qi) {
        QuestionVerdictStats global;
        global.question_id = rubric.questions[qi].id;
        std::vector<double> qpa, qpam, qpap, qac1, qkappa;
        for (const auto& pair_stats : cell.pairs) {
          const auto& qs = pair_stats.questions[qi];
          qpa.push_back(qs.p_a);
          qpam.push_back(qs.p_a_modal);
          qpap.push_back(qs.p_a_pairwise);
          qac1.push_back(qs.ac1);
          qkappa.push_back(qs.kappa);
          global.kappa_imputed = global.kappa_imputed || qs.kappa_imputed;
          global.n_items += qs.n_items;
          global.dropped_items += qs.dropped_items;
          global.ragged = global.ragged || qs.ragged;
        }
        global.p_a = agg_detail::mean_of(qpa);
        global.p_a_modal = agg_detail::mean_of(qpam);
        global.p_a_pairwise = agg_detail::mean_of(qpap);
        global.ac1 = agg_detail::mean_of(qac1);
        global.kappa = agg_detail::mean_of(qkappa);
        cell.global_questions.push_back(std::move(global));
      }

      table.cells.push_back(std::move(cell));
    }
    tables.push_back(std::move(table));
  }

  if (tables.empty()) {
    raise(ErrorCode::MissingStratum, "records match none of the supplied rubrics");
  }
  return tables;
}

// ---------------------------------------------------------------------------
// Reasoning aggregation
// ---------------------------------------------------------------------------

struct ReasoningQuestionRow {
  std::string question_id;
  Strategy strategy = Strategy::Assertion;
  std::map<GroupKey, double> values;  // macro-averaged R_stab per group
  double pooled = agg_detail::kNaN;
};

struct ReasoningTable {
  std::string scenario_id;
  TestSet test_set = TestSet::Objective;
  std::vector<GroupKey> groups;           // pooled last
  std::vector<ReasoningQuestionRow> rows;  // sorted by pooled value, ascending
  std::map<GroupKey, double> rubric_row;   // mean over questions per group
  int n_pairs = 0;
  int scopes_clustered = 0;
};

// R_stab per localized scope (profile x pair x question x group), averaged
// question -> rubric -> pairs exactly like the verdict protocol.
inline std::vector<ReasoningTable> aggregate_reasoning(const std::vector<JudgmentRecord>& records,
                                                       const std::vector<Rubric>& rubrics,
                                                       EmbeddingProvider& provider,
                                                       const AggregationOptions& options = {}) {
  if (records.empty()) {
    raise(ErrorCode::MissingStratum, "no records to aggregate");
  }

  std::vector<ReasoningTable> tables;
  for (const auto& rubric : rubrics) {
    agg_detail::RecordIndex index;
    for (const auto& r : records) {
      if (r.scenario_id != rubric.scenario_id || r.test_set != rubric.test_set) continue;
      index.pairs[{r.judge_id, r.generator_id}][r.question_id][r.profile_id].push_back(&r);
      index.groups.insert(r.group_k);
    }
    if (index.pairs.empty()) continue;

    ReasoningTable table;
    table.scenario_id = rubric.scenario_id;
    table.test_set = rubric.test_set;
    for (int k : index.groups) table.groups.push_back({false, k});
    int pooled_total = 0;
    for (int k : index.groups) pooled_total += k;
    table.groups.push_back({true, pooled_total});
    table.n_pairs = int(index.pairs.size());

    std::map<std::string, ReasoningQuestionRow> rows;
    for (const auto& q : rubric.questions) {
      rows[q.id].question_id = q.id;
      rows[q.id].strategy = q.strategy;
    }

    for (const auto& group : table.groups) {
      std::map<std::string, std::vector<double>> pair_level;  // question -> per-pair values
      std::vector<double> pair_rubric_values;
      for (const auto& [pair_key, question_map] : index.pairs) {
        std::vector<double> question_values;
        for (const auto& q : rubric.questions) {
          const auto qm = question_map.find(q.id);
          if (qm == question_map.end()) continue;
          std::vector<double> scope_values;
          for (const auto& [profile_id, runs] : qm->second) {
            std::vector<JudgmentRecord> scope;
            for (const JudgmentRecord* r : runs) {
              if (!group.pooled && r->group_k != group.k) continue;
              scope.push_back(*r);
            }
            bool all_errors = true;
            for (const auto& r : scope) {
              if (r.answer != Answer::Error) {
                all_errors = false;
                break;
              }
            }
            if (scope.empty() || all_errors) continue;
            scope_values.push_back(
                reasoning_stability(scope, q.strategy, provider, options.reasoning).r_stab);
            ++table.scopes_clustered;
          }
          if (!scope_values.empty()) {
            const double question_value = agg_detail::mean_of(scope_values);
            pair_level[q.id].push_back(question_value);
            question_values.push_back(question_value);
          }
        }
        if (!question_values.empty()) {
          pair_rubric_values.push_back(agg_detail::mean_of(question_values));
        }
      }
      for (auto& [question_id, values] : pair_level) {
        rows[question_id].values[group] = agg_detail::mean_of(values);
      }
      table.rubric_row[group] = agg_detail::mean_of(pair_rubric_values);
    }

    for (const auto& q : rubric.questions) {
      auto& row = rows[q.id];
      const GroupKey pooled_key = table.groups.back();
      if (row.values.count(pooled_key)) row.pooled = row.values[pooled_key];
      table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const ReasoningQuestionRow& a, const ReasoningQuestionRow& b) {
                const bool a_nan = std::isnan(a.pooled), b_nan = std::isnan(b.pooled);
                if (a_nan != b_nan) return b_nan;  // NaN rows sink to the bottom
                if (!a_nan && a.pooled != b.pooled) return a.pooled < b.pooled;
                return a.question_id < b.question_id;
              });

    tables.push_back(std::move(table));
  }

  if (tables.empty()) {
    raise(ErrorCode::MissingStratum, "records match none of the supplied rubrics");
  }
  return tables;
}

}  // namespace stabaudit
