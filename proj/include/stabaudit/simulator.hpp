#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/store.hpp"
#include "stabaudit/text.hpp"

// Deterministic synthetic judge. Generates verdict/justification streams
// with controlled instability so the metrics pipeline can be validated
// offline, including the two qualitative failure modes: near-perfect
// verdicts over drifting numeric evidence, and chance-corrected collapse
// under prevalence skew.

namespace stabaudit {

// ---------------------------------------------------------------------------
// Pseudo-random stream
// ---------------------------------------------------------------------------

// SplitMix64. Chosen for stable cross-platform output: the generated record
// streams are part of the acceptance surface, so the generator is pinned
// here rather than delegated to implementation-defined std::
// distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double next_double() {  // [0, 1)
    return double(next() >> 11) * (1.0 / 9007199254740992.0);
  }

  long next_in(long lo, long hi) {  // inclusive; modulo mapping, documented
    return lo + long(next() % uint64_t(hi - lo + 1));
  }

 private:
  uint64_t state_;
};

// Every (profile, group, run, question) cell owns an independent stream,
// keyed from the profile seed, so records are reproducible cell by cell and
// generation parallelizes safely.
inline uint64_t stream_key(uint64_t seed, std::string_view profile_id, int group_k, int run_index,
                           std::string_view question_id) {
  uint64_t h = text::fnv1a64(profile_id, 1469598103934665603ULL ^ seed);
  h = text::fnv1a64(question_id, h);
  h ^= (uint64_t(uint32_t(group_k)) << 32) | uint64_t(uint32_t(run_index));
  return h;
}

// ---------------------------------------------------------------------------
// Simulation profile and ground truth
// ---------------------------------------------------------------------------

struct SimProfile {
  double flip_prob = 0.0;            // chance a verdict flips Yes<->No per run
  int numeric_jitter = 0;            // max absolute perturbation of the cited count
  double strategy_oscillation_prob = 0.0;  // chance of a summary assertion instead of evidence
  uint64_t seed = 0;
};

// Ground verdict and evidence per question id.
struct QuestionTruth {
  Answer verdict = Answer::Yes;
  long numeric_value = 0;
  std::vector<std::string> quote_items;
  std::string assertion_text = "The requirement is met.";
};

using BaseTruth = std::map<std::string, QuestionTruth>;

inline constexpr std::string_view kOscillationTemplate =
    "All requirements for this check are satisfied.";

namespace sim_detail {

inline std::string justification_for(const RubricQuestion& question, const QuestionTruth& truth,
                                     const SimProfile& profile, SplitMix64& rng) {
  // Draw order is part of the stream contract: flip, oscillation, jitter.
  const bool oscillate = rng.next_double() < profile.strategy_oscillation_prob;
  if (oscillate) return std::string(kOscillationTemplate);
  switch (question.strategy) {
    case Strategy::Numeric: {
      long value = truth.numeric_value;
      if (profile.numeric_jitter > 0) {
        value += rng.next_in(-profile.numeric_jitter, profile.numeric_jitter);
      }
      return "The text contains " + std::to_string(value) + " words.";
    }
    case Strategy::Quote: {
      std::string joined;
      for (const auto& item : truth.quote_items) {
        if (!joined.empty()) joined += " and ";
        joined += "'" + item + "'";
      }
      if (joined.empty()) joined = "'the required phrase'";
      return "The output includes " + joined + " verbatim.";
    }
    case Strategy::Assertion:
      return truth.assertion_text;
  }
  return truth.assertion_text;
}

}  // namespace sim_detail

// One run group of synthetic judgments for one profile. Identical
// (profile, seed, rubric, base_truth) inputs produce byte-identical record
// streams.
inline std::vector<JudgmentRecord> synth_judgments(const SimProfile& profile,
                                                   const Rubric& rubric, int n_runs,
                                                   const BaseTruth& base_truth,
                                                   const std::string& profile_id = "sim-P0",
                                                   int group_k = 0,
                                                   const std::string& generator_id = "sim-gen",
                                                   const std::string& judge_id = "sim-judge") {
  if (group_k == 0) group_k = n_runs;
  std::vector<JudgmentRecord> records;
  records.reserve(size_t(n_runs) * rubric.questions.size());
  for (int run = 0; run < n_runs; ++run) {
    for (const auto& question : rubric.questions) {
      const auto truth_it = base_truth.find(question.id);
      const QuestionTruth truth =
          truth_it == base_truth.end() ? QuestionTruth{} : truth_it->second;

      SplitMix64 rng(stream_key(profile.seed, profile_id, group_k, run, question.id));
      const bool flip = rng.next_double() < profile.flip_prob;

      JudgmentRecord r;
      r.scenario_id = rubric.scenario_id;
      r.profile_id = profile_id;
      r.generator_id = generator_id;
      r.judge_id = judge_id;
      r.test_set = rubric.test_set;
      r.group_k = group_k;
      r.run_index = run;
      r.question_id = question.id;
      r.answer = flip ? (truth.verdict == Answer::Yes ? Answer::No : Answer::Yes) : truth.verdict;
      r.justification = sim_detail::justification_for(question, truth, profile, rng);
      r.created_at = "1970-01-01T00:00:00Z";  // fixed: streams must be byte-identical
      records.push_back(std::move(r));
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

enum class PresetName { StabilityTrap, KappaParadox, Perfect };

inline PresetName preset_from_string(std::string_view s) {
  if (s == "StabilityTrap") return PresetName::StabilityTrap;
  if (s == "KappaParadox") return PresetName::KappaParadox;
  if (s == "Perfect") return PresetName::Perfect;
  raise(ErrorCode::UnknownMode, "unknown preset '" + std::string(s) + "'");
}

struct PresetBundle {
  std::string name;
  SimProfile profile;
  Rubric rubric;
  BaseTruth base_truth;
  int n_profiles = 1;
  std::string generator_id = "sim-gen";
  std::string judge_id = "sim-judge";
};

namespace sim_detail {

inline Rubric mixed_strategy_rubric() {
  Rubric rubric;
  rubric.scenario_id = "SIM";
  rubric.test_set = TestSet::Objective;
  rubric.categories = {QuestionCategory::DataFieldUtilization, QuestionCategory::FormatAdherence};
  rubric.questions = {
      {"SIM-obj-Q1", "Does the output contain at least two exact string matches from the "
                     "project examples?",
       QuestionCategory::DataFieldUtilization, TestSet::Objective, Strategy::Quote, "SIM", ""},
      {"SIM-obj-Q2", "Is the combined word count less than or equal to 200 words?",
       QuestionCategory::FormatAdherence, TestSet::Objective, Strategy::Numeric, "SIM", ""},
      {"SIM-obj-Q3", "Is the entire output a valid JSON object?",
       QuestionCategory::FormatAdherence, TestSet::Objective, Strategy::Assertion, "SIM", ""},
  };
  rubric.validated = true;
  rubric.validation = ValidationRecord{"simulator", "1970-01-01T00:00:00Z", {}};
  return rubric;
}

inline BaseTruth mixed_strategy_truth() {
  BaseTruth truth;
  truth["SIM-obj-Q1"] = {Answer::Yes, 0, {"Atlas migration", "build pipeline rewrite"},
                         "The required examples appear."};
  truth["SIM-obj-Q2"] = {Answer::Yes, 185, {}, "The word count is within the limit."};
  truth["SIM-obj-Q3"] = {Answer::Yes, 0, {}, "The output parses as a single JSON object."};
  return truth;
}

}  // namespace sim_detail

// Documented parameter bundles reproducing the qualitative phenomena.
inline PresetBundle preset(PresetName name) {
  PresetBundle bundle;
  bundle.rubric = sim_detail::mixed_strategy_rubric();
  bundle.base_truth = sim_detail::mixed_strategy_truth();
  switch (name) {
    case PresetName::Perfect:
      bundle.name = "Perfect";
      bundle.profile = {0.0, 0, 0.0, 11};
      bundle.n_profiles = 4;
      break;
    case PresetName::StabilityTrap:
      // Constant verdicts over jittered numeric evidence: verdict metrics
      // report perfection while the numeric question's rationale scatters.
      bundle.name = "StabilityTrap";
      bundle.profile = {0.0, 5, 0.0, 23};
      bundle.n_profiles = 4;
      break;
    case PresetName::KappaParadox:
      // Rare flips on an all-Yes base: raw agreement and AC1 stay high
      // while prevalence skew drags Fleiss' kappa down.
      bundle.name = "KappaParadox";
      bundle.profile = {0.01, 0, 0.0, 47};
      bundle.n_profiles = 12;
      break;
  }
  return bundle;
}

// Runs a preset across its profiles and the given run groups, landing the
// records (and the rubric) in the same store format as real runs.
inline RunSummary run_simulation(const PresetBundle& bundle, const std::vector<int>& run_groups,
                                 JsonlStore& store) {
  RunSummary summary;
  store.save_rubric(bundle.rubric);
  for (int p = 0; p < bundle.n_profiles; ++p) {
    const std::string profile_id =
        "sim-P" + std::string(p < 10 ? "0" : "") + std::to_string(p);
    for (const int k : run_groups) {
      const auto records = synth_judgments(bundle.profile, bundle.rubric, k, bundle.base_truth,
                                           profile_id, k, bundle.generator_id, bundle.judge_id);
      store.append(records);
      summary.records_appended += long(records.size());
      summary.executed_cells += k;
    }
  }
  summary.planned_cells = summary.executed_cells;
  return summary;
}

}  // namespace stabaudit
