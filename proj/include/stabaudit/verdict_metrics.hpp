#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stabaudit/errors.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/text.hpp"

// Verdict-stability statistics over repeated binary judge runs: percentage
// agreement (modal and pairwise), Fleiss' kappa with the unanimity
// imputation rule, Gwet's AC1, adherence scores, score volatility, and
// Landis-Koch interpretation bands.

namespace stabaudit {

// ---------------------------------------------------------------------------
// Rating matrix
// ---------------------------------------------------------------------------

// Items are input profiles; raters are repeated runs. Error runs are
// excluded before construction, so per-item k may differ.
struct ItemCounts {
  std::string item_id;
  int yes = 0;
  int no = 0;

  int k() const { return yes + no; }
};

struct RatingMatrix {
  std::vector<ItemCounts> items;

  bool uniform_k() const {
    for (const auto& it : items) {
      if (it.k() != items.front().k()) return false;
    }
    return true;
  }

  // Exact unanimity test: every item has a single answer category.
  bool all_unanimous() const {
    for (const auto& it : items) {
      if (it.yes != 0 && it.no != 0) return false;
    }
    return true;
  }

  // CSV rows "item_id,yes,no"; an optional header line is skipped.
  static RatingMatrix from_csv(std::string_view csv) {
    RatingMatrix m;
    std::istringstream in{std::string(csv)};
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      const std::string trimmed = text::trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      std::istringstream row(trimmed);
      std::string id, yes_s, no_s;
      if (!std::getline(row, id, ',') || !std::getline(row, yes_s, ',') ||
          !std::getline(row, no_s, ',')) {
        raise(ErrorCode::MalformedJson, "bad rating row: '" + trimmed + "'");
      }
      try {
        m.items.push_back({text::trim(id), std::stoi(text::trim(yes_s)), std::stoi(text::trim(no_s))});
      } catch (const std::exception&) {
        if (first) {  // header row
          first = false;
          continue;
        }
        raise(ErrorCode::MalformedJson, "non-numeric counts in rating row: '" + trimmed + "'");
      }
      first = false;
    }
    return m;
  }
};

// Groups records (already filtered to one question scope) by profile id and
// counts Yes/No; Error answers reduce that item's effective k.
inline RatingMatrix matrix_from_records(const std::vector<JudgmentRecord>& records) {
  RatingMatrix m;
  for (const auto& r : records) {
    ItemCounts* item = nullptr;
    for (auto& it : m.items) {
      if (it.item_id == r.profile_id) {
        item = &it;
        break;
      }
    }
    if (!item) {
      m.items.push_back({r.profile_id, 0, 0});
      item = &m.items.back();
    }
    if (r.answer == Answer::Yes) ++item->yes;
    else if (r.answer == Answer::No) ++item->no;
    // Error runs are excluded from the denominators.
  }
  return m;
}

// Items whose error-reduced k falls below min_k are dropped from
// chance-corrected statistics; the caller surfaces the count in coverage.
struct PrunedMatrix {
  RatingMatrix matrix;
  int dropped_items = 0;
};

inline PrunedMatrix prune_items_below(const RatingMatrix& m, int min_k) {
  PrunedMatrix out;
  for (const auto& it : m.items) {
    if (it.k() >= min_k) out.matrix.items.push_back(it);
    else ++out.dropped_items;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agreement statistics
// ---------------------------------------------------------------------------

enum class AgreementMode { Modal, Pairwise };

inline AgreementMode agreement_mode_from_string(std::string_view s) {
  if (s == "Modal" || s == "modal") return AgreementMode::Modal;
  if (s == "Pairwise" || s == "pairwise") return AgreementMode::Pairwise;
  raise(ErrorCode::UnknownMode, "unknown agreement mode '" + std::string(s) + "'");
}

namespace detail {

// Mean over items of the within-item agreeing-pair fraction, computed with
// integer numerators so unanimity is detected exactly.
inline double pairwise_mean(const RatingMatrix& m) {
  double sum = 0.0;
  for (const auto& it : m.items) {
    const int64_t k = it.k();
    const int64_t agree = int64_t(it.yes) * (it.yes - 1) + int64_t(it.no) * (it.no - 1);
    sum += double(agree) / double(k * (k - 1));
  }
  return sum / double(m.items.size());
}

inline void require_min_k(const RatingMatrix& m, int min_k, std::string_view what) {
  if (m.items.empty()) {
    raise(ErrorCode::InsufficientRaters, std::string(what) + " needs at least one item");
  }
  for (const auto& it : m.items) {
    if (it.k() < min_k) {
      raise(ErrorCode::InsufficientRaters,
            "item '" + it.item_id + "' has k=" + std::to_string(it.k()) + " < " +
                std::to_string(min_k) + " for " + std::string(what));
    }
  }
}

inline void require_uniform(const RatingMatrix& m, std::string_view what) {
  if (!m.uniform_k()) {
    raise(ErrorCode::RaggedMatrix, std::string(what) + " needs a uniform rater count per item");
  }
}

}  // namespace detail

// Modal: fraction of runs matching the per-item majority, averaged over
// items. Pairwise: fraction of agreeing rater pairs per item, averaged.
inline double percentage_agreement(const RatingMatrix& m, AgreementMode mode) {
  if (mode == AgreementMode::Modal) {
    detail::require_min_k(m, 1, "modal agreement");
    double sum = 0.0;
    for (const auto& it : m.items) {
      sum += double(std::max(it.yes, it.no)) / double(it.k());
    }
    return sum / double(m.items.size());
  }
  detail::require_min_k(m, 2, "pairwise agreement");
  return detail::pairwise_mean(m);
}

struct KappaResult {
  double kappa = 0.0;
  bool imputed = false;
};

// Multi-rater Fleiss' kappa over the two answer categories. A fully
// unanimous matrix makes the statistic undefined or degenerate, so the
// consensus is reported directly as kappa = 1.0 with the imputed flag set.
inline KappaResult fleiss_kappa(const RatingMatrix& m) {
  detail::require_min_k(m, 2, "Fleiss' kappa");
  detail::require_uniform(m, "Fleiss' kappa");
  if (m.all_unanimous()) return {1.0, true};

  const double p_bar = detail::pairwise_mean(m);
  int64_t total_yes = 0, total = 0;
  for (const auto& it : m.items) {
    total_yes += it.yes;
    total += it.k();
  }
  const double p_yes = double(total_yes) / double(total);
  const double p_no = 1.0 - p_yes;
  const double p_e = p_yes * p_yes + p_no * p_no;
  return {(p_bar - p_e) / (1.0 - p_e), false};
}

// Gwet's AC1: same observed agreement, but chance agreement is modeled from
// rater uncertainty, 2*pi*(1-pi) for two categories with pi the mean
// per-item Yes proportion. Robust where kappa collapses under skewed
// prevalence.
inline double gwet_ac1(const RatingMatrix& m) {
  detail::require_min_k(m, 2, "Gwet's AC1");
  detail::require_uniform(m, "Gwet's AC1");
  if (m.all_unanimous()) return 1.0;

  const double p_bar = detail::pairwise_mean(m);
  double pi = 0.0;
  for (const auto& it : m.items) {
    pi += double(it.yes) / double(it.k());
  }
  pi /= double(m.items.size());
  const double p_e = 2.0 * pi * (1.0 - pi);
  return (p_bar - p_e) / (1.0 - p_e);
}

// Per-question verdict reliability bundle.
struct StabilityStats {
  double p_a = 0.0;  // percentage agreement in [0,1], mode chosen by caller
  double ac1 = 0.0;
  double kappa = 0.0;
  bool kappa_imputed = false;
  int n_items = 0;
  int n_raters = 0;
};

inline StabilityStats stability_stats(const RatingMatrix& m,
                                      AgreementMode mode = AgreementMode::Modal) {
  StabilityStats s;
  s.p_a = percentage_agreement(m, mode);
  s.ac1 = gwet_ac1(m);
  const auto kr = fleiss_kappa(m);
  s.kappa = kr.kappa;
  s.kappa_imputed = kr.imputed;
  s.n_items = int(m.items.size());
  s.n_raters = m.items.empty() ? 0 : m.items.front().k();
  return s;
}

// ---------------------------------------------------------------------------
// Adherence score and volatility
// ---------------------------------------------------------------------------

// Normalized compliant-feature count for one run, on the 0-100 percent
// scale.
struct AdherenceScore {
  double value = 0.0;
  int yes_count = 0;
  int total_questions = 0;
};

inline AdherenceScore adherence_score(const std::vector<Answer>& answers) {
  if (answers.empty()) raise(ErrorCode::EmptyRubric, "adherence score over zero questions");
  AdherenceScore s;
  s.total_questions = int(answers.size());
  for (const auto a : answers) {
    if (a == Answer::Error) {
      raise(ErrorCode::ErrorAnswerPresent, "error answers cannot enter an adherence score");
    }
    if (a == Answer::Yes) ++s.yes_count;
  }
  s.value = 100.0 * double(s.yes_count) / double(s.total_questions);
  return s;
}

// Sample standard deviation (n-1) by default; population (n) behind the
// flag.
inline double score_volatility(const std::vector<double>& scores, bool sample = true) {
  if (scores.size() < 2) {
    raise(ErrorCode::InsufficientRuns, "volatility needs at least two run scores");
  }
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= double(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double denom = sample ? double(scores.size() - 1) : double(scores.size());
  return std::sqrt(ss / denom);
}

inline double score_volatility(const std::vector<AdherenceScore>& scores, bool sample = true) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.value);
  return score_volatility(values, sample);
}

// ---------------------------------------------------------------------------
// Interpretation bands
// ---------------------------------------------------------------------------

// Landis-Koch benchmarks, upper-inclusive so 0.81 reads "Almost Perfect".
inline std::string_view interpret_ac1(double value) {
  if (value <= 0.0) return "Poor";
  if (value <= 0.20) return "Slight";
  if (value <= 0.40) return "Fair";
  if (value <= 0.60) return "Moderate";
  if (value <= 0.80) return "Substantial";
  return "Almost Perfect";
}

}  // namespace stabaudit
