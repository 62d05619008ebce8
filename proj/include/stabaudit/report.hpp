#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stabaudit/aggregation.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/verdict_metrics.hpp"

// Report emission. Output is deterministic and byte-stable for identical
// inputs: fixed float formatting, sorted strata, no timestamps.

namespace stabaudit {

enum class ReportFormat { Markdown, JsonDocument, Csv };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "md" || s == "markdown" || s == "Markdown") return ReportFormat::Markdown;
  if (s == "json" || s == "JsonDocument") return ReportFormat::JsonDocument;
  if (s == "csv" || s == "Csv") return ReportFormat::Csv;
  raise(ErrorCode::UnknownMode, "unknown report format '" + std::string(s) + "'");
}

struct ReportBundle {
  std::vector<VerdictTable> verdict;
  std::vector<ReasoningTable> reasoning;
  long total_records = 0;
  long error_records = 0;
  int corrupt_lines = 0;
};

namespace report_detail {

inline std::string fixed(double value, int decimals) {
  if (std::isnan(value)) return "n/a";
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

inline std::string percent(double fraction, int decimals = 2) {
  if (std::isnan(fraction)) return "n/a";
  return fixed(100.0 * fraction, decimals);
}

inline std::string sigma_with_range(const VerdictCell& cell) {
  if (std::isnan(cell.sigma_mean)) return "n/a";
  return fixed(cell.sigma_mean, 4) + " [" + fixed(cell.sigma_min, 4) + "-" +
         fixed(cell.sigma_max, 4) + "]";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::UnwritablePath, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) raise(ErrorCode::UnwritablePath, "short write to '" + path.string() + "'");
}

inline std::string markdown_verdict(const ReportBundle& bundle) {
  std::string md = "# Verdict Stability\n\n";
  md += "Formatted after the stratified protocol: percentage agreement / (AC1, Kappa) / "
        "rubric-level adherence-score volatility, macro-averaged across judge-generator "
        "pairs.\n\n";
  md += "| Scenario | Type | Group | Agree (%) | Agree PW (%) | (AC1, Kappa) | Rubric \xcf\x83 "
        "(Avg [Range]) | AC1 Band | Pairs |\n";
  md += "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& table : bundle.verdict) {
    for (const auto& cell : table.cells) {
      md += "| " + table.scenario_id + " | " + std::string(test_set_name(table.test_set)) +
            " | " + cell.group.label() + " | " + percent(cell.p_a_modal) + " | " +
            percent(cell.p_a_pairwise) + " | (" + fixed(cell.ac1, 4) + ", " +
            fixed(cell.kappa, 4) + ") | " + sigma_with_range(cell) + " | " +
            (std::isnan(cell.ac1) ? "n/a" : std::string(interpret_ac1(cell.ac1))) + " | " +
            std::to_string(cell.n_pairs) + " |\n";
    }
  }

  for (const auto& table : bundle.verdict) {
    md += "\n## Scenario " + table.scenario_id + " \xe2\x80\x94 " +
          std::string(test_set_name(table.test_set)) + ", per question\n\n";
    md += "Cells: Agree % (AC1, Kappa), macro-averaged across pairs.\n\n| Group |";
    for (const auto& id : table.question_ids) md += " " + id + " |";
    md += "\n|---|";
    for (size_t i = 0; i < table.question_ids.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& cell : table.cells) {
      md += "| " + cell.group.label() + " |";
      for (const auto& q : cell.global_questions) {
        md += " " + percent(q.p_a_modal) + " (" + fixed(q.ac1, 3) + ", " + fixed(q.kappa, 3) +
              ") |";
      }
      md += "\n";
    }
  }

  md += "\n## Coverage\n\n";
  md += "- records: " + std::to_string(bundle.total_records) + "\n";
  md += "- error runs recorded: " + std::to_string(bundle.error_records) + "\n";
  md += "- unparseable store lines skipped: " + std::to_string(bundle.corrupt_lines) + "\n";
  long dropped = 0;
  bool ragged = false;
  for (const auto& table : bundle.verdict) {
    for (const auto& cell : table.cells) {
      for (const auto& q : cell.global_questions) {
        dropped += q.dropped_items;
        ragged = ragged || q.ragged;
      }
    }
  }
  md += "- items dropped below k=2 for chance-corrected stats: " + std::to_string(dropped) + "\n";
  if (ragged) {
    md += "- some strata had ragged rater counts after error exclusion; their AC1/Kappa are "
          "n/a\n";
  }
  return md;
}

inline std::string markdown_reasoning(const ReportBundle& bundle) {
  std::string md = "# Reasoning Stability\n\n";
  md += "Dominant-cluster share of justification fingerprints (R_stab, %), per localized "
        "scope, macro-averaged across pairs. Sorted by pooled stability.\n";
  for (const auto& table : bundle.reasoning) {
    md += "\n## Scenario " + table.scenario_id + " \xe2\x80\x94 " +
          std::string(test_set_name(table.test_set)) + "\n\n";
    md += "| Question | Strat. |";
    for (const auto& group : table.groups) md += " " + group.label() + " |";
    md += "\n|---|---|";
    for (size_t i = 0; i < table.groups.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& row : table.rows) {
      md += "| " + row.question_id + " | " +
            std::string(1, strategy_name(row.strategy).front()) + " |";
      for (const auto& group : table.groups) {
        const auto it = row.values.find(group);
        md += " " + (it == row.values.end() ? std::string("n/a") : fixed(it->second, 2)) + " |";
      }
      md += "\n";
    }
    md += "| *Rubric mean* | |";
    for (const auto& group : table.groups) {
      const auto it = table.rubric_row.find(group);
      md += " " + (it == table.rubric_row.end() ? std::string("n/a") : fixed(it->second, 2)) +
            " |";
    }
    md += "\n";
  }
  return md;
}

inline ordered_json json_document(const ReportBundle& bundle) {
  ordered_json doc;
  doc["verdict"] = ordered_json::array();
  for (const auto& table : bundle.verdict) {
    ordered_json t;
    t["scenario"] = table.scenario_id;
    t["test_set"] = std::string(test_set_name(table.test_set));
    t["questions"] = table.question_ids;
    t["groups"] = ordered_json::array();
    for (const auto& cell : table.cells) {
      ordered_json g;
      g["group"] = cell.group.label();
      g["pooled"] = cell.group.pooled;
      g["k"] = cell.group.k;
      g["p_a"] = cell.p_a;
      g["p_a_modal"] = cell.p_a_modal;
      g["p_a_pairwise"] = cell.p_a_pairwise;
      g["ac1"] = cell.ac1;
      g["kappa"] = cell.kappa;
      g["sigma_mean"] = cell.sigma_mean;
      g["sigma_min"] = cell.sigma_min;
      g["sigma_max"] = cell.sigma_max;
      g["n_pairs"] = cell.n_pairs;
      g["error_runs"] = cell.error_runs;
      g["questions"] = ordered_json::array();
      for (const auto& q : cell.global_questions) {
        ordered_json qj;
        qj["id"] = q.question_id;
        qj["p_a_modal"] = q.p_a_modal;
        qj["p_a_pairwise"] = q.p_a_pairwise;
        qj["ac1"] = q.ac1;
        qj["kappa"] = q.kappa;
        qj["kappa_imputed"] = q.kappa_imputed;
        qj["dropped_items"] = q.dropped_items;
        g["questions"].push_back(std::move(qj));
      }
      g["pairs"] = ordered_json::array();
      for (const auto& pair : cell.pairs) {
        ordered_json pj;
        pj["judge"] = pair.pair.judge_id;
        pj["generator"] = pair.pair.generator_id;
        pj["p_a"] = pair.p_a;
        pj["p_a_modal"] = pair.p_a_modal;
        pj["p_a_pairwise"] = pair.p_a_pairwise;
        pj["ac1"] = pair.ac1;
        pj["kappa"] = pair.kappa;
        pj["sigma"] = pair.sigma;
        pj["error_runs"] = pair.error_runs;
        ordered_json qlist = ordered_json::array();
        for (const auto& q : pair.questions) {
          ordered_json qj;
          qj["id"] = q.question_id;
          qj["p_a_modal"] = q.p_a_modal;
          qj["p_a_pairwise"] = q.p_a_pairwise;
          qj["ac1"] = q.ac1;
          qj["kappa"] = q.kappa;
          qj["kappa_imputed"] = q.kappa_imputed;
          qj["n_items"] = q.n_items;
          qj["dropped_items"] = q.dropped_items;
          qlist.push_back(std::move(qj));
        }
        pj["questions"] = std::move(qlist);
        g["pairs"].push_back(std::move(pj));
      }
      t["groups"].push_back(std::move(g));
    }
    doc["verdict"].push_back(std::move(t));
  }

  doc["reasoning"] = ordered_json::array();
  for (const auto& table : bundle.reasoning) {
    ordered_json t;
    t["scenario"] = table.scenario_id;
    t["test_set"] = std::string(test_set_name(table.test_set));
    t["n_pairs"] = table.n_pairs;
    t["scopes_clustered"] = table.scopes_clustered;
    t["rows"] = ordered_json::array();
    for (const auto& row : table.rows) {
      ordered_json rj;
      rj["question"] = row.question_id;
      rj["strategy"] = std::string(strategy_name(row.strategy));
      for (const auto& group : table.groups) {
        const auto it = row.values.find(group);
        rj[group.label()] = it == row.values.end() ? agg_detail::kNaN : it->second;
      }
      t["rows"].push_back(std::move(rj));
    }
    ordered_json rubric_row;
    for (const auto& group : table.groups) {
      const auto it = table.rubric_row.find(group);
      rubric_row[group.label()] = it == table.rubric_row.end() ? agg_detail::kNaN : it->second;
    }
    t["rubric_mean"] = std::move(rubric_row);
    doc["reasoning"].push_back(std::move(t));
  }

  ordered_json coverage;
  coverage["total_records"] = bundle.total_records;
  coverage["error_records"] = bundle.error_records;
  coverage["corrupt_lines"] = bundle.corrupt_lines;
  doc["coverage"] = std::move(coverage);
  return doc;
}

inline std::string csv_verdict(const ReportBundle& bundle) {
  std::string csv =
      "scenario,test_set,group,level,judge,generator,question,p_a_modal,p_a_pairwise,ac1,kappa,"
      "kappa_imputed,sigma,sigma_min,sigma_max,n_pairs,dropped_items,error_runs\n";
  auto n = [](double v) { return std::isnan(v) ? std::string() : fixed(v, 9); };
  for (const auto& table : bundle.verdict) {
    const std::string prefix =
        table.scenario_id + "," + std::string(test_set_name(table.test_set)) + ",";
    for (const auto& cell : table.cells) {
      csv += prefix + cell.group.label() + ",global,,,," + n(cell.p_a_modal) + "," +
             n(cell.p_a_pairwise) + "," + n(cell.ac1) + "," + n(cell.kappa) + ",," +
             n(cell.sigma_mean) + "," + n(cell.sigma_min) + "," + n(cell.sigma_max) + "," +
             std::to_string(cell.n_pairs) + ",," + std::to_string(cell.error_runs) + "\n";
      for (const auto& q : cell.global_questions) {
        csv += prefix + cell.group.label() + ",question,,," + q.question_id + "," +
               n(q.p_a_modal) + "," + n(q.p_a_pairwise) + "," + n(q.ac1) + "," + n(q.kappa) +
               "," + (q.kappa_imputed ? "true" : "false") + ",,,," +
               std::to_string(cell.n_pairs) + "," + std::to_string(q.dropped_items) + ",\n";
      }
      for (const auto& pair : cell.pairs) {
        csv += prefix + cell.group.label() + ",pair," + pair.pair.judge_id + "," +
               pair.pair.generator_id + ",," + n(pair.p_a_modal) + "," + n(pair.p_a_pairwise) +
               "," + n(pair.ac1) + "," + n(pair.kappa) + ",," + n(pair.sigma) + ",,,1,," +
               std::to_string(pair.error_runs) + "\n";
      }
    }
  }
  return csv;
}

inline std::string csv_reasoning(const ReportBundle& bundle) {
  std::string csv = "scenario,test_set,question,strategy,group,r_stab\n";
  for (const auto& table : bundle.reasoning) {
    const std::string prefix =
        table.scenario_id + "," + std::string(test_set_name(table.test_set)) + ",";
    for (const auto& row : table.rows) {
      for (const auto& group : table.groups) {
        const auto it = row.values.find(group);
        if (it == row.values.end()) continue;
        csv += prefix + row.question_id + "," + std::string(strategy_name(row.strategy)) + "," +
               group.label() + "," + fixed(it->second, 9) + "\n";
      }
    }
  }
  return csv;
}

}  // namespace report_detail

// Writes the report files for one format into out_dir and returns their
// paths. Identical bundles produce byte-identical files.
inline std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle,
                                                      ReportFormat format,
                                                      const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(ErrorCode::UnwritablePath, "cannot create '" + out_dir.string() + "'");

  std::vector<std::filesystem::path> written;
  switch (format) {
    case ReportFormat::Markdown: {
      const auto verdict_path = out_dir / "verdict_summary.md";
      report_detail::write_file(verdict_path, report_detail::markdown_verdict(bundle));
      written.push_back(verdict_path);
      const auto reasoning_path = out_dir / "reasoning_stability.md";
      report_detail::write_file(reasoning_path, report_detail::markdown_reasoning(bundle));
      written.push_back(reasoning_path);
      break;
    }
    case ReportFormat::JsonDocument: {
      const auto path = out_dir / "report.json";
      report_detail::write_file(path, report_detail::json_document(bundle).dump(2) + "\n");
      written.push_back(path);
      break;
    }
    case ReportFormat::Csv: {
      const auto verdict_path = out_dir / "verdict.csv";
      report_detail::write_file(verdict_path, report_detail::csv_verdict(bundle));
      written.push_back(verdict_path);
      const auto reasoning_path = out_dir / "reasoning.csv";
      report_detail::write_file(reasoning_path, report_detail::csv_reasoning(bundle));
      written.push_back(reasoning_path);
      break;
    }
  }
  return written;
}

}  // namespace stabaudit
