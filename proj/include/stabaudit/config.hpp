#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabaudit/corpus.hpp"
#include "stabaudit/embedding.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judge_client.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/verdict_metrics.hpp"

// Experiment configuration: the single source of run-plan truth. One JSON
// file; CLI flags override config keys; credentials enter only as
// environment-variable names on providers.

namespace stabaudit {

struct ScenarioSpec {
  std::string id;
  std::string aut_prompt_path;
  std::vector<std::string> rubric_paths;
};

struct EmbeddingConfig {
  // "offline:" (or empty) selects the deterministic offline embedder.
  std::string endpoint_url = "offline:";
  std::string model_id = "all-MiniLM-L6-v2";
  int timeout_ms = 30000;
};

struct ExperimentConfig {
  std::string storage = "store";
  long seed = 0;
  std::vector<int> run_groups = {5, 10, 20, 25, 30};
  int parallelism = 2;
  std::string profiles_path;
  std::vector<ScenarioSpec> scenarios;
  std::vector<std::string> generators;
  std::vector<std::string> judges;
  std::map<std::string, ProviderConfig> providers;
  EmbeddingConfig embedding;
  std::string checker_bindings_path;

  // Metric knobs.
  double epsilon = 0.05;
  int min_pts = 1;
  bool exact_numeric = false;
  AgreementMode agreement_mode = AgreementMode::Modal;
  bool sigma_sample = true;
  bool per_profile_stats = false;

  int pooled_runs() const {
    int total = 0;
    for (int k : run_groups) total += k;
    return total;
  }

  const ProviderConfig& provider(const std::string& id) const {
    const auto it = providers.find(id);
    if (it == providers.end()) {
      raise(ErrorCode::UnknownProvider, "provider '" + id + "' is not configured");
    }
    return it->second;
  }

  const ScenarioSpec* scenario(const std::string& id) const {
    for (const auto& s : scenarios) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  static ExperimentConfig from_json(const ordered_json& doc,
                                    const std::filesystem::path& base_dir = ".") {
    ExperimentConfig cfg;
    auto resolve = [&](const std::string& path) -> std::string {
      if (path.empty()) return path;
      const std::filesystem::path p(path);
      return p.is_absolute() ? p.string() : (base_dir / p).lexically_normal().string();
    };

    cfg.storage = resolve(doc.value("storage", "store"));
    cfg.seed = doc.value("seed", 0L);
    if (doc.contains("run_groups")) {
      cfg.run_groups = doc["run_groups"].get<std::vector<int>>();
    }
    if (cfg.run_groups.empty()) {
      raise(ErrorCode::InvalidArgument, "run_groups must be non-empty");
    }
    for (int k : cfg.run_groups) {
      if (k < 1) raise(ErrorCode::InvalidArgument, "run group sizes must be >= 1");
    }
    cfg.parallelism = std::max(1, doc.value("parallelism", 2));
    cfg.profiles_path = resolve(doc.value("profiles", ""));
    if (doc.contains("scenarios")) {
      for (const auto& entry : doc["scenarios"]) {
        ScenarioSpec spec;
        spec.id = entry.value("id", "");
        spec.aut_prompt_path = resolve(entry.value("aut_prompt", ""));
        if (entry.contains("rubrics")) {
          for (const auto& r : entry["rubrics"]) {
            spec.rubric_paths.push_back(resolve(r.get<std::string>()));
          }
        }
        cfg.scenarios.push_back(std::move(spec));
      }
    }
    if (doc.contains("generators")) cfg.generators = doc["generators"].get<std::vector<std::string>>();
    if (doc.contains("judges")) cfg.judges = doc["judges"].get<std::vector<std::string>>();
    if (doc.contains("providers")) {
      for (auto it = doc["providers"].begin(); it != doc["providers"].end(); ++it) {
        cfg.providers[it.key()] = ProviderConfig::from_json(it.key(), it.value());
      }
    }
    if (doc.contains("embedding")) {
      const auto& e = doc["embedding"];
      cfg.embedding.endpoint_url = e.value("endpoint_url", "offline:");
      cfg.embedding.model_id = e.value("model_id", "all-MiniLM-L6-v2");
      cfg.embedding.timeout_ms = e.value("timeout_ms", 30000);
    }
    cfg.checker_bindings_path = resolve(doc.value("checker_bindings", ""));
    cfg.epsilon = doc.value("epsilon", 0.05);
    cfg.min_pts = doc.value("min_pts", 1);
    cfg.exact_numeric = doc.value("exact_numeric", false);
    if (doc.contains("agreement_mode")) {
      cfg.agreement_mode = agreement_mode_from_string(doc["agreement_mode"].get<std::string>());
    }
    cfg.sigma_sample = doc.value("sigma_sample", true);
    cfg.per_profile_stats = doc.value("per_profile_stats", false);
    return cfg;
  }

  // Relative paths inside the file resolve against the file's directory.
  static ExperimentConfig load(const std::string& path) {
    ordered_json doc;
    try {
      doc = ordered_json::parse(read_file(path));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      raise(ErrorCode::InvalidArgument, "config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(doc, std::filesystem::path(path).parent_path());
  }
};

inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& cfg) {
  if (cfg.endpoint_url.empty() || text::starts_with(cfg.endpoint_url, "offline:")) {
    return std::make_unique<OfflineHashEmbedder>();
  }
  return std::make_unique<HttpEmbeddingProvider>(cfg.endpoint_url, cfg.model_id,
                                                 cfg.timeout_ms / 1000);
}

}  // namespace stabaudit
