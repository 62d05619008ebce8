#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stabaudit/errors.hpp"
#include "stabaudit/text.hpp"

// Embedding providers behind one interface: an HTTP client for a sentence
// embedding service, and a deterministic offline fallback for tests and
// air-gapped runs.

namespace stabaudit {

struct EmbeddingVector {
  std::vector<double> values;  // unit-normalized

  double dot(const EmbeddingVector& other) const {
    double d = 0.0;
    for (size_t i = 0; i < values.size(); ++i) d += values[i] * other.values[i];
    return d;
  }
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string model_id() const = 0;
  // One raw (not yet normalized) vector per input, all the same dimension.
  virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& inputs) = 0;
};

// Hashed bag-of-tokens embedder. Each whitespace token lights up four
// FNV-1a-salted positions, so distinct tokens share at most a fraction of
// their mass and identical strings map to identical vectors on every
// platform and process.
class OfflineHashEmbedder final : public EmbeddingProvider {
 public:
  explicit OfflineHashEmbedder(size_t dimension = 256) : dimension_(dimension) {}

  std::string model_id() const override { return "offline-hash-256"; }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& inputs) override {
    std::vector<std::vector<double>> out;
    out.reserve(inputs.size());
    for (const auto& input : inputs) {
      std::vector<double> v(dimension_, 0.0);
      const auto tokens = text::split_whitespace(input);
      if (tokens.empty()) {
        v[0] = 1.0;
      } else {
        for (const auto& token : tokens) {
          for (uint64_t salt = 0; salt < 4; ++salt) {
            const uint64_t h = text::fnv1a64(token, 1469598103934665603ULL + salt * 0x9e3779b9ULL);
            v[h % dimension_] += 1.0;
          }
        }
      }
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  size_t dimension_;
};

// Client for an embedding service speaking {model, inputs} -> {vectors}.
// The vector dimension is discovered from the first response and enforced
// on every later call.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint_url, std::string model = "all-MiniLM-L6-v2",
                        int timeout_seconds = 30)
      : endpoint_(std::move(endpoint_url)), model_(std::move(model)), timeout_(timeout_seconds) {}

  std::string model_id() const override { return model_; }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& inputs) override {
    nlohmann::json body;
    body["model"] = model_;
    body["inputs"] = inputs;

    auto [host, path] = split_endpoint(endpoint_);
    httplib::Client client(host);
    client.set_connection_timeout(timeout_, 0);
    client.set_read_timeout(timeout_, 0);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      raise(ErrorCode::ProviderUnavailable,
            "embedding service unreachable at " + endpoint_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      raise(ErrorCode::ProviderUnavailable,
            "embedding service returned " + std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
      raise(ErrorCode::ProviderUnavailable, std::string("bad embedding response: ") + e.what());
    }
    if (!doc.contains("vectors") || !doc["vectors"].is_array() ||
        doc["vectors"].size() != inputs.size()) {
      raise(ErrorCode::ProviderUnavailable, "embedding response lacks one vector per input");
    }
    std::vector<std::vector<double>> out;
    for (const auto& vec : doc["vectors"]) {
      std::vector<double> v = vec.get<std::vector<double>>();
      if (dimension_ == 0) dimension_ = v.size();
      if (v.size() != dimension_) {
        raise(ErrorCode::ProviderUnavailable,
              "embedding dimension changed from " + std::to_string(dimension_) + " to " +
                  std::to_string(v.size()));
      }
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  static std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
  }

  std::string endpoint_;
  std::string model_;
  int timeout_;
  size_t dimension_ = 0;
};

// Embeds fingerprints as unit vectors. Results are memoized per batch, so
// identical strings receive bit-identical vectors from a single provider
// call per distinct input.
inline std::vector<EmbeddingVector> embed(const std::vector<std::string>& fingerprints,
                                          EmbeddingProvider& provider) {
  if (fingerprints.empty()) return {};

  std::vector<std::string> unique;
  std::map<std::string, size_t> index;
  for (const auto& f : fingerprints) {
    if (index.emplace(f, unique.size()).second) unique.push_back(f);
  }

  const auto raw = provider.embed_batch(unique);
  if (raw.size() != unique.size()) {
    raise(ErrorCode::ProviderUnavailable, "provider returned a short batch");
  }

  std::vector<EmbeddingVector> normalized(unique.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    double norm = 0.0;
    for (double x : raw[i]) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      raise(ErrorCode::ProviderUnavailable, "zero-norm embedding for '" + unique[i] + "'");
    }
    normalized[i].values.reserve(raw[i].size());
    for (double x : raw[i]) normalized[i].values.push_back(x / norm);
  }

  std::vector<EmbeddingVector> out;
  out.reserve(fingerprints.size());
  for (const auto& f : fingerprints) out.push_back(normalized[index[f]]);
  return out;
}

}  // namespace stabaudit
