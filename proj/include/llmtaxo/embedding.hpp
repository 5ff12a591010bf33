#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "llmtaxo/corpus.hpp"

namespace llmtaxo::embedding {

enum class Metric { euclidean, cosine };

std::string_view to_string(Metric metric);
/// Throws ConfigError.
Metric metric_from_string(std::string_view name);

struct EmbeddingVector {
  std::string claim_id;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

/// Produces raw vectors for a batch of texts, one per text, in order.
/// Implementations must be safe to call from several threads at once.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::string model() const = 0;
  virtual std::size_t max_batch() const { return 64; }
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) const = 0;
};

/// Deterministic offline embedder. Texts are reduced to lowercase word tokens
/// (URLs, @mentions and "rt" dropped, leading '#' stripped); every token owns a
/// seeded pseudo-random Gaussian direction and a text's vector is the sum of
/// its token directions plus a small perturbation seeded by the exact text.
/// Texts with the same words land close together; unrelated texts are nearly
/// orthogonal.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 128, std::uint64_t seed = 0, double jitter = 0.02)
      : dim_(dim), seed_(seed), jitter_(jitter) {}

  std::string id() const override { return "hash"; }
  std::string model() const override;
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) const override;

  std::vector<double> embed_one(std::string_view text) const;

  /// The token list the embedder sees for a text.
  static std::vector<std::string> tokenize(std::string_view text);

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  double jitter_;
};

/// OpenAI-compatible embeddings endpoint: POST {"model", "input": [...]} answered
/// by {"data": [{"embedding": [...]}, ...]} in input order.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::string model, std::string api_key,
                 std::size_t max_batch = 64, double timeout_seconds = 60.0)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), api_key_(std::move(api_key)),
        max_batch_(max_batch), timeout_(timeout_seconds) {}

  std::string id() const override { return "remote:" + endpoint_; }
  std::string model() const override { return model_; }
  std::size_t max_batch() const override { return max_batch_; }
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) const override;

 private:
  std::string endpoint_, model_, api_key_;
  std::size_t max_batch_;
  double timeout_;
};

/// Parses an embeddings response body. Throws ProviderMalformedResponse.
std::vector<std::vector<double>> parse_embeddings_response(const std::string& body, std::size_t expected);

/// Vectors keyed by SHA-256 of (provider id, model, text). Backed by an
/// append-only JSONL file of {key_hash, dim, values} when a path is given.
/// Writes are serialized; lookups may run concurrently with each other.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path file);

  std::optional<std::vector<double>> find(const std::string& key) const;
  void insert(const std::string& key, const std::vector<double>& values);
  std::size_t size() const;

  static std::string key_for(const Embedder& embedder, std::string_view text);

 private:
  std::optional<std::filesystem::path> file_;
  std::unordered_map<std::string, std::vector<double>> entries_;
  mutable std::mutex mutex_;
};

struct EmbedOptions {
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
};

struct EmbedStats {
  std::size_t provider_calls = 0;
  std::size_t texts_requested = 0;
  std::size_t cache_hits = 0;
};

/// L2 normalization. Throws NonFiniteValue on NaN/Inf input or a zero vector.
std::vector<double> l2_normalize(std::span<const double> values);

/// One unit vector per claim, in claim order. Identical texts share one vector.
/// Throws ProviderUnavailable, DimensionMismatch, NonFiniteValue.
std::vector<EmbeddingVector> embed_batch(std::span<const corpus::Claim> claims, const Embedder& embedder,
                                         EmbeddingCache* cache = nullptr, const EmbedOptions& options = {},
                                         EmbedStats* stats = nullptr);

/// euclidean: L2 distance. cosine: 1 - cos(angle), which is 1 - dot(a, b) on
/// unit vectors. Both are >= 0. Throws DimensionMismatch.
double distance(std::span<const double> a, std::span<const double> b, Metric metric = Metric::euclidean);

inline double distance(const EmbeddingVector& a, const EmbeddingVector& b, Metric metric = Metric::euclidean) {
  return distance(std::span<const double>(a.values), std::span<const double>(b.values), metric);
}

void to_json(nlohmann::json& j, const EmbeddingVector& v);
void from_json(const nlohmann::json& j, EmbeddingVector& v);

}  // namespace llmtaxo::embedding
