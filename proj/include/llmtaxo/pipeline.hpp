#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "llmtaxo/clustering.hpp"
#include "llmtaxo/corpus.hpp"
#include "llmtaxo/evaluation.hpp"
#include "llmtaxo/taxonomy.hpp"

namespace llmtaxo::pipeline {

/// One pluggable provider. Kinds per role:
///   scorer:   heuristic | fixture (path = id->score JSON map) | remote
///   embedder: hash | remote
///   llm:      mock | scripted (path = script JSON) | remote
///   judge:    mock | scripted | remote
struct ProviderConfig {
  ProviderConfig() = default;
  explicit ProviderConfig(std::string k) : kind(std::move(k)) {}

  std::string kind;
  std::string endpoint;
  std::string model;
  std::string api_key;      ///< never written to artifacts
  std::string api_key_env;  ///< environment variable read when api_key is empty
  std::filesystem::path path;
  double timeout_seconds = 60.0;
};

struct RunConfig {
  std::filesystem::path input;
  corpus::Format format = corpus::Format::jsonl;
  double threshold = corpus::kDefaultThreshold;
  bool per_sentence = false;

  ProviderConfig scorer{"heuristic"};
  ProviderConfig embedder{"hash"};
  ProviderConfig llm{"mock"};
  ProviderConfig judge{"mock"};

  std::size_t embed_dim = 128;
  std::uint64_t embed_seed = 0;
  double embed_jitter = 0.02;
  std::size_t batch_size = 64;

  clustering::HdbscanParams hdbscan;
  taxonomy::MergeThresholds merge;

  std::filesystem::path examples;  ///< learning examples; empty means <out>/examples.json
  std::size_t k = 10;              ///< learning examples placed in each prompt
  std::size_t m = 100;             ///< claims drawn for seed annotation
  std::uint64_t seed = 42;
  bool ablation = false;  ///< generate without the seed taxonomy
  double temperature = 0.001;
  std::size_t max_in_flight = 4;
  std::size_t retry_attempts = 3;
  std::size_t retry_base_ms = 500;

  evaluation::JudgeMode judge_mode = evaluation::JudgeMode::per_metric;
  std::size_t eval_pairs = 50;

  std::filesystem::path out = "run";

  /// Throws ConfigError.
  void validate() const;
};

/// Reads a JSON config. Relative paths resolve against `base_dir`. Unknown
/// keys are rejected. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
/// Snapshot for manifests: no output directory and no credentials.
nlohmann::json config_snapshot(const RunConfig& config);

/// Fills empty api keys from the configured variable or LLMTAXO_<ROLE>_API_KEY.
void apply_env_overrides(RunConfig& config);
/// Replaces every remote provider with its offline counterpart.
void force_mock(RunConfig& config);

/// Artifact file names inside the run directory.
namespace artifacts {
inline constexpr std::string_view posts = "posts.jsonl";
inline constexpr std::string_view scores = "scores.jsonl";
inline constexpr std::string_view claims = "claims.jsonl";
inline constexpr std::string_view embeddings = "embeddings.jsonl";
inline constexpr std::string_view assignments = "assignments.jsonl";
inline constexpr std::string_view clusters = "clusters.json";
inline constexpr std::string_view distinct = "distinct_claims.jsonl";
inline constexpr std::string_view review = "review.jsonl";
inline constexpr std::string_view examples = "examples.json";
inline constexpr std::string_view generations = "generations.jsonl";
inline constexpr std::string_view taxonomy_raw = "taxonomy_raw.json";
inline constexpr std::string_view taxonomy = "taxonomy.json";
inline constexpr std::string_view evaluation = "evaluation.json";
inline constexpr std::string_view evaluation_table = "evaluation.txt";
inline constexpr std::string_view evaluation_scores = "evaluation_scores.jsonl";
inline constexpr std::string_view worksheet = "worksheet.jsonl";
inline constexpr std::string_view ablation = "ablation.json";
inline constexpr std::string_view ablation_table = "ablation.txt";
inline constexpr std::string_view manifest = "manifest.json";
}  // namespace artifacts

struct AblationLevel {
  taxonomy::Level level;
  std::size_t with_seed = 0;
  std::size_t without_seed = 0;
  /// (without - with) / without * 100; unset when without is 0.
  std::optional<double> reduction_percent;
};

struct AblationReport {
  std::array<AblationLevel, 3> levels;
};

nlohmann::json ablation_to_json(const AblationReport& report);
std::string ablation_to_table(const AblationReport& report);
/// Counts distinct topic nodes per level of each consolidated taxonomy.
AblationReport compare_topic_counts(const taxonomy::Taxonomy& with_seed, const taxonomy::Taxonomy& without_seed);

/// Runs pipeline stages against one run directory. Every stage reads its
/// inputs from the directory, writes its outputs there and records counts
/// in manifest.json. Everything that changes between otherwise identical
/// runs (timestamps, durations, provider call and cache statistics) is kept
/// under the manifest's "volatile" key.
class Runner {
 public:
  explicit Runner(RunConfig config);

  const RunConfig& config() const { return config_; }
  std::filesystem::path artifact(std::string_view name) const { return config_.out / name; }

  void ingest();
  void detect();
  void embed();
  void cluster();
  void distinct();
  /// Draws the annotation sample and writes proposals to review.jsonl.
  void annotate();
  /// Interactive pass over pending review rows.
  void review(std::istream& in, std::ostream& out);
  /// Turns reviewed rows into examples.json.
  void finalize_annotation();
  void generate();
  void consolidate();
  void evaluate();
  AblationReport ablate();
  /// ingest through evaluate.
  void run();

  nlohmann::json manifest() const;

 private:
  void record(std::string_view stage, const nlohmann::json& counts, double seconds,
              const nlohmann::json& provider_stats = nullptr);
  std::filesystem::path require(std::string_view name, std::string_view label) const;
  std::filesystem::path examples_path() const;

  RunConfig config_;
};

}  // namespace llmtaxo::pipeline
