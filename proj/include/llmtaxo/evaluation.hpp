#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "llmtaxo/providers.hpp"
#include "llmtaxo/taxonomy.hpp"

namespace llmtaxo::evaluation {

enum class Metric { clarity, hierarchical_coherence, orthogonality, completeness, accuracy, granularity };

inline constexpr std::array<Metric, 4> kTaxonomyMetrics = {Metric::clarity, Metric::hierarchical_coherence,
                                                           Metric::orthogonality, Metric::completeness};
inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::clarity,      Metric::hierarchical_coherence,
                                                      Metric::orthogonality, Metric::completeness,
                                                      Metric::accuracy,      Metric::granularity};

std::string_view to_string(Metric metric);
/// Throws SchemaViolation.
Metric metric_from_string(std::string_view name);

struct Criterion {
  std::string id;
  std::string name;
  std::string text;
};

struct MetricDefinition {
  Metric metric = Metric::clarity;
  std::string name;
  std::string goal;
  std::string purpose;
  std::vector<Criterion> criteria;
};

/// Parses a metrics file ({"metrics": [{id, name, goal, purpose, criteria}]}).
/// Throws SchemaViolation.
std::vector<MetricDefinition> load_metrics(std::string_view json_text);
/// The bundled taxonomy metric definitions.
const std::vector<MetricDefinition>& taxonomy_metrics();

/// One judged score. `criterion` is empty when the judge scored the metric as
/// a whole. `item_id` names the claim-topic pair for pair metrics.
struct MetricScore {
  std::string subject;  ///< what was judged, e.g. the generating model
  Metric metric = Metric::clarity;
  std::string criterion;
  int score = 0;  ///< 1..5
  std::string rationale;
  std::string evaluator_id;  ///< "group:name"; the group is the part before ':'
  std::string model;         ///< judge model, empty for humans
  std::string item_id;

  bool operator==(const MetricScore&) const = default;
};

/// A score that could not be read. The metric or pair is left missing.
struct ScoreFailure {
  std::string subject;
  Metric metric = Metric::clarity;
  std::string criterion;
  std::string item_id;
  std::string evaluator_id;
  std::string reason;
  std::string raw;
};

struct JudgeResult {
  std::vector<MetricScore> scores;
  std::vector<ScoreFailure> failures;
};

/// Indented outline of the taxonomy with claim counts. "Other" buckets and
/// everything under them are left out.
std::string render_taxonomy_for_judge(const taxonomy::Taxonomy& tax);

/// Taxonomy judging prompt covering the given metrics.
std::string build_taxonomy_prompt(const taxonomy::Taxonomy& tax, std::span<const MetricDefinition> metrics);

struct ParsedScore {
  Metric metric = Metric::clarity;
  std::string criterion;  ///< criterion id, empty for a whole-metric score
  std::optional<int> score;
  std::string rationale;
  std::string error;  ///< set when score is unset
};

/// Reads "<Criterion>: <n> - why", "<Metric> / <Criterion>: <n> - why" and
/// "<Metric>: <n> - why" lines, tolerating markdown. Names match
/// case-insensitively. A value that is not an integer in 1..5 is reported as
/// an error, never coerced.
std::vector<ParsedScore> parse_taxonomy_reply(std::string_view raw, std::span<const MetricDefinition> metrics);

enum class JudgeMode { per_metric, combined };

struct JudgeOptions {
  JudgeMode mode = JudgeMode::per_metric;
  std::string subject;
  std::string evaluator_id = "llm:judge";
  double temperature = 0.001;
  std::size_t max_in_flight = 4;
  providers::RetryPolicy retry;
};

/// One judge call per metric, or one for all of them in combined mode.
/// Metrics with no readable score are recorded as failures.
JudgeResult eval_taxonomy(const taxonomy::Taxonomy& tax, providers::ChatProvider& judge,
                          providers::ResponseCache* cache, const JudgeOptions& options = {},
                          std::span<const MetricDefinition> metrics = {});

struct ClaimTopicPair {
  std::string item_id;
  std::string subject;
  std::string claim;
  taxonomy::TopicTriple topics;
};

/// Deepest present level.
std::optional<std::string> leaf_topic(const taxonomy::TopicTriple& topics);

/// The bundled few-shot pair-judging template with the placeholders filled;
/// absent levels read "None".
std::string build_claim_topic_prompt(const ClaimTopicPair& pair);

struct PairReply {
  std::optional<int> accuracy;
  std::optional<int> granularity;
  std::string error;

  bool ok() const { return accuracy && granularity; }
};

/// Accepts "Accuracy: X. Granularity: Y." and "X, Y".
PairReply parse_pair_reply(std::string_view raw);

/// Draws up to n pairs per subject with a seeded RNG, pools them and
/// shuffles the pool with the same RNG.
std::vector<ClaimTopicPair> sample_pairs(std::span<const std::vector<ClaimTopicPair>> per_subject, std::size_t n,
                                         std::uint64_t seed);

JudgeResult eval_claim_topics(std::span<const ClaimTopicPair> pairs, providers::ChatProvider& judge,
                              providers::ResponseCache* cache, const JudgeOptions& options = {});

/// Worksheet for human evaluators: JSONL of {item_id, subject, prompt_text,
/// score_accuracy, score_granularity, rationale} with empty scores.
std::string export_worksheet(std::span<const ClaimTopicPair> pairs);
/// Reads a filled worksheet. Rows with unreadable or out-of-range scores
/// become failures. Throws MalformedRecord.
JudgeResult import_worksheet(std::string_view jsonl, const std::string& evaluator_id);

std::string scores_to_jsonl(std::span<const MetricScore> scores);
/// Throws MalformedRecord.
std::vector<MetricScore> scores_from_jsonl(std::string_view jsonl);

using MetricMeans = std::map<Metric, double>;

struct EvaluationReport {
  /// subject -> evaluator -> metric mean. Metrics without scores are absent.
  std::map<std::string, std::map<std::string, MetricMeans>> per_evaluator;
  /// subject -> evaluator group -> mean of that group's evaluator means.
  std::map<std::string, std::map<std::string, MetricMeans>> per_group;
  /// subject -> number of distinct claim-topic pairs scored.
  std::map<std::string, std::size_t> pair_sample_size;
};

std::string evaluator_group(std::string_view evaluator_id);

/// Per-evaluator means of the criterion (or pair) scores, then means across
/// the evaluators of each group. Order of the input does not matter.
/// Throws EmptyScores.
EvaluationReport aggregate(std::span<const MetricScore> scores);

nlohmann::json report_to_json(const EvaluationReport& report);
/// Plain-text table: one row per subject and evaluator group, one column
/// per metric, "-" for absent metrics.
std::string report_to_table(const EvaluationReport& report);

/// Offline judge. Answers taxonomy prompts by filling the requested answer
/// format and claim-topic prompts with "X, Y", with scores in 3..5 derived
/// from a hash of the prompt.
class MockJudge : public providers::ChatProvider {
 public:
  std::string id() const override { return "mock-judge"; }
  std::string model() const override { return "mock-judge-v1"; }

 protected:
  std::string do_complete(const std::vector<providers::ChatMessage>& messages, double temperature) override;
};

}  // namespace llmtaxo::evaluation
