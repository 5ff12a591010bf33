#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmtaxo/corpus.hpp"
#include "llmtaxo/providers.hpp"
#include "llmtaxo/taxonomy.hpp"

namespace llmtaxo::generation {

using taxonomy::LearningExample;
using taxonomy::Level;
using taxonomy::SeedTaxonomy;
using taxonomy::TopicTriple;

enum class FlagKind { over_length, blacklisted_phrase, echoes_claim, missing_level, novel_topic, parse_failure };

std::string_view to_string(FlagKind kind);
/// Throws SchemaViolation.
FlagKind flag_kind_from_string(std::string_view name);

struct Flag {
  FlagKind kind = FlagKind::missing_level;
  std::optional<Level> level;  ///< unset for whole-response flags

  bool operator==(const Flag&) const = default;
};

inline constexpr std::size_t kMaxWordsPerTopic = 8;

/// Fixed opening of every topic-generation prompt.
std::string_view default_instruction();

struct PromptSpec {
  std::string instruction{default_instruction()};
  std::vector<LearningExample> examples;
  std::optional<SeedTaxonomy> seed;  ///< unset in the no-seed ablation
  corpus::Claim target;
  std::size_t max_words_per_topic = kMaxWordsPerTopic;
};

/// Instruction, worked examples, existing topics (when seeded) with the
/// reuse instruction, then the target claim and the three questions. Pure
/// and byte-stable. Throws EmptyExamples.
std::string build_prompt(const PromptSpec& spec);

/// Section markers in the prompt, shared with the mock providers.
inline constexpr std::string_view kExistingTopicsHeader = "### Existing topics";
inline constexpr std::string_view kTargetHeader = "### Target claim";

struct SanitizeOptions {
  std::size_t max_words = kMaxWordsPerTopic;
  /// Case-insensitive. A topic is dropped when it equals an entry, or starts
  /// with a multi-word entry followed by more words.
  std::vector<std::string> blacklist = {"not mentioned", "n/a", "unknown"};
};

struct ParsedTopics {
  TopicTriple triple;
  std::vector<Flag> flags;
};

/// Reads "Broad topic: ...", "Medium topic: ..." and "Detailed topic: ..."
/// lines, case-insensitively and tolerating markdown emphasis, bullets and
/// headings. "None" or an empty value means the level is absent. Blacklisted
/// values are dropped. Absent levels get missing_level flags. The result is
/// repaired to fill top-down by keeping the longest valid prefix. Never throws.
ParsedTopics parse_response(std::string_view raw, const SanitizeOptions& options = {});

/// Applies over_length (kept), echoes_claim (dropped), blacklist (dropped)
/// and novel_topic (informational, only when a seed is given) rules, then
/// repairs the triple to fill top-down.
ParsedTopics sanitize(TopicTriple triple, std::string_view claim_text, const SeedTaxonomy* seed,
                      const SanitizeOptions& options = {});

struct GenerationResult {
  std::string claim_id;
  std::string raw_response;
  TopicTriple triple;
  std::vector<Flag> flags;

  bool has_flag(FlagKind kind) const;
};

struct GenerateOptions {
  double temperature = 0.001;
  std::size_t max_in_flight = 4;
  providers::RetryPolicy retry;
  SanitizeOptions sanitize;
  std::string instruction{default_instruction()};
  std::size_t max_words_per_topic = kMaxWordsPerTopic;
};

struct GenerateStats {
  std::size_t provider_calls = 0;
  std::size_t cache_hits = 0;
};

/// One prompt per claim. `seed` null runs the no-seed ablation. Provider
/// failures that persist after retries raise ProviderUnavailable; a reply
/// that cannot be parsed becomes an empty triple flagged parse_failure.
/// Throws EmptyExamples.
std::vector<GenerationResult> generate_topics(std::span<const corpus::Claim> claims,
                                              std::span<const LearningExample> examples, const SeedTaxonomy* seed,
                                              providers::ChatProvider& llm, providers::ResponseCache* cache,
                                              const GenerateOptions& options = {}, GenerateStats* stats = nullptr);

std::string result_to_jsonl(std::span<const GenerationResult> results);
/// Throws SchemaViolation.
std::vector<GenerationResult> results_from_jsonl(std::string_view text);

/// Seed-aware offline model. With an existing-topics list in the prompt it
/// answers with the listed topic path sharing the most words with the target
/// claim (first wins ties). Without one it makes labels up from the claim's
/// own words, so nearly every claim gets new topics.
class SeedAwareMockChat : public providers::ChatProvider {
 public:
  std::string id() const override { return "mock-seed-aware"; }
  std::string model() const override { return "mock-seed-aware-v1"; }

 protected:
  std::string do_complete(const std::vector<providers::ChatMessage>& messages, double temperature) override;
};

// Seed annotation.

enum class ReviewStatus { pending, accepted, edited, rejected };

std::string_view to_string(ReviewStatus status);
ReviewStatus review_status_from_string(std::string_view name);

struct ReviewRow {
  std::string claim_id;
  std::string claim;
  TopicTriple proposed;
  ReviewStatus status = ReviewStatus::pending;
  TopicTriple final;

  bool operator==(const ReviewRow&) const = default;
};

/// m claims drawn without replacement with a seeded RNG, in corpus order.
std::vector<corpus::Claim> draw_sample(std::span<const corpus::Claim> claims, std::size_t m, std::uint64_t seed);

/// Prompt asking a model to propose topics for one claim, used before any
/// learning examples exist.
std::string annotation_prompt(std::string_view claim, std::size_t max_words = kMaxWordsPerTopic);

/// Proposes a triple per claim. Rows start pending with final = proposed.
std::vector<ReviewRow> annotate_seed(std::span<const corpus::Claim> sample, providers::ChatProvider& llm,
                                     providers::ResponseCache* cache, const GenerateOptions& options = {});

std::string review_to_jsonl(std::span<const ReviewRow> rows);
/// Throws MalformedRecord, SchemaViolation.
std::vector<ReviewRow> review_from_jsonl(std::string_view text);

/// Walks pending rows. Per row: "a" accept, "r" reject, "e" edit (then one
/// line per level, empty keeps the current value, "-" clears it), "s" skip,
/// "q" stop. Returns the number of rows decided.
std::size_t review_interactive(std::vector<ReviewRow>& rows, std::istream& in, std::ostream& out);

/// Accepted and edited rows become learning examples. Throws EmptyExamples
/// when none qualify, InvalidTriple when a final triple skips a level.
std::vector<LearningExample> finalize_review(std::span<const ReviewRow> rows);

}  // namespace llmtaxo::generation
