#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace llmtaxo::corpus {

enum class Platform { twitter, facebook, other };

std::string_view to_string(Platform platform);
/// Unknown names map to Platform::other.
Platform platform_from_string(std::string_view name);

struct Post {
  std::string id;
  std::string text;
  Platform platform = Platform::other;
  std::optional<std::string> timestamp;

  bool operator==(const Post&) const = default;
};

struct ClaimScore {
  std::string post_id;
  double score = 0.0;

  bool operator==(const ClaimScore&) const = default;
};

/// A post that passed the check-worthiness threshold.
struct Claim {
  std::string id;
  std::string text;
  std::string source_post_id;
  double score = 0.0;

  bool operator==(const Claim&) const = default;
};

enum class Format { jsonl, csv };

/// Throws UnsupportedFormat.
Format format_from_string(std::string_view name);

struct IngestResult {
  std::vector<Post> posts;
  std::size_t dropped_count = 0;  ///< rows whose text was empty after trimming
};

/// Reads posts in input order. JSONL: one object per line with string keys
/// id, text and optional platform, timestamp. CSV: RFC 4180 with a header row
/// naming at least id and text (platform, timestamp optional).
/// Throws MalformedRecord, DuplicateId.
IngestResult ingest(std::string_view data, Format format);
IngestResult ingest(std::istream& in, Format format);

/// Scores one text on [0, 1]. Implementations must be safe to call from
/// several threads at once.
class ClaimScorer {
 public:
  virtual ~ClaimScorer() = default;
  virtual std::string id() const = 0;
  /// `text` is the post text or, in per-sentence mode, one sentence of it.
  virtual double score(const Post& post, std::string_view text) const = 0;
  /// Whether sentence-level scoring means anything for this scorer.
  virtual bool supports_sentences() const { return true; }
};

/// Looks scores up by post id. Ids absent from the map get `fallback` or, when
/// unset, raise ProviderUnavailable.
class FixtureScorer final : public ClaimScorer {
 public:
  explicit FixtureScorer(std::map<std::string, double> scores,
                         std::optional<double> fallback = std::nullopt)
      : scores_(std::move(scores)), fallback_(fallback) {}

  /// Every post gets the same score.
  static FixtureScorer constant(double value) { return FixtureScorer({}, value); }

  std::string id() const override { return "fixture"; }
  double score(const Post& post, std::string_view text) const override;
  bool supports_sentences() const override { return false; }

 private:
  std::map<std::string, double> scores_;
  std::optional<double> fallback_;
};

/// Offline stand-in for a trained claim detector. Five indicators worth 0.2
/// each: contains a digit; a capitalized token after the first; a reporting
/// verb from a fixed list; at least 8 tokens; no first-person pronoun.
/// This is NOT a ClaimBuster equivalent.
class HeuristicScorer final : public ClaimScorer {
 public:
  std::string id() const override { return "heuristic"; }
  double score(const Post& post, std::string_view text) const override;
};

double heuristic_score(std::string_view text);

/// ClaimBuster-style endpoint: POST {"input_text": ...} answered by
/// {"results": [{"score": x}, ...]}. The highest result score is used.
class RemoteScorer final : public ClaimScorer {
 public:
  RemoteScorer(std::string endpoint, std::string api_key, double timeout_seconds = 30.0)
      : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), timeout_(timeout_seconds) {}

  std::string id() const override { return "remote:" + endpoint_; }
  double score(const Post& post, std::string_view text) const override;

 private:
  std::string endpoint_;
  std::string api_key_;
  double timeout_;
};

/// Parses a scorer response body. Throws ProviderMalformedResponse.
double parse_scorer_response(const std::string& body);

struct ScoreOptions {
  std::size_t max_in_flight = 4;
  /// Score every sentence and keep the maximum instead of scoring the whole post.
  bool per_sentence = false;
};

/// One score per post, in input order, clamped to [0, 1].
std::vector<ClaimScore> score_claims(std::span<const Post> posts, const ClaimScorer& scorer,
                                     const ScoreOptions& options = {});

/// Splits on '.', '!' or '?' followed by whitespace. Never returns an empty list
/// for non-empty text.
std::vector<std::string> split_sentences(std::string_view text);

inline constexpr double kDefaultThreshold = 0.5;

/// Posts whose score is >= threshold, in input order.
/// Throws LengthMismatch, ConfigError (threshold outside [0, 1]).
std::vector<Claim> filter_checkworthy(std::span<const Post> posts,
                                      std::span<const ClaimScore> scores,
                                      double threshold = kDefaultThreshold);

void to_json(nlohmann::json& j, const Post& p);
void from_json(const nlohmann::json& j, Post& p);
void to_json(nlohmann::json& j, const ClaimScore& s);
void from_json(const nlohmann::json& j, ClaimScore& s);
void to_json(nlohmann::json& j, const Claim& c);
void from_json(const nlohmann::json& j, Claim& c);

}  // namespace llmtaxo::corpus
