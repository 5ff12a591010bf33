#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace llmtaxo::taxonomy {

enum class Level { broad = 0, medium = 1, detailed = 2 };

inline constexpr std::array<Level, 3> kLevels = {Level::broad, Level::medium, Level::detailed};
inline constexpr std::string_view kOtherLabel = "Other";

std::string_view to_string(Level level);
/// Throws SchemaViolation.
Level level_from_string(std::string_view name);

/// Topic labels of one claim. Levels fill top-down: a medium topic needs a
/// broad one, a detailed topic needs a medium one.
struct TopicTriple {
  std::string claim_id;
  std::optional<std::string> broad;
  std::optional<std::string> medium;
  std::optional<std::string> detailed;

  const std::optional<std::string>& at(Level level) const;
  std::optional<std::string>& at(Level level);

  /// Number of leading levels present (0..3).
  std::size_t depth() const;
  bool is_top_down() const;
  bool empty() const { return !broad && !medium && !detailed; }
  /// Deepest present label, if any.
  std::optional<std::string> leaf() const;

  bool operator==(const TopicTriple&) const = default;
};

struct TopicNode {
  std::string label;
  Level level = Level::broad;
  int parent = -1;  ///< index into Taxonomy::nodes(); -1 for broad topics
  std::size_t count = 0;
  bool is_other = false;
  std::vector<int> children;

  bool operator==(const TopicNode&) const = default;
};

/// Immutable three-level topic forest. Node identity is the label path from
/// the root, so equal labels under different parents are different nodes.
/// Siblings are ordered by descending count, then label.
class Taxonomy {
 public:
  Taxonomy() = default;

  const std::vector<TopicNode>& nodes() const { return nodes_; }
  const std::vector<int>& roots() const { return roots_; }
  std::size_t total_claims() const { return total_claims_; }

  const TopicNode& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }

  /// Node for a label path such as {"Safety", "Side Effects"}.
  std::optional<int> find(std::span<const std::string> path) const;
  std::vector<std::string> path_of(int index) const;

  /// Number of nodes at a level, optionally excluding "Other" buckets.
  std::size_t topic_count(Level level, bool include_other = true) const;
  /// Sum of node counts at a level.
  std::size_t level_total(Level level) const;

  bool operator==(const Taxonomy& other) const {
    return total_claims_ == other.total_claims_ && roots_ == other.roots_ && nodes_ == other.nodes_;
  }

  /// Recursive form used to build taxonomies; siblings need not be sorted.
  struct Branch {
    std::string label;
    std::size_t count = 0;
    bool is_other = false;
    std::vector<Branch> children;
  };

  /// Canonicalizes order and indexes paths. Throws SchemaViolation when the
  /// forest is deeper than three levels or repeats a label among siblings.
  static Taxonomy from_branches(std::vector<Branch> roots, std::size_t total_claims);
  std::vector<Branch> to_branches() const;

 private:
  std::vector<TopicNode> nodes_;
  std::vector<int> roots_;
  std::size_t total_claims_ = 0;
  std::map<std::string, int> index_;
};

/// Trim and collapse whitespace; case is kept as generated.
std::string normalize_label(std::string_view label);

/// Builds the forest from per-claim labels. Each claim adds one to every node
/// on its path. Labels are normalized first; a label that normalizes to ""
/// counts as absent. Throws InvalidTriple.
Taxonomy consolidate(std::span<const TopicTriple> triples);

struct MergeThresholds {
  std::size_t broad_min = 50;    ///< broad topics below this join the broad "Other"
  std::size_t medium_min = 5;    ///< medium topics below this join their parent's "Other"
  std::size_t detailed_min = 4;  ///< detailed topics below this join their parent's "Other"
};

/// Folds infrequent topics into "Other" buckets. Merged broad topics keep
/// their subtrees under the broad "Other"; nodes that end up sharing a path
/// are combined. Per-level count totals are preserved and applying the merge
/// twice equals applying it once.
Taxonomy merge_infrequent(const Taxonomy& taxonomy, const MergeThresholds& thresholds = {});

nlohmann::json to_json_value(const Taxonomy& taxonomy);
/// {"version": 1, "total_claims": n, "roots": [{label, level, count, is_other, children}]}
std::string to_json(const Taxonomy& taxonomy);
/// Throws SchemaViolation.
Taxonomy from_json(std::string_view text);

/// A curated claim with its topic labels, used as an in-context example.
struct LearningExample {
  std::string claim;
  TopicTriple topics;

  bool operator==(const LearningExample&) const = default;
};

using TopicTuple = std::array<std::optional<std::string>, 3>;

/// Distinct label tuples of the learning examples, in first-seen order.
class SeedTaxonomy {
 public:
  SeedTaxonomy() = default;
  explicit SeedTaxonomy(std::span<const LearningExample> examples);

  const std::vector<TopicTuple>& tuples() const { return tuples_; }
  std::size_t size() const { return tuples_.size(); }
  bool empty() const { return tuples_.empty(); }

  /// True when some seed tuple starts with the triple's labels down to `level`.
  bool contains_prefix(const TopicTriple& triple, Level level) const;
  /// Distinct labels at a level.
  std::vector<std::string> labels(Level level) const;

 private:
  std::vector<TopicTuple> tuples_;
};

/// {"examples": [{"claim", "broad", "medium", "detailed"}]}; medium and
/// detailed may be null or missing. Throws SchemaViolation, InvalidTriple.
std::vector<LearningExample> examples_from_json(std::string_view text);
std::string examples_to_json(std::span<const LearningExample> examples);

nlohmann::json triple_to_json(const TopicTriple& t);
TopicTriple triple_from_json(const nlohmann::json& j);

}  // namespace llmtaxo::taxonomy
