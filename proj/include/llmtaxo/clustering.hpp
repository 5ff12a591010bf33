#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmtaxo/corpus.hpp"
#include "llmtaxo/embedding.hpp"

namespace llmtaxo::clustering {

using embedding::Metric;

inline constexpr int kNoise = -1;

/// Dense symmetric n x n matrix, row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}
  /// Throws std::invalid_argument unless data.size() == n * n.
  DistanceMatrix(std::size_t n, std::vector<double> data);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const DistanceMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct Edge {
  std::size_t u = 0;  ///< u < v
  std::size_t v = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

struct HdbscanParams {
  std::size_t min_cluster_size = 3;
  /// Neighbour rank for core distances, self excluded. Unset means
  /// min_cluster_size - 1, i.e. the usual self-inclusive "min_samples =
  /// min_cluster_size" neighbourhood.
  std::optional<std::size_t> min_samples;
  std::optional<std::size_t> max_cluster_size;
  Metric metric = Metric::euclidean;

  std::size_t effective_min_samples() const;
  /// Throws ConfigError.
  void validate() const;
};

struct ClusterSummary {
  int label = 0;
  std::size_t size = 0;
  std::size_t representative = 0;  ///< lowest member index, i.e. earliest in input order
  std::string representative_claim_id;
  double stability = 0.0;
};

/// Flat HDBSCAN result over points 0..n-1. Cluster labels are 0..K-1, ordered
/// by each cluster's lowest member index; noise is kNoise.
struct Clustering {
  std::vector<int> labels;
  std::vector<ClusterSummary> clusters;

  std::size_t num_clusters() const { return clusters.size(); }
  std::size_t num_noise() const;
};

struct ClusterAssignment {
  std::string claim_id;
  int label = kNoise;

  bool operator==(const ClusterAssignment&) const = default;
};

DistanceMatrix pairwise_distances(std::span<const std::vector<double>> vectors, Metric metric = Metric::euclidean);

/// Distance from every point to its k-th nearest other point. k is clamped to n - 1.
std::vector<double> core_distances(const DistanceMatrix& distances, std::size_t k);

/// max(core_k(a), core_k(b), d(a, b)) off the diagonal, zero on it.
/// Throws TooFewPoints (n < 2), DimensionMismatch, ConfigError (k == 0).
DistanceMatrix mutual_reachability(const DistanceMatrix& distances, std::size_t min_samples);
DistanceMatrix mutual_reachability(std::span<const std::vector<double>> vectors, std::size_t min_samples,
                                   Metric metric = Metric::euclidean);

/// Prim's algorithm on the dense graph. Equal weights are broken by
/// (min endpoint, max endpoint). Edges come back sorted by (weight, u, v).
/// Throws std::invalid_argument for a non-square or asymmetric matrix.
std::vector<Edge> build_mst(const DistanceMatrix& weights);

/// Condensed-tree extraction with excess-of-mass selection. Edges of equal
/// weight are removed together, so a level that shatters a cluster into
/// several pieces is one event. Pieces smaller than min_cluster_size leave
/// their cluster as noise at that level. A cluster larger than
/// max_cluster_size is never selected; its descendants compete instead.
/// The root is never selected. Throws TooFewPoints, std::invalid_argument
/// (edges do not span 0..n-1).
Clustering extract_clusters(std::span<const Edge> mst, std::size_t n, const HdbscanParams& params);

/// mutual_reachability -> build_mst -> extract_clusters.
Clustering hdbscan(std::span<const std::vector<double>> vectors, const HdbscanParams& params);

/// Mean silhouette over non-noise points. Singleton clusters contribute 0.
/// Throws NotEnoughClusters when fewer than two non-noise clusters exist.
double silhouette(std::span<const std::vector<double>> vectors, std::span<const int> labels,
                  Metric metric = Metric::euclidean);

struct ClaimClustering {
  std::vector<ClusterAssignment> assignments;
  std::vector<ClusterSummary> clusters;
  std::size_t num_outliers = 0;
  std::optional<double> silhouette;  ///< unset with fewer than two clusters
};

/// Clusters embeddings and attaches claim ids. Needs at least two vectors.
ClaimClustering cluster_claims(std::span<const embedding::EmbeddingVector> vectors, const HdbscanParams& params);

/// One representative per non-noise cluster, the earliest claim in corpus
/// order. Representatives whose texts match after NFC, case folding and
/// whitespace collapse are kept once. Output is in corpus order.
/// Throws SchemaViolation when a claim has no assignment.
std::vector<corpus::Claim> select_distinct(std::span<const corpus::Claim> claims,
                                           std::span<const ClusterAssignment> assignments);

void to_json(nlohmann::json& j, const ClusterAssignment& a);
void from_json(const nlohmann::json& j, ClusterAssignment& a);
void to_json(nlohmann::json& j, const ClusterSummary& s);

}  // namespace llmtaxo::clustering
