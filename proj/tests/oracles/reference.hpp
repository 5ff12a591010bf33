#pragma once

// Straight-line reference implementations used as test oracles. They follow
// the definitions directly and share no code with the library.

#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

Matrix euclidean_matrix(const Matrix& points);

/// max(core(a), core(b), d(a, b)); core is the distance to the k-th nearest
/// other point.
Matrix mutual_reachability(const Matrix& points, std::size_t k);

/// Sorted edge weights of a minimum spanning tree found by enumerating every
/// labelled tree on n vertices (Pruefer sequences). Practical for n <= 8.
std::vector<double> brute_force_mst_weights(const Matrix& weights);

/// HDBSCAN labels computed from connected components of the mutual
/// reachability graph at every distinct distance, without a spanning tree.
/// Same conventions as the library: k = min_samples (self excluded), parents
/// win stability ties, the root is never selected, clusters larger than
/// max_cluster_size are never selected. Noise is -1; cluster ids arbitrary.
std::vector<int> reference_hdbscan(const Matrix& points, std::size_t min_cluster_size, std::size_t k,
                                   std::optional<std::size_t> max_cluster_size = std::nullopt);

/// True when both labelings induce the same partition and the same noise set.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b);

/// Mean over non-noise points of (b - a) / max(a, b), singletons scoring 0.
double silhouette_direct(const Matrix& points, const std::vector<int>& labels);

}  // namespace oracle
