#include "llmtaxo/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "llmtaxo/error.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::clustering {

using nlohmann::json;

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
  if (data_.size() != n_ * n_) throw std::invalid_argument("distance matrix data is not n x n");
}

std::size_t Clustering::num_noise() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

std::size_t HdbscanParams::effective_min_samples() const {
  if (min_samples) return *min_samples;
  return std::max<std::size_t>(1, min_cluster_size - 1);
}

void HdbscanParams::validate() const {
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
  if (min_samples && *min_samples < 1) throw ConfigError("min_samples must be >= 1");
  if (min_samples && *min_samples > min_cluster_size)
    throw ConfigError("min_samples must not exceed min_cluster_size");
  if (max_cluster_size && *max_cluster_size < min_cluster_size)
    throw ConfigError("max_cluster_size must be >= min_cluster_size");
}

DistanceMatrix pairwise_distances(std::span<const std::vector<double>> vectors, Metric metric) {
  const std::size_t n = vectors.size();
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double x = embedding::distance(vectors[i], vectors[j], metric);
      d(i, j) = x;
      d(j, i) = x;
    }
  }
  return d;
}

std::vector<double> core_distances(const DistanceMatrix& distances, std::size_t k) {
  const std::size_t n = distances.size();
  std::vector<double> core(n, 0.0);
  if (n < 2) return core;
  k = std::clamp<std::size_t>(k, 1, n - 1);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(distances(i, j));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  return core;
}

DistanceMatrix mutual_reachability(const DistanceMatrix& distances, std::size_t min_samples) {
  const std::size_t n = distances.size();
  if (n < 2) throw TooFewPoints("mutual reachability needs at least 2 points, got " + std::to_string(n));
  if (min_samples < 1) throw ConfigError("min_samples must be >= 1");
  auto core = core_distances(distances, min_samples);
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double x = std::max({core[i], core[j], distances(i, j)});
      m(i, j) = x;
      m(j, i) = x;
    }
  }
  return m;
}

DistanceMatrix mutual_reachability(std::span<const std::vector<double>> vectors, std::size_t min_samples,
                                   Metric metric) {
  if (vectors.size() < 2)
    throw TooFewPoints("mutual reachability needs at least 2 points, got " + std::to_string(vectors.size()));
  return mutual_reachability(pairwise_distances(vectors, metric), min_samples);
}

std::vector<Edge> build_mst(const DistanceMatrix& weights) {
  const std::size_t n = weights.size();
  if (weights.data().size() != n * n) throw std::invalid_argument("MST input is not square");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (weights(i, j) != weights(j, i)) throw std::invalid_argument("MST input is not symmetric");
  std::vector<Edge> edges;
  if (n < 2) return edges;

  using Key = std::tuple<double, std::size_t, std::size_t>;
  const Key unreached{std::numeric_limits<double>::infinity(), n, n};
  std::vector<Key> best(n, unreached);
  std::vector<bool> in_tree(n, false);
  in_tree[0] = true;
  std::size_t last = 0;
  for (std::size_t step = 1; step < n; ++step) {
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      Key candidate{weights(last, v), std::min(last, v), std::max(last, v)};
      if (candidate < best[v]) best[v] = candidate;
    }
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (next == n || best[v] < best[next])) next = v;
    auto [w, a, b] = best[next];
    edges.push_back(Edge{a, b, w});
    in_tree[next] = true;
    last = next;
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.weight, x.u, x.v) < std::tie(y.weight, y.u, y.v);
  });
  return edges;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Single-linkage hierarchy where every merge level is one multi-way node.
struct LevelNode {
  double distance = 0.0;
  std::size_t size = 1;
  std::vector<std::size_t> children;  // empty for points
};

std::vector<LevelNode> build_level_tree(std::vector<Edge> edges, std::size_t n) {
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.weight, x.u, x.v) < std::tie(y.weight, y.u, y.v);
  });
  std::vector<LevelNode> nodes(n);
  std::vector<std::size_t> component_node(n);
  std::iota(component_node.begin(), component_node.end(), 0);
  UnionFind uf(n);

  std::size_t i = 0;
  while (i < edges.size()) {
    std::size_t j = i;
    while (j < edges.size() && edges[j].weight == edges[i].weight) ++j;
    std::vector<std::size_t> old_roots;
    for (std::size_t e = i; e < j; ++e) {
      old_roots.push_back(uf.find(edges[e].u));
      old_roots.push_back(uf.find(edges[e].v));
    }
    std::sort(old_roots.begin(), old_roots.end());
    old_roots.erase(std::unique(old_roots.begin(), old_roots.end()), old_roots.end());
    for (std::size_t e = i; e < j; ++e) {
      if (uf.find(edges[e].u) == uf.find(edges[e].v))
        throw std::invalid_argument("edge list contains a cycle; not a spanning tree");
      uf.unite(edges[e].u, edges[e].v);
    }
    std::map<std::size_t, std::vector<std::size_t>> merged;  // new root -> old component nodes
    for (auto r : old_roots) merged[uf.find(r)].push_back(component_node[r]);
    for (auto& [root, parts] : merged) {
      LevelNode node;
      node.distance = edges[i].weight;
      node.size = 0;
      for (auto p : parts) node.size += nodes[p].size;
      node.children = std::move(parts);
      nodes.push_back(std::move(node));
      component_node[root] = nodes.size() - 1;
    }
    i = j;
  }
  if (nodes.back().size != n) throw std::invalid_argument("edges do not span all points");
  return nodes;
}

double lambda_of(double distance) {
  return distance > 0.0 ? 1.0 / distance : std::numeric_limits<double>::infinity();
}

double excess(double exit_lambda, double birth_lambda, std::size_t count) {
  if (exit_lambda == birth_lambda) return 0.0;
  return (exit_lambda - birth_lambda) * static_cast<double>(count);
}

struct CondensedCluster {
  int parent = -1;
  double birth_lambda = 0.0;
  std::size_t size = 0;
  double stability = 0.0;
  std::vector<int> children;
};

}  // namespace

Clustering extract_clusters(std::span<const Edge> mst, std::size_t n, const HdbscanParams& params) {
  if (n < 2) throw TooFewPoints("clustering needs at least 2 points, got " + std::to_string(n));
  params.validate();
  if (mst.size() != n - 1)
    throw std::invalid_argument("expected " + std::to_string(n - 1) + " MST edges, got " + std::to_string(mst.size()));
  for (const auto& e : mst)
    if (e.u >= n || e.v >= n || e.u == e.v) throw std::invalid_argument("MST edge endpoint out of range");

  const auto nodes = build_level_tree(std::vector<Edge>(mst.begin(), mst.end()), n);
  const std::size_t mcs = params.min_cluster_size;

  std::vector<CondensedCluster> clusters;
  std::vector<int> point_cluster(n, -1);  // cluster each point fell out of

  auto drop_points = [&](std::size_t node, int cluster, double lambda) {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      if (nodes[x].children.empty()) {
        point_cluster[x] = cluster;
        clusters[static_cast<std::size_t>(cluster)].stability +=
            excess(lambda, clusters[static_cast<std::size_t>(cluster)].birth_lambda, 1);
      } else {
        for (auto c : nodes[x].children) stack.push_back(c);
      }
    }
  };

  clusters.push_back(CondensedCluster{-1, 0.0, n, 0.0, {}});
  std::vector<std::pair<std::size_t, int>> work{{nodes.size() - 1, 0}};
  while (!work.empty()) {
    auto [node, cluster] = work.back();
    work.pop_back();
    const auto& ln = nodes[node];
    const double lambda = lambda_of(ln.distance);
    std::vector<std::size_t> big;
    for (auto c : ln.children)
      if (nodes[c].size >= mcs) big.push_back(c);
    for (auto c : ln.children)
      if (nodes[c].size < mcs) drop_points(c, cluster, lambda);
    if (big.size() == 1) {
      work.emplace_back(big.front(), cluster);
    } else if (big.size() > 1) {
      for (auto c : big) {
        auto& parent = clusters[static_cast<std::size_t>(cluster)];
        parent.stability += excess(lambda, parent.birth_lambda, nodes[c].size);
        int id = static_cast<int>(clusters.size());
        parent.children.push_back(id);
        clusters.push_back(CondensedCluster{cluster, lambda, nodes[c].size, 0.0, {}});
        work.emplace_back(c, id);
      }
    }
  }

  // Excess of mass, bottom-up. Children always have larger ids than parents.
  const std::size_t m = clusters.size();
  std::vector<bool> selected(m, false);
  std::vector<double> subtree(m, 0.0);
  for (std::size_t c = m; c-- > 1;) {
    const auto& cl = clusters[c];
    const bool selectable = !(params.max_cluster_size && cl.size > *params.max_cluster_size);
    double child_sum = 0.0;
    for (int ch : cl.children) child_sum += subtree[static_cast<std::size_t>(ch)];
    if (selectable && (cl.children.empty() || cl.stability >= child_sum)) {
      selected[c] = true;
      subtree[c] = cl.stability;
    } else {
      subtree[c] = child_sum;
    }
  }
  // Keep only the topmost selected clusters.
  std::vector<int> owner(m, -1);  // selected ancestor-or-self
  for (std::size_t c = 1; c < m; ++c) {
    int parent_owner = clusters[c].parent >= 0 ? owner[static_cast<std::size_t>(clusters[c].parent)] : -1;
    owner[c] = parent_owner >= 0 ? parent_owner : (selected[c] ? static_cast<int>(c) : -1);
  }

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t p = 0; p < n; ++p) {
    int o = owner[static_cast<std::size_t>(point_cluster[p])];
    if (o >= 0) members[o].push_back(p);
  }
  std::vector<std::pair<std::size_t, int>> order;  // (lowest member, cluster)
  for (auto& [c, pts] : members) order.emplace_back(pts.front(), c);
  std::sort(order.begin(), order.end());

  Clustering result;
  result.labels.assign(n, kNoise);
  for (std::size_t label = 0; label < order.size(); ++label) {
    int c = order[label].second;
    const auto& pts = members[c];
    for (auto p : pts) result.labels[p] = static_cast<int>(label);
    ClusterSummary s;
    s.label = static_cast<int>(label);
    s.size = pts.size();
    s.representative = pts.front();
    s.stability = clusters[static_cast<std::size_t>(c)].stability;
    result.clusters.push_back(std::move(s));
  }
  return result;
}

Clustering hdbscan(std::span<const std::vector<double>> vectors, const HdbscanParams& params) {
  params.validate();
  auto mreach = mutual_reachability(vectors, params.effective_min_samples(), params.metric);
  auto mst = build_mst(mreach);
  return extract_clusters(mst, vectors.size(), params);
}

double silhouette(std::span<const std::vector<double>> vectors, std::span<const int> labels, Metric metric) {
  if (vectors.size() != labels.size())
    throw LengthMismatch(std::to_string(vectors.size()) + " vectors but " + std::to_string(labels.size()) + " labels");
  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) clusters[labels[i]].push_back(i);
  if (clusters.size() < 2)
    throw NotEnoughClusters("silhouette needs at least 2 non-noise clusters, got " + std::to_string(clusters.size()));

  auto mean_distance = [&](std::size_t i, const std::vector<std::size_t>& group) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto j : group) {
      if (j == i) continue;
      sum += embedding::distance(vectors[i], vectors[j], metric);
      ++count;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
  };

  double total = 0.0;
  std::size_t points = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kNoise) continue;
    ++points;
    const auto& own = clusters[labels[i]];
    if (own.size() == 1) continue;
    double a = mean_distance(i, own);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, group] : clusters)
      if (label != labels[i]) b = std::min(b, mean_distance(i, group));
    double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(points);
}

ClaimClustering cluster_claims(std::span<const embedding::EmbeddingVector> vectors, const HdbscanParams& params) {
  std::vector<std::vector<double>> raw;
  raw.reserve(vectors.size());
  for (const auto& v : vectors) raw.push_back(v.values);
  auto flat = hdbscan(raw, params);

  ClaimClustering out;
  for (std::size_t i = 0; i < vectors.size(); ++i) out.assignments.push_back({vectors[i].claim_id, flat.labels[i]});
  out.clusters = std::move(flat.clusters);
  for (auto& c : out.clusters) c.representative_claim_id = vectors[c.representative].claim_id;
  out.num_outliers = flat.num_noise();
  if (out.clusters.size() >= 2) out.silhouette = silhouette(raw, flat.labels, params.metric);
  return out;
}

std::vector<corpus::Claim> select_distinct(std::span<const corpus::Claim> claims,
                                           std::span<const ClusterAssignment> assignments) {
  std::unordered_map<std::string, int> label_of;
  for (const auto& a : assignments) label_of[a.claim_id] = a.label;
  std::unordered_set<int> seen_labels;
  std::unordered_set<std::string> seen_texts;
  std::vector<corpus::Claim> out;
  for (const auto& claim : claims) {
    auto it = label_of.find(claim.id);
    if (it == label_of.end()) throw SchemaViolation("claim \"" + claim.id + "\" has no cluster assignment");
    if (it->second == kNoise || !seen_labels.insert(it->second).second) continue;
    if (!seen_texts.insert(normalize_for_dedup(claim.text)).second) continue;
    out.push_back(claim);
  }
  return out;
}

void to_json(json& j, const ClusterAssignment& a) { j = json{{"claim_id", a.claim_id}, {"label", a.label}}; }

void from_json(const json& j, ClusterAssignment& a) {
  a.claim_id = j.at("claim_id").get<std::string>();
  a.label = j.at("label").get<int>();
}

void to_json(json& j, const ClusterSummary& s) {
  j = json{{"label", s.label},
           {"size", s.size},
           {"representative_claim_id", s.representative_claim_id},
           {"stability", std::isfinite(s.stability) ? json(s.stability) : json(nullptr)}};
}

}  // namespace llmtaxo::clustering
