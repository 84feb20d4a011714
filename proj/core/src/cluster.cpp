#include "icr/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "icr/errors.hpp"
#include "icr/hash.hpp"
#include "icr/jsonl.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Distance
// ---------------------------------------------------------------------------

double cosine_distance(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim != v.dim) {
    throw DimensionMismatch("cosine_distance: " + std::to_string(u.dim) + " vs " +
                            std::to_string(v.dim));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int i = 0; i < u.dim; ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine_distance on a zero vector");
  double d = 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(d, 0.0, 2.0);
}

// ---------------------------------------------------------------------------
// Dendrogram
// ---------------------------------------------------------------------------

double Dendrogram::max_height() const {
  double h = 0.0;
  for (const auto& m : merges) h = std::max(h, m.height);
  return h;
}

void Dendrogram::validate(double tol) const {
  if (n_leaves < 1) throw InvalidArgument("dendrogram must have at least one leaf");
  if (static_cast<int>(merges.size()) != n_leaves - 1) {
    throw InvalidArgument("dendrogram needs exactly n_leaves - 1 merges, got " +
                          std::to_string(merges.size()));
  }
  std::set<int> used_children;
  double prev_height = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < merges.size(); ++i) {
    const Merge& m = merges[i];
    int expected_id = n_leaves + static_cast<int>(i);
    if (m.node_id != expected_id) {
      throw InvalidArgument("merge " + std::to_string(i) + " has node id " +
                            std::to_string(m.node_id) + ", expected " +
                            std::to_string(expected_id));
    }
    for (int child : {m.left, m.right}) {
      if (child < 0 || child >= m.node_id) {
        throw InvalidArgument("merge " + std::to_string(i) + " references invalid child " +
                              std::to_string(child));
      }
      if (!used_children.insert(child).second) {
        throw InvalidArgument("node " + std::to_string(child) +
                              " appears as a child more than once");
      }
    }
    if (m.left == m.right) {
      throw InvalidArgument("merge " + std::to_string(i) + " merges a node with itself");
    }
    if (m.height < prev_height - tol) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "merge %zu height %.17g below previous %.17g (inversion beyond %g)",
                    i, m.height, prev_height, tol);
      throw MonotonicityViolation(buf);
    }
    prev_height = std::max(prev_height, m.height);
  }
}

// ---------------------------------------------------------------------------
// Nearest-neighbor chain construction
// ---------------------------------------------------------------------------

namespace {

// Index into the condensed upper-triangle distance matrix.
inline std::size_t condensed_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

struct RawMerge {
  int slot_a = 0;  // leaf-index slots of the merged clusters
  int slot_b = 0;
  double height = 0.0;
};

// Union-find over leaves used to relabel chain-order merges into
// height-ordered dendrogram node ids.
class LeafSets {
 public:
  explicit LeafSets(int n) : parent_(n), node_id_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
    std::iota(node_id_.begin(), node_id_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  int node_of(int leaf) { return node_id_[find(leaf)]; }

  void merge(int a, int b, int new_node) {
    int ra = find(a), rb = find(b);
    parent_[ra] = rb;
    node_id_[rb] = new_node;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> node_id_;
};

}  // namespace

Dendrogram build_dendrogram(const std::vector<EmbeddingVector>& vectors,
                            const DendrogramOptions& options) {
  const int n = static_cast<int>(vectors.size());
  if (n < 2) throw InvalidArgument("build_dendrogram requires at least 2 vectors");
  if (n > options.leaf_limit) {
    throw LeafLimitExceeded(std::to_string(n) + " leaves exceeds the configured limit of " +
                            std::to_string(options.leaf_limit) +
                            " (O(n^2) distance storage)");
  }

  const std::size_t un = static_cast<std::size_t>(n);
  std::vector<double> dist(un * (un - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      dist[condensed_index(un, i, j)] = cosine_distance(vectors[i], vectors[j]);
    }
  }

  std::vector<bool> active(un, true);
  std::vector<int> size(un, 1);
  std::vector<int> chain;
  chain.reserve(un);
  std::vector<RawMerge> raw;
  raw.reserve(un - 1);

  int remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (int i = 0; i < n; ++i) {
        if (active[i]) {
          chain.push_back(i);
          break;
        }
      }
    }
    for (;;) {
      int top = chain.back();
      int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        if (!active[j] || j == top) continue;
        double d = dist[condensed_index(un, top, j)];
        // Prefer the chain predecessor on ties so reciprocal pairs close.
        if (d < best_d || (d == best_d && (j == prev || (best != prev && j < best)))) {
          best_d = d;
          best = j;
        }
      }
      if (best == prev) {
        // Reciprocal nearest neighbors: merge top and prev.
        chain.pop_back();
        chain.pop_back();
        int a = std::min(top, prev), b = std::max(top, prev);
        raw.push_back({a, b, best_d});
        // Lance-Williams average-linkage update into slot a.
        for (int c = 0; c < n; ++c) {
          if (!active[c] || c == a || c == b) continue;
          double dac = dist[condensed_index(un, a, c)];
          double dbc = dist[condensed_index(un, b, c)];
          dist[condensed_index(un, a, c)] =
              (size[a] * dac + size[b] * dbc) / (size[a] + size[b]);
        }
        size[a] += size[b];
        active[b] = false;
        --remaining;
        break;
      }
      chain.push_back(best);
    }
  }

  // Average linkage is reducible, so ordering the discovered merges by height
  // reproduces the greedy minimal-pair sequence. Stable sort keeps discovery
  // order for exact ties.
  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawMerge& x, const RawMerge& y) { return x.height < y.height; });

  Dendrogram d;
  d.n_leaves = n;
  d.merges.reserve(un - 1);
  LeafSets sets(n);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    int left = sets.node_of(raw[i].slot_a);
    int right = sets.node_of(raw[i].slot_b);
    if (left > right) std::swap(left, right);
    int node_id = n + static_cast<int>(i);
    d.merges.push_back({left, right, raw[i].height, node_id});
    sets.merge(raw[i].slot_a, raw[i].slot_b, node_id);
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Cuts
// ---------------------------------------------------------------------------

int ClusterCut::n_leaves() const {
  int total = 0;
  for (const auto& c : clusters) total += static_cast<int>(c.members.size());
  return total;
}

namespace {

std::string cluster_id_for(const std::vector<int>& members,
                           const std::vector<std::string>* labels) {
  std::vector<std::string> names;
  names.reserve(members.size());
  for (int m : members) {
    names.push_back(labels ? (*labels)[m] : std::to_string(m));
  }
  std::sort(names.begin(), names.end());
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& name : names) {
    h = fnv1a64(name, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

}  // namespace

ClusterCut cut_dendrogram(const Dendrogram& d, double threshold, std::string threshold_id,
                          const std::vector<std::string>* leaf_labels) {
  if (threshold < 0) throw InvalidArgument("threshold must be >= 0");
  if (leaf_labels && static_cast<int>(leaf_labels->size()) != d.n_leaves) {
    throw InvalidArgument("leaf label count does not match dendrogram leaves");
  }

  const int n = d.n_leaves;
  // node -> component root over all 2n-1 node ids
  std::vector<int> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& m : d.merges) {
    if (m.height > threshold) continue;
    parent[find(m.left)] = m.node_id;
    parent[find(m.right)] = m.node_id;
  }

  std::map<int, std::vector<int>> components;
  for (int leaf = 0; leaf < n; ++leaf) {
    components[find(leaf)].push_back(leaf);
  }

  ClusterCut cut;
  cut.threshold = threshold;
  cut.threshold_id = threshold_id.empty() ? threshold_id_for(threshold) : std::move(threshold_id);
  for (auto& [root, members] : components) {
    std::sort(members.begin(), members.end());
    cut.clusters.push_back({cluster_id_for(members, leaf_labels), std::move(members)});
  }
  std::sort(cut.clusters.begin(), cut.clusters.end(),
            [](const Cluster& a, const Cluster& b) { return a.members[0] < b.members[0]; });
  return cut;
}

std::string threshold_id_for(double threshold) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "t%.*g", 12, threshold);
  return buf;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

std::vector<double> silhouette_values(const ClusterCut& cut,
                                      const std::vector<EmbeddingVector>& vectors) {
  const int n = static_cast<int>(vectors.size());
  if (cut.n_leaves() != n) {
    throw InvalidArgument("cut covers " + std::to_string(cut.n_leaves()) + " leaves but " +
                          std::to_string(n) + " vectors were given");
  }
  const int k = static_cast<int>(cut.clusters.size());
  if (k < 2) throw InvalidArgument("silhouette needs at least two clusters");

  std::vector<int> assignment(n, -1);
  for (std::size_t c = 0; c < cut.clusters.size(); ++c) {
    for (int m : cut.clusters[c].members) assignment[m] = static_cast<int>(c);
  }

  std::vector<double> values(n, 0.0);
  std::vector<double> dist_sum(k);
  for (int i = 0; i < n; ++i) {
    int own = assignment[i];
    std::size_t own_size = cut.clusters[own].members.size();
    if (own_size == 1) continue;  // s(i) = 0 by convention
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dist_sum[assignment[j]] += cosine_distance(vectors[i], vectors[j]);
    }
    double a = dist_sum[own] / static_cast<double>(own_size - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, dist_sum[c] / static_cast<double>(cut.clusters[c].members.size()));
    }
    double denom = std::max(a, b);
    values[i] = denom > 0 ? (b - a) / denom : 0.0;
  }
  return values;
}

ClusterStats cluster_stats(const ClusterCut& cut, const std::vector<EmbeddingVector>& vectors) {
  const int n = static_cast<int>(vectors.size());
  if (cut.n_leaves() != n) {
    throw InvalidArgument("cut covers " + std::to_string(cut.n_leaves()) +
                          " leaves but " + std::to_string(n) + " vectors were given");
  }

  ClusterStats stats;
  stats.n_clusters = static_cast<int>(cut.clusters.size());
  double sum = 0.0, sumsq = 0.0;
  for (const auto& c : cut.clusters) {
    double s = static_cast<double>(c.members.size());
    sum += s;
    sumsq += s * s;
    stats.max_size = std::max(stats.max_size, static_cast<int>(c.members.size()));
  }
  stats.mean_size = sum / stats.n_clusters;
  stats.std_size = std::sqrt(std::max(0.0, sumsq / stats.n_clusters - stats.mean_size * stats.mean_size));

  bool all_singletons = stats.max_size <= 1;
  if (stats.n_clusters <= 1 || all_singletons) {
    stats.silhouette = std::nullopt;
    return stats;
  }

  std::vector<double> values = silhouette_values(cut, vectors);
  double total = 0.0;
  for (double s : values) total += s;
  stats.silhouette = total / n;
  return stats;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json dendrogram_to_json(const Dendrogram& d) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : d.merges) {
    merges.push_back({m.left, m.right, m.height, m.node_id});
  }
  return {{"n_leaves", d.n_leaves}, {"merges", merges}};
}

Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram d;
  d.n_leaves = j.at("n_leaves").get<int>();
  for (const auto& m : j.at("merges")) {
    d.merges.push_back({m.at(0).get<int>(), m.at(1).get<int>(), m.at(2).get<double>(),
                        m.at(3).get<int>()});
  }
  d.validate();
  return d;
}

void write_cut_jsonl(const std::filesystem::path& path, const ClusterCut& cut,
                     const std::vector<std::string>& leaf_labels) {
  std::vector<nlohmann::json> lines;
  lines.reserve(cut.clusters.size());
  for (const auto& c : cut.clusters) {
    std::vector<std::string> members;
    members.reserve(c.members.size());
    for (int m : c.members) members.push_back(leaf_labels.at(m));
    lines.push_back({{"cluster_id", c.cluster_id}, {"members", members}});
  }
  write_jsonl(path, lines);
}

std::vector<LabeledCluster> read_cut_jsonl(const std::filesystem::path& path) {
  std::vector<LabeledCluster> out;
  for (const auto& j : read_jsonl(path)) {
    out.push_back({j.at("cluster_id").get<std::string>(),
                   j.at("members").get<std::vector<std::string>>()});
  }
  return out;
}

void to_json(nlohmann::json& j, const ClusterStats& s) {
  j = {{"n_clusters", s.n_clusters}, {"mean_size", s.mean_size},
       {"std_size", s.std_size},     {"max_size", s.max_size},
       {"silhouette", s.silhouette ? nlohmann::json(*s.silhouette) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, ClusterStats& s) {
  j.at("n_clusters").get_to(s.n_clusters);
  j.at("mean_size").get_to(s.mean_size);
  j.at("std_size").get_to(s.std_size);
  j.at("max_size").get_to(s.max_size);
  if (j.at("silhouette").is_null()) {
    s.silhouette = std::nullopt;
  } else {
    s.silhouette = j.at("silhouette").get<double>();
  }
}

}  // namespace icr
