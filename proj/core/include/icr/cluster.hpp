#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Dendrogram
// ---------------------------------------------------------------------------

struct Merge {
  int left = 0;        // child node id, < right
  int right = 0;       // child node id
  double height = 0.0; // average-linkage cosine distance at the merge
  int node_id = 0;     // n_leaves + merge index
};

/// Full agglomerative merge tree. Leaf ids are 0..n_leaves-1, internal ids
/// n_leaves..2*n_leaves-2 in merge order.
struct Dendrogram {
  int n_leaves = 0;
  std::vector<Merge> merges;

  double max_height() const;

  /// Structural checks: exactly n_leaves-1 merges, every node a child at
  /// most once, ids in range. Heights must be non-decreasing; violations
  /// beyond tol indicate corrupted input and raise MonotonicityViolation
  /// rather than being silently reordered.
  void validate(double tol = 1e-12) const;
};

// ---------------------------------------------------------------------------
// Flat cuts
// ---------------------------------------------------------------------------

struct Cluster {
  std::string cluster_id;    // stable: hash of sorted member labels
  std::vector<int> members;  // leaf indices, ascending
};

struct ClusterCut {
  double threshold = 0.0;
  std::string threshold_id;
  std::vector<Cluster> clusters;  // ordered by smallest member

  int n_leaves() const;
};

struct ClusterStats {
  int n_clusters = 0;
  double mean_size = 0.0;
  double std_size = 0.0;  // population form (divide by N)
  int max_size = 0;
  std::optional<double> silhouette;  // None when undefined
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// d = 1 - cos(u, v), clamped into [0, 2] (tiny negative round-off -> 0).
double cosine_distance(const EmbeddingVector& u, const EmbeddingVector& v);

struct DendrogramOptions {
  /// O(n^2) distance storage makes leaf count the memory ceiling; builds
  /// above this limit raise LeafLimitExceeded instead of thrashing.
  int leaf_limit = 50000;
};

/// Average-linkage agglomerative clustering under cosine distance, via the
/// nearest-neighbor chain with the Lance-Williams update
///   D(A+B, C) = (|A| D(A,C) + |B| D(B,C)) / (|A| + |B|).
/// Equal-minimum ties break toward the lexicographically smallest
/// (min node id, max node id) pair.
Dendrogram build_dendrogram(const std::vector<EmbeddingVector>& vectors,
                            const DendrogramOptions& options = {});

/// The partition formed by applying exactly the merges with height <=
/// threshold. leaf_labels (e.g. question ids) feed the stable cluster_id
/// hash; defaults to the decimal leaf index.
ClusterCut cut_dendrogram(const Dendrogram& d, double threshold,
                          std::string threshold_id = "",
                          const std::vector<std::string>* leaf_labels = nullptr);

/// Per-point silhouette under cosine distance:
/// s(i) = (b(i) - a(i)) / max(a(i), b(i)) with a(i) the mean distance to own
/// co-members and b(i) the best other-cluster mean; s(i) = 0 for points in
/// singleton clusters. Requires at least two clusters.
std::vector<double> silhouette_values(const ClusterCut& cut,
                                      const std::vector<EmbeddingVector>& vectors);

/// Size statistics plus the mean silhouette; silhouette is None with a
/// single cluster or an all-singleton cut.
ClusterStats cluster_stats(const ClusterCut& cut,
                           const std::vector<EmbeddingVector>& vectors);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json dendrogram_to_json(const Dendrogram& d);
Dendrogram dendrogram_from_json(const nlohmann::json& j);

struct LabeledCluster {
  std::string cluster_id;
  std::vector<std::string> member_ids;
};

/// Cut file: JSONL, one {"cluster_id", "members"} line per cluster, members
/// as leaf labels (question ids in the pipeline).
void write_cut_jsonl(const std::filesystem::path& path, const ClusterCut& cut,
                     const std::vector<std::string>& leaf_labels);
std::vector<LabeledCluster> read_cut_jsonl(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ClusterStats& s);
void from_json(const nlohmann::json& j, ClusterStats& s);

/// Formats a threshold as its id tag, e.g. 0.325 -> "t0.325".
std::string threshold_id_for(double threshold);

}  // namespace icr
