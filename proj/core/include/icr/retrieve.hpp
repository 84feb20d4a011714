#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icr/cluster.hpp"
#include "icr/types.hpp"

namespace icr {

/// How a cluster is matched against a query. Centroid keeps one renormalized
/// mean vector per cluster; NearestMember scores a cluster by its best
/// member, at the cost of storing every member vector.
enum class RepresentativeMode { Centroid, NearestMember };

std::string to_string(RepresentativeMode mode);
RepresentativeMode parse_representative_mode(const std::string& name);

struct IndexEntry {
  std::string cluster_id;
  EmbeddingVector representative;  // unit norm
};

struct RetrievalIndex {
  std::string threshold_id;
  int dim = 0;
  RepresentativeMode mode = RepresentativeMode::Centroid;
  std::vector<IndexEntry> entries;                     // one per cluster, sorted by cluster_id
  std::vector<std::vector<EmbeddingVector>> members;   // parallel to entries; NearestMember only
};

/// Builds one entry per cluster; the representative is the unit-normalized
/// mean of member embeddings. Throws MissingEmbedding (naming the question
/// id) and DegenerateCentroid (zero mean, e.g. antipodal members).
RetrievalIndex build_index(const std::vector<LabeledCluster>& cut,
                           const std::map<std::string, EmbeddingVector>& embeddings_by_question,
                           const std::string& threshold_id,
                           RepresentativeMode mode = RepresentativeMode::Centroid);

struct ScoredCluster {
  std::string cluster_id;
  double similarity;  // cosine, in [-1, 1]

  bool operator==(const ScoredCluster&) const = default;
};

/// Exhaustive scan: the min(k, |entries|) clusters with the highest cosine
/// similarity, descending, ties broken by ascending cluster_id.
std::vector<ScoredCluster> top_k(const RetrievalIndex& index, const EmbeddingVector& query,
                                 int k);

/// Persists as <base>.json (manifest) plus <base>.vec (packed float64 block).
void write_index(const std::filesystem::path& base, const RetrievalIndex& index);
RetrievalIndex read_index(const std::filesystem::path& base);

}  // namespace icr
