#include "icr/retrieve.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "icr/errors.hpp"
#include "icr/jsonl.hpp"

namespace icr {

namespace fs = std::filesystem;

std::string to_string(RepresentativeMode mode) {
  return mode == RepresentativeMode::Centroid ? "centroid" : "nearest_member";
}

RepresentativeMode parse_representative_mode(const std::string& name) {
  if (name == "centroid") return RepresentativeMode::Centroid;
  if (name == "nearest_member") return RepresentativeMode::NearestMember;
  throw ConfigError("unknown representative mode '" + name + "'");
}

// ---------------------------------------------------------------------------
// Build
// ---------------------------------------------------------------------------

RetrievalIndex build_index(const std::vector<LabeledCluster>& cut,
                           const std::map<std::string, EmbeddingVector>& embeddings_by_question,
                           const std::string& threshold_id, RepresentativeMode mode) {
  if (cut.empty()) throw InvalidArgument("build_index requires a non-empty cut");

  RetrievalIndex index;
  index.threshold_id = threshold_id;
  index.mode = mode;

  for (const auto& cluster : cut) {
    std::vector<EmbeddingVector> member_vectors;
    member_vectors.reserve(cluster.member_ids.size());
    for (const auto& qid : cluster.member_ids) {
      auto it = embeddings_by_question.find(qid);
      if (it == embeddings_by_question.end()) {
        throw MissingEmbedding("no embedding for question " + qid);
      }
      if (index.dim == 0) index.dim = it->second.dim;
      if (it->second.dim != index.dim) {
        throw DimensionMismatch("embedding for " + qid + " has dim " +
                                std::to_string(it->second.dim) + ", expected " +
                                std::to_string(index.dim));
      }
      member_vectors.push_back(it->second);
    }

    EmbeddingVector centroid;
    centroid.dim = index.dim;
    centroid.source_model = member_vectors.front().source_model;
    centroid.values.assign(index.dim, 0.0);
    for (const auto& v : member_vectors) {
      for (int i = 0; i < index.dim; ++i) centroid.values[i] += v.values[i];
    }
    for (double& x : centroid.values) x /= static_cast<double>(member_vectors.size());
    if (centroid.norm() <= 1e-12) {
      throw DegenerateCentroid("cluster " + cluster.cluster_id +
                               " has a zero mean vector (antipodal members?)");
    }
    index.entries.push_back({cluster.cluster_id, centroid.normalized()});
    if (mode == RepresentativeMode::NearestMember) {
      index.members.push_back(std::move(member_vectors));
    }
  }

  // Sort by cluster id, keeping member blocks aligned.
  std::vector<std::size_t> order(index.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return index.entries[a].cluster_id < index.entries[b].cluster_id;
  });
  RetrievalIndex sorted;
  sorted.threshold_id = index.threshold_id;
  sorted.dim = index.dim;
  sorted.mode = index.mode;
  for (std::size_t i : order) {
    sorted.entries.push_back(std::move(index.entries[i]));
    if (mode == RepresentativeMode::NearestMember) {
      sorted.members.push_back(std::move(index.members[i]));
    }
  }
  return sorted;
}

// ---------------------------------------------------------------------------
// Query
// ---------------------------------------------------------------------------

namespace {

double unit_cosine(const EmbeddingVector& unit_query, const EmbeddingVector& v) {
  double dot = 0.0, nv = 0.0;
  for (int i = 0; i < v.dim; ++i) {
    dot += unit_query.values[i] * v.values[i];
    nv += v.values[i] * v.values[i];
  }
  double sim = dot / std::sqrt(nv);
  return std::clamp(sim, -1.0, 1.0);
}

}  // namespace

std::vector<ScoredCluster> top_k(const RetrievalIndex& index, const EmbeddingVector& query,
                                 int k) {
  if (index.entries.empty()) throw EmptyIndex("retrieval index has no entries");
  if (query.dim != index.dim) {
    throw DimensionMismatch("query dim " + std::to_string(query.dim) + " vs index dim " +
                            std::to_string(index.dim));
  }
  if (k < 1) throw InvalidArgument("k must be >= 1");

  EmbeddingVector unit_query = query.normalized();
  std::vector<ScoredCluster> scored;
  scored.reserve(index.entries.size());
  for (std::size_t e = 0; e < index.entries.size(); ++e) {
    double sim;
    if (index.mode == RepresentativeMode::NearestMember) {
      sim = -1.0;
      for (const auto& member : index.members[e]) {
        sim = std::max(sim, unit_cosine(unit_query, member));
      }
    } else {
      sim = unit_cosine(unit_query, index.entries[e].representative);
    }
    scored.push_back({index.entries[e].cluster_id, sim});
  }

  std::sort(scored.begin(), scored.end(), [](const ScoredCluster& a, const ScoredCluster& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.cluster_id < b.cluster_id;
  });
  scored.resize(std::min<std::size_t>(scored.size(), static_cast<std::size_t>(k)));
  return scored;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kBlockMagic[4] = {'I', 'C', 'R', 'X'};
constexpr std::uint32_t kBlockVersion = 1;

void write_block(std::ofstream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

void write_index(const fs::path& base, const RetrievalIndex& index) {
  fs::path manifest_path = base;
  manifest_path += ".json";
  fs::path block_path = base;
  block_path += ".vec";
  if (base.has_parent_path()) fs::create_directories(base.parent_path());

  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t e = 0; e < index.entries.size(); ++e) {
    nlohmann::json item = {{"cluster_id", index.entries[e].cluster_id}};
    if (index.mode == RepresentativeMode::NearestMember) {
      item["n_members"] = index.members[e].size();
    }
    entries.push_back(item);
  }
  std::string source_model =
      index.entries.empty() ? "" : index.entries.front().representative.source_model;
  nlohmann::json manifest = {{"threshold_id", index.threshold_id},
                             {"dim", index.dim},
                             {"mode", to_string(index.mode)},
                             {"source_model", source_model},
                             {"entries", entries}};
  write_text_file(manifest_path, manifest.dump(2) + "\n");

  std::ofstream out(block_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + block_path.string());
  out.write(kBlockMagic, 4);
  out.write(reinterpret_cast<const char*>(&kBlockVersion), sizeof(kBlockVersion));
  std::uint32_t dim = static_cast<std::uint32_t>(index.dim);
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  for (const auto& entry : index.entries) write_block(out, entry.representative.values);
  if (index.mode == RepresentativeMode::NearestMember) {
    for (const auto& block : index.members) {
      for (const auto& v : block) write_block(out, v.values);
    }
  }
}

RetrievalIndex read_index(const fs::path& base) {
  fs::path manifest_path = base;
  manifest_path += ".json";
  fs::path block_path = base;
  block_path += ".vec";
  if (!fs::exists(manifest_path) || !fs::exists(block_path)) {
    throw MissingArtifact("retrieval index not found at " + base.string());
  }

  nlohmann::json manifest = nlohmann::json::parse(read_text_file(manifest_path));
  RetrievalIndex index;
  index.threshold_id = manifest.at("threshold_id").get<std::string>();
  index.dim = manifest.at("dim").get<int>();
  index.mode = parse_representative_mode(manifest.at("mode").get<std::string>());
  std::string source_model = manifest.value("source_model", std::string());

  std::ifstream in(block_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + block_path.string());
  char magic[4];
  std::uint32_t version = 0, dim = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!in || std::memcmp(magic, kBlockMagic, 4) != 0 || version != kBlockVersion ||
      static_cast<int>(dim) != index.dim) {
    throw IoError("corrupt index block: " + block_path.string());
  }

  auto read_vector = [&]() {
    EmbeddingVector v;
    v.dim = index.dim;
    v.source_model = source_model;
    v.values.resize(index.dim);
    in.read(reinterpret_cast<char*>(v.values.data()),
            static_cast<std::streamsize>(index.dim * sizeof(double)));
    if (!in) throw IoError("truncated index block: " + block_path.string());
    return v;
  };

  for (const auto& item : manifest.at("entries")) {
    index.entries.push_back({item.at("cluster_id").get<std::string>(), read_vector()});
  }
  if (index.mode == RepresentativeMode::NearestMember) {
    for (const auto& item : manifest.at("entries")) {
      std::vector<EmbeddingVector> block;
      std::size_t n = item.at("n_members").get<std::size_t>();
      block.reserve(n);
      for (std::size_t i = 0; i < n; ++i) block.push_back(read_vector());
      index.members.push_back(std::move(block));
    }
  }
  return index;
}

}  // namespace icr
