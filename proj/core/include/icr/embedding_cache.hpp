#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>

#include "icr/types.hpp"

namespace icr {

/// Content-addressed on-disk embedding cache.
///
/// Layout under the cache directory:
///   manifest.jsonl          one line per entry:
///                           {"model":..., "text":..., "file":..., "dim":...}
///   vectors/<hex>.vec       binary vector ("ICRV" magic, u32 version,
///                           u32 dim, dim little-endian float64s)
///
/// The key is (model_name, exact text bytes); the file name is the 64-bit
/// FNV-1a of the key, suffixed on collision. The manifest is append-only so
/// corpus builds are resumable.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  std::optional<EmbeddingVector> get(const std::string& model, const std::string& text) const;

  /// No-op when the key is already present. Writes are serialized.
  void put(const std::string& model, const std::string& text, const EmbeddingVector& v);

  bool contains(const std::string& model, const std::string& text) const;
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::string file_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::string> files_;  // key ("model\0text") -> file name
};

void write_vector_file(const std::filesystem::path& path, const EmbeddingVector& v);
EmbeddingVector read_vector_file(const std::filesystem::path& path, const std::string& source_model);

}  // namespace icr
