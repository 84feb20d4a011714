#include "icr/embedding_cache.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "icr/errors.hpp"
#include "icr/hash.hpp"
#include "icr/jsonl.hpp"

namespace icr {

namespace fs = std::filesystem;

namespace {
constexpr char kMagic[4] = {'I', 'C', 'R', 'V'};
constexpr std::uint32_t kVersion = 1;

std::string cache_key(const std::string& model, const std::string& text) {
  std::string key;
  key.reserve(model.size() + 1 + text.size());
  key += model;
  key += '\0';
  key += text;
  return key;
}
}  // namespace

void write_vector_file(const fs::path& path, const EmbeddingVector& v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  std::uint32_t version = kVersion;
  std::uint32_t dim = static_cast<std::uint32_t>(v.dim);
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(v.values.data()),
            static_cast<std::streamsize>(v.values.size() * sizeof(double)));
}

EmbeddingVector read_vector_file(const fs::path& path, const std::string& source_model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0, dim = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  if (!in || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
    throw IoError("not a vector file: " + path.string());
  }
  EmbeddingVector v;
  v.dim = static_cast<int>(dim);
  v.source_model = source_model;
  v.values.resize(dim);
  in.read(reinterpret_cast<char*>(v.values.data()),
          static_cast<std::streamsize>(dim * sizeof(double)));
  if (!in) throw IoError("truncated vector file: " + path.string());
  return v;
}

EmbeddingCache::EmbeddingCache(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "vectors");
  fs::path manifest = dir_ / "manifest.jsonl";
  if (!fs::exists(manifest)) return;
  for (const auto& j : read_jsonl(manifest)) {
    files_[cache_key(j.at("model").get<std::string>(), j.at("text").get<std::string>())] =
        j.at("file").get<std::string>();
  }
}

std::optional<EmbeddingVector> EmbeddingCache::get(const std::string& model,
                                                   const std::string& text) const {
  std::string file;
  {
    std::shared_lock lock(mu_);
    auto it = files_.find(cache_key(model, text));
    if (it == files_.end()) return std::nullopt;
    file = it->second;
  }
  return read_vector_file(dir_ / "vectors" / file, model);
}

bool EmbeddingCache::contains(const std::string& model, const std::string& text) const {
  std::shared_lock lock(mu_);
  return files_.count(cache_key(model, text)) > 0;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mu_);
  return files_.size();
}

std::string EmbeddingCache::file_for(const std::string& key) const {
  std::string base = hex64(fnv1a64(key));
  std::string name = base + ".vec";
  int suffix = 0;
  while (fs::exists(dir_ / "vectors" / name)) {
    name = base + "-" + std::to_string(++suffix) + ".vec";
  }
  return name;
}

void EmbeddingCache::put(const std::string& model, const std::string& text,
                         const EmbeddingVector& v) {
  std::string key = cache_key(model, text);
  std::unique_lock lock(mu_);
  if (files_.count(key)) return;
  std::string file = file_for(key);
  write_vector_file(dir_ / "vectors" / file, v);
  nlohmann::json line = {{"model", model}, {"text", text}, {"file", file}, {"dim", v.dim}};
  append_jsonl(dir_ / "manifest.jsonl", line);
  files_[key] = file;
}

}  // namespace icr
