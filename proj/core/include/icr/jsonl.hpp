#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "icr/errors.hpp"

namespace icr {

/// Reads a JSON Lines file, one json value per non-empty line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Writes values as JSON Lines (one compact object per line, '\n' endings).
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

/// Appends one compact line. Creates parent directories on demand.
void append_jsonl(const std::filesystem::path& path, const nlohmann::json& line);

template <typename T>
std::vector<T> read_jsonl_as(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& j : read_jsonl(path)) out.push_back(j.get<T>());
  return out;
}

template <typename T>
void write_jsonl_as(const std::filesystem::path& path, const std::vector<T>& items) {
  std::vector<nlohmann::json> lines;
  lines.reserve(items.size());
  for (const auto& item : items) lines.emplace_back(item);
  write_jsonl(path, lines);
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace icr
