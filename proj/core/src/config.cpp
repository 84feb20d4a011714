#include "icr/config.hpp"

#include <cstdlib>

#include "icr/errors.hpp"
#include "icr/jsonl.hpp"

namespace icr {

using nlohmann::json;

namespace {

std::string interpolate_string(const std::string& input) {
  std::string out;
  std::size_t pos = 0;
  while (pos < input.size()) {
    auto open = input.find("${", pos);
    if (open == std::string::npos) {
      out += input.substr(pos);
      break;
    }
    auto close = input.find('}', open + 2);
    if (close == std::string::npos) {
      out += input.substr(pos);
      break;
    }
    out += input.substr(pos, open - pos);
    std::string name = input.substr(open + 2, close - open - 2);
    const char* value = std::getenv(name.c_str());
    if (value == nullptr) {
      throw ConfigError("config references unset environment variable ${" + name + "}");
    }
    out += value;
    pos = close + 1;
  }
  return out;
}

}  // namespace

json interpolate_env(json value) {
  if (value.is_string()) {
    std::string s = value.get<std::string>();
    if (s.find("${") != std::string::npos) return interpolate_string(s);
    return value;
  }
  if (value.is_object()) {
    for (auto& [key, item] : value.items()) item = interpolate_env(item);
    return value;
  }
  if (value.is_array()) {
    for (auto& item : value) item = interpolate_env(item);
    return value;
  }
  return value;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  j = interpolate_env(std::move(j));

  PipelineConfig cfg;
  cfg.output_root = j.value("output_root", std::string("out"));
  cfg.rng_seed = j.value("rng_seed", 0ull);
  cfg.k = j.value("k", 5);
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (j.contains("budget")) j.at("budget").get_to(cfg.budget);
  cfg.budget.validate();

  if (!j.contains("tasks") || j.at("tasks").empty()) {
    throw ConfigError("config needs a non-empty tasks map");
  }
  for (const auto& [name, tj] : j.at("tasks").items()) {
    TaskConfig task_cfg;
    task_cfg.corpus = tj.at("corpus").get<std::string>();
    task_cfg.thresholds = tj.value("thresholds", std::vector<double>{});
    cfg.tasks[name] = std::move(task_cfg);
  }

  if (j.contains("embedding_backend")) j.at("embedding_backend").get_to(cfg.embedding_backend);
  if (j.contains("chat_backend")) j.at("chat_backend").get_to(cfg.chat_backend);
  if (j.contains("judge_backend")) j.at("judge_backend").get_to(cfg.judge_backend);
  if (j.contains("models")) j.at("models").get_to(cfg.models);
  cfg.reference_family = j.value("reference_family", std::string("llama3"));
  if (j.contains("ablation_variant")) {
    cfg.ablation_variant = InstructionVariant::parse(j.at("ablation_variant").get<std::string>());
  }
  if (j.contains("representative_mode")) {
    cfg.representative_mode =
        parse_representative_mode(j.at("representative_mode").get<std::string>());
  }
  cfg.judge_repeats = j.value("judge_repeats", 3);
  if (cfg.judge_repeats < 1) throw ConfigError("judge_repeats must be >= 1");
  return cfg;
}

const TaskConfig& PipelineConfig::task_config(const Task& task) const {
  auto it = tasks.find(task.name());
  if (it == tasks.end()) {
    throw ConfigError("task '" + task.name() + "' is not configured");
  }
  return it->second;
}

std::vector<Task> PipelineConfig::all_tasks() const {
  std::vector<Task> out;
  for (const auto& [name, cfg] : tasks) out.push_back(Task::parse(name));
  return out;
}

ModelRegistry PipelineConfig::model_registry() const {
  ModelRegistry registry;
  for (const auto& m : models) registry[m.model_id] = {m.family, m.size_b};
  return registry;
}

}  // namespace icr
