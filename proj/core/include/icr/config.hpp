#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icr/analyze.hpp"
#include "icr/backends.hpp"
#include "icr/evalharness.hpp"
#include "icr/infer.hpp"
#include "icr/retrieve.hpp"
#include "icr/types.hpp"

namespace icr {

struct TaskConfig {
  std::filesystem::path corpus;     // source JSONL (train + test rows)
  std::vector<double> thresholds;   // cluster cut thresholds
};

/// Declarative pipeline configuration, loaded from JSON. String values may
/// reference environment variables as ${NAME}; secrets stay out of the file
/// (API keys are always env-var indirected via api_key_env_var).
struct PipelineConfig {
  std::filesystem::path output_root = "out";
  std::uint64_t rng_seed = 0;
  int k = 5;
  PromptBudget budget;
  std::map<std::string, TaskConfig> tasks;  // keyed by task name
  BackendConfig embedding_backend;
  BackendConfig chat_backend;   // instruction generator
  BackendConfig judge_backend;
  std::vector<ModelSpec> models;  // evaluation models
  std::string reference_family = "llama3";
  InstructionVariant ablation_variant = InstructionVariant::high_school_concise();
  RepresentativeMode representative_mode = RepresentativeMode::Centroid;
  int judge_repeats = 3;

  static PipelineConfig load(const std::filesystem::path& path);

  WorkspaceLayout layout() const { return {output_root}; }
  const TaskConfig& task_config(const Task& task) const;
  std::vector<Task> all_tasks() const;
  ModelRegistry model_registry() const;
};

/// Replaces ${NAME} in every string of the JSON tree with the value of the
/// environment variable NAME; an unset variable is a ConfigError.
nlohmann::json interpolate_env(nlohmann::json value);

}  // namespace icr
