#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icr/backends.hpp"
#include "icr/cluster.hpp"
#include "icr/infer.hpp"
#include "icr/instructgen.hpp"
#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Workspace layout
// ---------------------------------------------------------------------------

/// Canonical artifact paths under one output root. Every stage reads its
/// inputs and writes its outputs through this layout, which is what makes
/// re-runs resumable.
struct WorkspaceLayout {
  std::filesystem::path root;

  std::filesystem::path corpus_file(const Task& task, Split split) const;
  std::filesystem::path dendrogram_file(const Task& task) const;
  std::filesystem::path cut_file(const Task& task, const std::string& threshold_id) const;
  std::filesystem::path stats_file(const Task& task, const std::string& threshold_id) const;
  std::filesystem::path index_base(const Task& task, const std::string& threshold_id) const;
  std::filesystem::path instructions_root(const Task& task) const;
  std::filesystem::path embedding_cache_dir() const;
  std::filesystem::path results_file(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

struct ModelSpec {
  std::string model_id;
  std::string family;   // used by the regression design; may be empty
  double size_b = 0.0;  // parameter count in billions; 0 = unknown
  BackendConfig backend;
};

void to_json(nlohmann::json& j, const ModelSpec& m);
void from_json(const nlohmann::json& j, ModelSpec& m);

struct ExperimentPlan {
  std::vector<Task> tasks;
  std::vector<ModelSpec> models;
  std::vector<Condition> conditions;
  std::vector<std::string> threshold_ids;
  int k = 5;
  PromptBudget budget;
  BackendConfig embedding_backend;
  std::uint64_t rng_seed = 0;
  std::string output = "results.jsonl";  // under layout results dir
  /// Instruction store variant used by the two ablation conditions.
  InstructionVariant ablation_variant = InstructionVariant::high_school_concise();

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentPlan& p);
void from_json(const nlohmann::json& j, ExperimentPlan& p);

ExperimentPlan load_plan(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Grid execution
// ---------------------------------------------------------------------------

struct RunStats {
  std::filesystem::path results_path;
  int cells_total = 0;
  int cells_skipped = 0;  // already present in the results store
  int cells_run = 0;
};

/// Runs every (question, model, condition, threshold) cell of the plan over
/// the test split; zero-shot cells carry an empty threshold_id and run once
/// per (question, model). Existing rows are skipped, new rows appended in
/// deterministic order. Throws MissingArtifact naming any absent store or
/// index before any model call is made.
RunStats run_plan(const ExperimentPlan& plan, const WorkspaceLayout& layout,
                  bool dry_run = false);

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct AccuracyRow {
  Task task;
  std::string model_id;
  Condition condition;
  std::string threshold_id;
  int n = 0;
  double accuracy = 0.0;  // exact count ratio, unrounded
  std::optional<double> delta_vs_zeroshot;
};

struct AccuracyTable {
  std::vector<AccuracyRow> rows;
};

/// Exact-count accuracy per (task, model, condition, threshold); deltas
/// computed against the same (task, model) zero-shot cell from unrounded
/// accuracies.
AccuracyTable aggregate(const std::vector<EvalRecord>& records);

/// Display forms: accuracy rounded to two decimals, deltas signed the same
/// way — so a displayed 0.83 vs 0.73 can legitimately show +0.09.
std::string format_accuracy(double accuracy);
std::string format_delta(double delta);

std::string accuracy_table_csv(const AccuracyTable& table);   // unrounded values
std::string accuracy_table_text(const AccuracyTable& table);  // aligned, rounded

// ---------------------------------------------------------------------------
// Threshold sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string threshold_id;
  double mean_cluster_size = 0.0;
  std::map<std::string, double> accuracy_by_model;
};

struct SweepTable {
  std::vector<std::string> model_ids;
  std::vector<SweepRow> rows;
};

/// Runs the plan (restricted to one task) per threshold under `condition`
/// and reports mean cluster size next to per-model accuracy.
SweepTable threshold_sweep(const ExperimentPlan& plan, const WorkspaceLayout& layout,
                           const Condition& condition);

std::string sweep_table_csv(const SweepTable& table);

// ---------------------------------------------------------------------------
// Instruction length profile
// ---------------------------------------------------------------------------

struct LengthProfileInput {
  Task task;
  InstructionVariant variant;
  std::vector<Instruction> instructions;
};

struct LengthSummary {
  Task task;
  InstructionVariant variant;
  int count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

/// Token-length summaries per (task, variant) under the given tokenizer;
/// empty buckets are omitted. Quantiles use linear interpolation.
std::vector<LengthSummary> length_profile(const std::vector<LengthProfileInput>& stores,
                                          const std::string& tokenizer_id);

std::string length_profile_csv(const std::vector<LengthSummary>& summaries);

}  // namespace icr
