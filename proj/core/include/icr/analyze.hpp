#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Design matrix
// ---------------------------------------------------------------------------

struct ModelInfo {
  std::string family;
  double size_b = 0.0;  // parameter count in billions
};

/// model_id -> (family, size).
using ModelRegistry = std::map<std::string, ModelInfo>;

struct DesignOptions {
  std::string reference_family = "llama3";
  /// Interaction columns as (left, right) base-column name pairs. The
  /// default crosses model size with the two length indicators.
  std::vector<std::pair<std::string, std::string>> interactions = {
      {"log_model_size", "length_concise"},
      {"log_model_size", "length_verbose"},
  };
};

/// Row-major design with named columns; intercept first. Binary columns are
/// declared (not sniffed) so marginal effects pick the right formula.
struct DesignMatrix {
  std::vector<std::string> column_names;
  std::vector<bool> is_binary;
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  std::vector<std::string> question_ids;  // grouping keys for external tools
  std::vector<std::string> tasks;
  int skipped_ablation_rows = 0;

  std::size_t n() const { return rows.size(); }
  std::size_t p() const { return column_names.size(); }
  std::optional<std::size_t> column(const std::string& name) const;
};

/// Encodes records at the question-model-condition level: zero-shot
/// indicator, audience/length indicators (baseline variant as reference),
/// log prompt tokens, log model size, family indicators against the
/// reference family, plus the configured interactions. Ablation-condition
/// records are outside this design and counted in skipped_ablation_rows.
/// Throws UnknownModel for ids missing from the registry.
DesignMatrix build_design(const std::vector<EvalRecord>& records, const ModelRegistry& registry,
                          const DesignOptions& options = {});

// ---------------------------------------------------------------------------
// Logistic regression (maximum likelihood via IRLS)
// ---------------------------------------------------------------------------

struct FitResult {
  std::vector<double> beta;
  std::vector<double> std_err;  // from the inverse observed information
  bool converged = false;
  int n_iter = 0;
  double log_likelihood = 0.0;
  std::vector<std::string> column_names;
  std::map<std::string, double> marginal_effects;  // percentage points; see below
};

struct FitOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  double probability_clamp = 1e-12;
  double separation_beta_limit = 1e2;
};

/// beta <- beta + (X^T W X)^{-1} X^T (y - p) with W = diag(p(1-p)), with
/// step-halving whenever a full step would lower the log-likelihood.
/// Requires at least one positive and one negative outcome and a full-rank
/// design; diverging coefficients raise SeparationDetected.
FitResult fit_logistic(const DesignMatrix& design, const FitOptions& options = {});

/// Average marginal effects in percentage points. Binary predictors use the
/// discrete difference mean_i [sigmoid(x_i b | j:=1) - sigmoid(x_i b | j:=0)];
/// continuous predictors use mean_i beta_j p_i (1 - p_i). The intercept is
/// skipped.
std::map<std::string, double> marginal_effects(const FitResult& fit,
                                               const DesignMatrix& design);

nlohmann::json fit_summary_json(const FitResult& fit);
std::string fit_summary_text(const FitResult& fit);

// ---------------------------------------------------------------------------
// Long-format export for external mixed-model tooling
// ---------------------------------------------------------------------------

/// CSV schema: question_id, task, y, then every non-intercept design column
/// in order. Values are written with enough precision that import_long
/// reproduces build_design output exactly.
void export_long(const std::vector<EvalRecord>& records, const ModelRegistry& registry,
                 const std::filesystem::path& path, const DesignOptions& options = {});

DesignMatrix import_long(const std::filesystem::path& path);

}  // namespace icr
