#include "icr/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "icr/errors.hpp"
#include "icr/jsonl.hpp"

namespace icr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Design
// ---------------------------------------------------------------------------

std::optional<std::size_t> DesignMatrix::column(const std::string& name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    if (column_names[i] == name) return i;
  }
  return std::nullopt;
}

namespace {

bool binary_column_name(const std::string& name) {
  return name == "zero_shot" || name.rfind("audience_", 0) == 0 ||
         name.rfind("length_", 0) == 0 || name.rfind("family_", 0) == 0;
}

}  // namespace

DesignMatrix build_design(const std::vector<EvalRecord>& records, const ModelRegistry& registry,
                          const DesignOptions& options) {
  DesignMatrix design;

  // Family columns come from the families actually present, minus the
  // reference, so no all-zero columns sneak into the fit.
  std::set<std::string> families;
  for (const auto& r : records) {
    auto it = registry.find(r.model_id);
    if (it == registry.end()) {
      throw UnknownModel("model_id '" + r.model_id + "' missing from the registry");
    }
    if (it->second.family != options.reference_family) families.insert(it->second.family);
  }

  design.column_names = {"intercept",     "zero_shot",       "audience_high_school",
                         "audience_graduate", "length_concise", "length_verbose",
                         "log_prompt_tokens", "log_model_size"};
  for (const auto& family : families) design.column_names.push_back("family_" + family);
  for (const auto& [left, right] : options.interactions) {
    design.column_names.push_back(left + ":" + right);
  }
  for (const auto& name : design.column_names) {
    design.is_binary.push_back(binary_column_name(name));
  }

  auto base_index = [&](const std::string& name) -> std::size_t {
    auto idx = design.column(name);
    if (!idx) throw ConfigError("interaction references unknown column '" + name + "'");
    return *idx;
  };

  for (const auto& r : records) {
    if (r.condition.kind == Condition::Kind::KnowledgeOnly ||
        r.condition.kind == Condition::Kind::ReasoningOnly) {
      ++design.skipped_ablation_rows;
      continue;
    }
    const ModelInfo& info = registry.at(r.model_id);
    if (info.size_b <= 0.0) {
      throw ConfigError("model '" + r.model_id + "' needs a positive size_b for log terms");
    }

    std::vector<double> row(design.column_names.size(), 0.0);
    row[0] = 1.0;
    if (r.condition.kind == Condition::Kind::ZeroShot) {
      row[1] = 1.0;
    } else {
      const InstructionVariant& v = r.condition.variant;
      if (v.audience == Audience::HighSchool) row[2] = 1.0;
      if (v.audience == Audience::Graduate) row[3] = 1.0;
      if (v.length == Length::Concise) row[4] = 1.0;
      if (v.length == Length::Verbose) row[5] = 1.0;
    }
    row[6] = std::log(static_cast<double>(std::max(1, r.prompt_tokens)));
    row[7] = std::log(info.size_b);
    if (info.family != options.reference_family) {
      row[*design.column("family_" + info.family)] = 1.0;
    }
    for (std::size_t i = 0; i < options.interactions.size(); ++i) {
      const auto& [left, right] = options.interactions[i];
      std::size_t col = design.column_names.size() - options.interactions.size() + i;
      row[col] = row[base_index(left)] * row[base_index(right)];
    }

    design.rows.push_back(std::move(row));
    design.y.push_back(r.correct ? 1 : 0);
    design.question_ids.push_back(r.question_id);
    design.tasks.push_back(r.task.name());
  }
  return design;
}

// ---------------------------------------------------------------------------
// IRLS
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd clamped_probs(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta,
                              double clamp) {
  Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    p[i] = std::clamp(sigmoid(eta[i]), clamp, 1.0 - clamp);
  }
  return p;
}

double log_likelihood_at(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& beta, double clamp) {
  Eigen::VectorXd p = clamped_probs(X, beta, clamp);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ll += y[i] > 0.5 ? std::log(p[i]) : std::log(1.0 - p[i]);
  }
  return ll;
}

}  // namespace

FitResult fit_logistic(const DesignMatrix& design, const FitOptions& options) {
  const std::size_t n = design.n();
  const std::size_t p = design.p();
  if (n == 0) throw InvalidArgument("fit_logistic needs at least one row");

  int positives = 0;
  for (int yi : design.y) positives += yi;
  if (positives == 0 || positives == static_cast<int>(n)) {
    throw InvalidArgument("fit_logistic needs at least one positive and one negative outcome");
  }

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) X(i, j) = design.rows[i][j];
    y[i] = design.y[i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    throw RankDeficient("design matrix rank " + std::to_string(qr.rank()) + " < " +
                        std::to_string(p) + " columns");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = log_likelihood_at(X, y, beta, options.probability_clamp);

  FitResult result;
  result.column_names = design.column_names;
  Eigen::MatrixXd info(p, p);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.n_iter = iter;
    Eigen::VectorXd probs = clamped_probs(X, beta, options.probability_clamp);
    Eigen::VectorXd grad = X.transpose() * (y - probs);
    if (grad.cwiseAbs().maxCoeff() <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd w = probs.array() * (1.0 - probs.array());
    info = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd delta = info.ldlt().solve(grad);

    // Step-halving keeps the log-likelihood non-decreasing.
    double step = 1.0;
    Eigen::VectorXd candidate = beta + delta;
    double candidate_ll = log_likelihood_at(X, y, candidate, options.probability_clamp);
    int halvings = 0;
    while (candidate_ll < ll && halvings < 50) {
      step *= 0.5;
      candidate = beta + step * delta;
      candidate_ll = log_likelihood_at(X, y, candidate, options.probability_clamp);
      ++halvings;
    }
    beta = candidate;
    ll = std::max(ll, candidate_ll);

    if (beta.cwiseAbs().maxCoeff() > options.separation_beta_limit) {
      throw SeparationDetected("coefficients diverging (max |beta| > " +
                               std::to_string(options.separation_beta_limit) +
                               "); data may be perfectly separated");
    }
  }

  // Observed information at the optimum (equals expected for the canonical
  // logit link).
  Eigen::VectorXd probs = clamped_probs(X, beta, options.probability_clamp);
  Eigen::VectorXd w = probs.array() * (1.0 - probs.array());
  info = X.transpose() * w.asDiagonal() * X;
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  result.beta.assign(beta.data(), beta.data() + p);
  result.std_err.resize(p);
  for (std::size_t j = 0; j < p; ++j) result.std_err[j] = std::sqrt(std::max(0.0, cov(j, j)));
  result.log_likelihood = log_likelihood_at(X, y, beta, options.probability_clamp);
  return result;
}

// ---------------------------------------------------------------------------
// Marginal effects
// ---------------------------------------------------------------------------

std::map<std::string, double> marginal_effects(const FitResult& fit,
                                               const DesignMatrix& design) {
  if (!fit.converged) throw InvalidArgument("marginal_effects requires a converged fit");
  if (fit.beta.size() != design.p()) {
    throw InvalidArgument("fit and design disagree on the number of columns");
  }

  const std::size_t n = design.n();
  std::map<std::string, double> effects;
  for (std::size_t j = 0; j < design.p(); ++j) {
    if (design.column_names[j] == "intercept") continue;
    double total = 0.0;
    if (design.is_binary[j]) {
      for (std::size_t i = 0; i < n; ++i) {
        double eta_without = 0.0;
        for (std::size_t c = 0; c < design.p(); ++c) {
          if (c != j) eta_without += design.rows[i][c] * fit.beta[c];
        }
        total += sigmoid(eta_without + fit.beta[j]) - sigmoid(eta_without);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double eta = 0.0;
        for (std::size_t c = 0; c < design.p(); ++c) eta += design.rows[i][c] * fit.beta[c];
        double pi = sigmoid(eta);
        total += fit.beta[j] * pi * (1.0 - pi);
      }
    }
    effects[design.column_names[j]] = 100.0 * total / static_cast<double>(n);
  }
  return effects;
}

nlohmann::json fit_summary_json(const FitResult& fit) {
  nlohmann::json coefficients = nlohmann::json::array();
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    coefficients.push_back({{"name", fit.column_names[j]},
                            {"beta", fit.beta[j]},
                            {"std_err", fit.std_err[j]}});
  }
  nlohmann::json effects = nlohmann::json::object();
  for (const auto& [name, pp] : fit.marginal_effects) effects[name] = pp;
  return {{"converged", fit.converged},
          {"n_iter", fit.n_iter},
          {"log_likelihood", fit.log_likelihood},
          {"coefficients", coefficients},
          {"marginal_effects_pp", effects}};
}

std::string fit_summary_text(const FitResult& fit) {
  std::ostringstream out;
  char line[160];
  out << (fit.converged ? "converged" : "NOT converged") << " after " << fit.n_iter
      << " iterations, log-likelihood " << fit.log_likelihood << "\n\n";
  std::snprintf(line, sizeof(line), "%-36s %12s %12s %12s\n", "predictor", "beta", "std.err",
                "AME (pp)");
  out << line;
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    const std::string& name = fit.column_names[j];
    auto it = fit.marginal_effects.find(name);
    if (it != fit.marginal_effects.end()) {
      std::snprintf(line, sizeof(line), "%-36s %12.4f %12.4f %12.2f\n", name.c_str(),
                    fit.beta[j], fit.std_err[j], it->second);
    } else {
      std::snprintf(line, sizeof(line), "%-36s %12.4f %12.4f %12s\n", name.c_str(),
                    fit.beta[j], fit.std_err[j], "");
    }
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Long-format export
// ---------------------------------------------------------------------------

void export_long(const std::vector<EvalRecord>& records, const ModelRegistry& registry,
                 const fs::path& path, const DesignOptions& options) {
  DesignMatrix design = build_design(records, registry, options);

  std::ostringstream out;
  out << "question_id,task,y";
  for (std::size_t j = 1; j < design.p(); ++j) out << ',' << design.column_names[j];
  out << '\n';
  char number[64];
  for (std::size_t i = 0; i < design.n(); ++i) {
    out << design.question_ids[i] << ',' << design.tasks[i] << ',' << design.y[i];
    for (std::size_t j = 1; j < design.p(); ++j) {
      std::snprintf(number, sizeof(number), "%.17g", design.rows[i][j]);
      out << ',' << number;
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

DesignMatrix import_long(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return fields;
  };

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty export file: " + path.string());
  auto header = split(line);
  if (header.size() < 3 || header[0] != "question_id" || header[1] != "task" ||
      header[2] != "y") {
    throw IoError("unexpected export header in " + path.string());
  }

  DesignMatrix design;
  design.column_names.push_back("intercept");
  design.is_binary.push_back(false);
  for (std::size_t j = 3; j < header.size(); ++j) {
    design.column_names.push_back(header[j]);
    design.is_binary.push_back(binary_column_name(header[j]));
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw IoError("ragged row in " + path.string());
    }
    design.question_ids.push_back(fields[0]);
    design.tasks.push_back(fields[1]);
    design.y.push_back(std::stoi(fields[2]));
    std::vector<double> row(design.p(), 0.0);
    row[0] = 1.0;
    for (std::size_t j = 3; j < fields.size(); ++j) row[j - 2] = std::stod(fields[j]);
    design.rows.push_back(std::move(row));
  }
  return design;
}

}  // namespace icr
