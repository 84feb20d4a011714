#include "icr/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include "icr/concurrency.hpp"
#include "icr/errors.hpp"
#include "icr/jsonl.hpp"

namespace icr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

fs::path WorkspaceLayout::corpus_file(const Task& task, Split split) const {
  return root / "corpus" / (task.name() + "." + to_string(split) + ".jsonl");
}
fs::path WorkspaceLayout::dendrogram_file(const Task& task) const {
  return root / "dendrograms" / (task.name() + ".json");
}
fs::path WorkspaceLayout::cut_file(const Task& task, const std::string& threshold_id) const {
  return root / "cuts" / task.name() / (threshold_id + ".jsonl");
}
fs::path WorkspaceLayout::stats_file(const Task& task, const std::string& threshold_id) const {
  return root / "cuts" / task.name() / (threshold_id + ".stats.json");
}
fs::path WorkspaceLayout::index_base(const Task& task, const std::string& threshold_id) const {
  return root / "index" / task.name() / threshold_id;
}
fs::path WorkspaceLayout::instructions_root(const Task& task) const {
  return root / "instructions" / task.name();
}
fs::path WorkspaceLayout::embedding_cache_dir() const { return root / "cache" / "embeddings"; }
fs::path WorkspaceLayout::results_file(const std::string& name) const {
  return root / "results" / name;
}

// ---------------------------------------------------------------------------
// Plan serialization
// ---------------------------------------------------------------------------

void to_json(json& j, const ModelSpec& m) {
  j = {{"model_id", m.model_id},
       {"family", m.family},
       {"size_b", m.size_b},
       {"backend", m.backend}};
}

void from_json(const json& j, ModelSpec& m) {
  j.at("model_id").get_to(m.model_id);
  m.family = j.value("family", std::string());
  m.size_b = j.value("size_b", 0.0);
  j.at("backend").get_to(m.backend);
}

void ExperimentPlan::validate() const {
  if (tasks.empty()) throw ConfigError("plan has no tasks");
  if (models.empty()) throw ConfigError("plan has no models");
  if (conditions.empty()) throw ConfigError("plan has no conditions");
  if (k < 1) throw ConfigError("plan k must be >= 1");
  budget.validate();
  bool retrieves = false;
  for (const auto& c : conditions) retrieves |= c.retrieves();
  if (retrieves && threshold_ids.empty()) {
    throw ConfigError("plan has retrieving conditions but no threshold_ids");
  }
}

void to_json(json& j, const ExperimentPlan& p) {
  std::vector<std::string> tasks, conditions;
  for (const auto& t : p.tasks) tasks.push_back(t.name());
  for (const auto& c : p.conditions) conditions.push_back(c.name());
  j = {{"tasks", tasks},
       {"models", p.models},
       {"conditions", conditions},
       {"threshold_ids", p.threshold_ids},
       {"k", p.k},
       {"budget", p.budget},
       {"embedding_backend", p.embedding_backend},
       {"rng_seed", p.rng_seed},
       {"output", p.output},
       {"ablation_variant", p.ablation_variant.name()}};
}

void from_json(const json& j, ExperimentPlan& p) {
  for (const auto& name : j.at("tasks")) p.tasks.push_back(Task::parse(name.get<std::string>()));
  j.at("models").get_to(p.models);
  for (const auto& name : j.at("conditions")) {
    p.conditions.push_back(Condition::parse(name.get<std::string>()));
  }
  p.threshold_ids = j.value("threshold_ids", std::vector<std::string>{});
  p.k = j.value("k", 5);
  if (j.contains("budget")) j.at("budget").get_to(p.budget);
  j.at("embedding_backend").get_to(p.embedding_backend);
  p.rng_seed = j.value("rng_seed", 0ull);
  p.output = j.value("output", std::string("results.jsonl"));
  if (j.contains("ablation_variant")) {
    p.ablation_variant = InstructionVariant::parse(j.at("ablation_variant").get<std::string>());
  }
}

ExperimentPlan load_plan(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifact("plan file not found: " + path.string());
  ExperimentPlan plan = json::parse(read_text_file(path)).get<ExperimentPlan>();
  plan.validate();
  return plan;
}

// ---------------------------------------------------------------------------
// run_plan
// ---------------------------------------------------------------------------

namespace {

std::string cell_key(const std::string& question_id, const std::string& model_id,
                     const std::string& condition, const std::string& threshold_id) {
  return question_id + "\x1f" + model_id + "\x1f" + condition + "\x1f" + threshold_id;
}

InstructionVariant store_variant_for(const Condition& condition,
                                     const InstructionVariant& ablation_variant) {
  if (condition.kind == Condition::Kind::Instructed) return condition.variant;
  return ablation_variant;
}

struct TaskArtifacts {
  std::vector<Question> test_questions;
  // by threshold_id
  std::map<std::string, RetrievalIndex> indexes;
  // by (threshold_id, variant name)
  std::map<std::pair<std::string, std::string>, std::map<std::string, Instruction>> stores;
};

}  // namespace

RunStats run_plan(const ExperimentPlan& plan, const WorkspaceLayout& layout, bool dry_run) {
  plan.validate();

  RunStats stats;
  stats.results_path = layout.results_file(plan.output);

  // Which (threshold, variant) stores the conditions demand.
  std::set<std::pair<std::string, std::string>> needed_stores;
  bool any_retrieving = false;
  for (const auto& condition : plan.conditions) {
    if (!condition.retrieves()) continue;
    any_retrieving = true;
    for (const auto& threshold_id : plan.threshold_ids) {
      needed_stores.emplace(threshold_id,
                            store_variant_for(condition, plan.ablation_variant).name());
    }
  }

  // Load artifacts up front so a missing one fails before any model call.
  std::map<std::string, TaskArtifacts> artifacts;
  for (const auto& task : plan.tasks) {
    TaskArtifacts art;
    fs::path corpus = layout.corpus_file(task, Split::Test);
    if (!fs::exists(corpus)) {
      throw MissingArtifact("test corpus not found: " + corpus.string());
    }
    art.test_questions = read_jsonl_as<Question>(corpus);

    if (any_retrieving) {
      InstructionStore store(layout.instructions_root(task));
      for (const auto& threshold_id : plan.threshold_ids) {
        fs::path index_manifest = layout.index_base(task, threshold_id);
        index_manifest += ".json";
        if (!fs::exists(index_manifest)) {
          throw MissingArtifact("retrieval index not found: " + index_manifest.string());
        }
        art.indexes[threshold_id] = read_index(layout.index_base(task, threshold_id));
      }
      for (const auto& [threshold_id, variant_name] : needed_stores) {
        InstructionVariant variant = InstructionVariant::parse(variant_name);
        if (!store.exists(threshold_id, variant)) {
          throw MissingArtifact("instruction store not found: " +
                                store.file_path(threshold_id, variant).string());
        }
        art.stores[{threshold_id, variant_name}] =
            store.load(threshold_id, variant).instructions;
      }
    }
    artifacts.emplace(task.name(), std::move(art));
  }

  // Resumability: existing rows are final.
  std::set<std::string> done;
  if (fs::exists(stats.results_path)) {
    for (const auto& r : read_jsonl_as<EvalRecord>(stats.results_path)) {
      done.insert(cell_key(r.question_id, r.model_id, r.condition.name(), r.threshold_id));
    }
  }

  std::shared_ptr<EmbeddingCache> cache;
  std::unique_ptr<EmbeddingClient> embedder;
  if (any_retrieving && !dry_run) {
    cache = std::make_shared<EmbeddingCache>(layout.embedding_cache_dir());
    embedder = std::make_unique<EmbeddingClient>(make_embedding_transport(plan.embedding_backend),
                                                 plan.embedding_backend, cache);
  }

  for (const auto& task : plan.tasks) {
    TaskArtifacts& art = artifacts.at(task.name());
    for (const auto& model : plan.models) {
      std::unique_ptr<ChatClient> chat;
      if (!dry_run) {
        BackendConfig backend = model.backend;
        if (backend.model_name.empty()) backend.model_name = model.model_id;
        chat = std::make_unique<ChatClient>(make_chat_transport(backend), backend);
      }
      for (const auto& condition : plan.conditions) {
        std::vector<std::string> thresholds =
            condition.retrieves() ? plan.threshold_ids : std::vector<std::string>{""};
        for (const auto& threshold_id : thresholds) {
          InferenceContext ctx;
          ctx.k = plan.k;
          if (condition.retrieves()) {
            ctx.index = &art.indexes.at(threshold_id);
            ctx.instructions = &art.stores.at(
                {threshold_id, store_variant_for(condition, plan.ablation_variant).name()});
            ctx.threshold_id = threshold_id;
          }

          std::vector<const Question*> pending;
          for (const auto& q : art.test_questions) {
            ++stats.cells_total;
            if (done.count(cell_key(q.id, model.model_id, condition.name(), threshold_id))) {
              ++stats.cells_skipped;
            } else {
              pending.push_back(&q);
            }
          }
          if (dry_run) {
            std::cerr << "[dry-run] " << task.name() << " x " << model.model_id << " x "
                      << condition.name()
                      << (threshold_id.empty() ? "" : " x " + threshold_id) << ": "
                      << pending.size() << " cells to run\n";
            continue;
          }
          if (pending.empty()) continue;

          // Parallel within the batch, appended in question order so runs
          // with equal seeds are byte-identical.
          std::vector<EvalRecord> batch(pending.size());
          parallel_for(pending.size(), model.backend.max_concurrency, [&](std::size_t i) {
            EvalRecord r = run_inference(*pending[i], condition, ctx, plan.budget, *chat,
                                         embedder.get());
            r.model_id = model.model_id;
            batch[i] = std::move(r);
          });
          for (const auto& r : batch) {
            append_jsonl(stats.results_path, json(r));
            done.insert(cell_key(r.question_id, r.model_id, r.condition.name(), r.threshold_id));
          }
          stats.cells_run += static_cast<int>(batch.size());
          std::cerr << "[run] " << task.name() << " x " << model.model_id << " x "
                    << condition.name()
                    << (threshold_id.empty() ? "" : " x " + threshold_id) << ": "
                    << batch.size() << " records\n";
        }
      }
    }
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

AccuracyTable aggregate(const std::vector<EvalRecord>& records) {
  struct CellCount {
    int n = 0;
    int correct = 0;
  };
  std::map<std::tuple<std::string, std::string, std::string, std::string>, CellCount> cells;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, Task> cell_task;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, Condition> cell_cond;

  for (const auto& r : records) {
    auto key = std::make_tuple(r.task.name(), r.model_id, r.condition.name(), r.threshold_id);
    auto& cell = cells[key];
    ++cell.n;
    if (r.correct) ++cell.correct;
    cell_task.emplace(key, r.task);
    cell_cond.emplace(key, r.condition);
  }

  // Zero-shot baselines per (task, model).
  std::map<std::pair<std::string, std::string>, double> zeroshot;
  for (const auto& [key, cell] : cells) {
    const auto& [task, model, condition, threshold] = key;
    if (condition == Condition::zero_shot().name()) {
      zeroshot[{task, model}] = static_cast<double>(cell.correct) / cell.n;
    }
  }

  AccuracyTable table;
  for (const auto& [key, cell] : cells) {
    const auto& [task, model, condition, threshold] = key;
    AccuracyRow row;
    row.task = cell_task.at(key);
    row.model_id = model;
    row.condition = cell_cond.at(key);
    row.threshold_id = threshold;
    row.n = cell.n;
    row.accuracy = static_cast<double>(cell.correct) / cell.n;
    if (condition != Condition::zero_shot().name()) {
      auto it = zeroshot.find({task, model});
      if (it != zeroshot.end()) row.delta_vs_zeroshot = row.accuracy - it->second;
    }
    table.rows.push_back(std::move(row));
  }
  // std::map iteration already yields (task, model, condition, threshold) order.
  return table;
}

std::string format_accuracy(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", accuracy);
  return buf;
}

std::string format_delta(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", delta);
  // avoid "-0.00"
  if (std::string(buf) == "-0.00") return "+0.00";
  return buf;
}

std::string accuracy_table_csv(const AccuracyTable& table) {
  std::ostringstream out;
  out << "task,model_id,condition,threshold_id,n,accuracy,delta_vs_zeroshot\n";
  out.precision(17);
  for (const auto& row : table.rows) {
    out << row.task.name() << ',' << row.model_id << ',' << row.condition.name() << ','
        << row.threshold_id << ',' << row.n << ',' << row.accuracy << ',';
    if (row.delta_vs_zeroshot) out << *row.delta_vs_zeroshot;
    out << '\n';
  }
  return out.str();
}

std::string accuracy_table_text(const AccuracyTable& table) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %-24s %-28s %-12s %6s %6s %7s\n", "task", "model",
                "condition", "threshold", "n", "acc", "delta");
  out << line;
  for (const auto& row : table.rows) {
    std::snprintf(line, sizeof(line), "%-10s %-24s %-28s %-12s %6d %6s %7s\n",
                  row.task.name().c_str(), row.model_id.c_str(), row.condition.name().c_str(),
                  row.threshold_id.c_str(), row.n, format_accuracy(row.accuracy).c_str(),
                  row.delta_vs_zeroshot ? format_delta(*row.delta_vs_zeroshot).c_str() : "");
    out << line;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Threshold sweep
// ---------------------------------------------------------------------------

SweepTable threshold_sweep(const ExperimentPlan& plan, const WorkspaceLayout& layout,
                           const Condition& condition) {
  if (plan.tasks.size() != 1) {
    throw ConfigError("threshold_sweep expects a plan restricted to one task");
  }
  ExperimentPlan sweep_plan = plan;
  sweep_plan.conditions = {condition};
  run_plan(sweep_plan, layout);

  const Task& task = plan.tasks.front();
  std::vector<EvalRecord> records =
      read_jsonl_as<EvalRecord>(layout.results_file(sweep_plan.output));
  AccuracyTable table = aggregate(records);

  SweepTable out;
  for (const auto& model : plan.models) out.model_ids.push_back(model.model_id);
  for (const auto& threshold_id : plan.threshold_ids) {
    SweepRow row;
    row.threshold_id = threshold_id;
    auto clusters = read_cut_jsonl(layout.cut_file(task, threshold_id));
    std::size_t leaves = 0;
    for (const auto& c : clusters) leaves += c.member_ids.size();
    row.mean_cluster_size = clusters.empty()
                                ? 0.0
                                : static_cast<double>(leaves) / static_cast<double>(clusters.size());
    for (const auto& arow : table.rows) {
      if (arow.threshold_id == threshold_id && arow.condition == condition &&
          arow.task == task) {
        row.accuracy_by_model[arow.model_id] = arow.accuracy;
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string sweep_table_csv(const SweepTable& table) {
  std::ostringstream out;
  out << "threshold_id,mean_cluster_size";
  for (const auto& model : table.model_ids) out << ',' << model;
  out << '\n';
  out.precision(17);
  for (const auto& row : table.rows) {
    out << row.threshold_id << ',' << row.mean_cluster_size;
    for (const auto& model : table.model_ids) {
      out << ',';
      auto it = row.accuracy_by_model.find(model);
      if (it != row.accuracy_by_model.end()) out << it->second;
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Length profile
// ---------------------------------------------------------------------------

namespace {

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted[0];
  double pos = p * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

std::vector<LengthSummary> length_profile(const std::vector<LengthProfileInput>& stores,
                                          const std::string& tokenizer_id) {
  bool any = false;
  for (const auto& s : stores) any |= !s.instructions.empty();
  if (!any) throw InvalidArgument("length_profile requires at least one instruction");

  std::vector<LengthSummary> out;
  for (const auto& store : stores) {
    if (store.instructions.empty()) continue;
    std::vector<double> lengths;
    lengths.reserve(store.instructions.size());
    double sum = 0.0;
    for (const auto& instr : store.instructions) {
      double len = count_tokens(instr.raw, tokenizer_id);
      lengths.push_back(len);
      sum += len;
    }
    std::sort(lengths.begin(), lengths.end());
    LengthSummary s;
    s.task = store.task;
    s.variant = store.variant;
    s.count = static_cast<int>(lengths.size());
    s.mean = sum / static_cast<double>(lengths.size());
    s.median = quantile(lengths, 0.5);
    s.p10 = quantile(lengths, 0.1);
    s.p90 = quantile(lengths, 0.9);
    out.push_back(s);
  }
  return out;
}

std::string length_profile_csv(const std::vector<LengthSummary>& summaries) {
  std::ostringstream out;
  out << "task,variant,count,mean,median,p10,p90\n";
  out.precision(17);
  for (const auto& s : summaries) {
    out << s.task.name() << ',' << s.variant.name() << ',' << s.count << ',' << s.mean << ','
        << s.median << ',' << s.p10 << ',' << s.p90 << '\n';
  }
  return out.str();
}

}  // namespace icr
