// icr - instruction corpus retrieval pipeline
//
// Subcommands map onto the pipeline stages: ingest -> embed -> cluster ->
// gen -> index -> run -> (aggregate | sweep | judge | lengths | analyze |
// export). Every stage is resumable: re-invocation with unchanged inputs
// does no new backend work.

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icr/analyze.hpp"
#include "icr/backends.hpp"
#include "icr/cluster.hpp"
#include "icr/config.hpp"
#include "icr/errors.hpp"
#include "icr/evalharness.hpp"
#include "icr/infer.hpp"
#include "icr/instructgen.hpp"
#include "icr/judge.hpp"
#include "icr/jsonl.hpp"
#include "icr/retrieve.hpp"
#include "icr/types.hpp"

namespace fs = std::filesystem;
using namespace icr;

namespace {

struct GlobalArgs {
  std::string config_path = "icr.json";
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
};

PipelineConfig load_config(const GlobalArgs& args) {
  PipelineConfig cfg = PipelineConfig::load(args.config_path);
  if (args.seed) cfg.rng_seed = *args.seed;
  return cfg;
}

std::vector<Task> selected_tasks(const PipelineConfig& cfg, const std::string& task_flag) {
  if (task_flag.empty()) return cfg.all_tasks();
  Task task = Task::parse(task_flag);
  cfg.task_config(task);  // throws when unconfigured
  return {task};
}

std::vector<double> selected_thresholds(const PipelineConfig& cfg, const Task& task,
                                        const std::vector<double>& threshold_flags) {
  if (!threshold_flags.empty()) return threshold_flags;
  const auto& thresholds = cfg.task_config(task).thresholds;
  if (thresholds.empty()) {
    throw ConfigError("no thresholds configured for task '" + task.name() + "'");
  }
  return thresholds;
}

std::vector<Question> load_split(const WorkspaceLayout& layout, const Task& task, Split split) {
  fs::path path = layout.corpus_file(task, split);
  if (!fs::exists(path)) {
    throw MissingArtifact("corpus split not found (run `icr ingest` first): " + path.string());
  }
  return read_jsonl_as<Question>(path);
}

EmbeddingClient make_embedder(const PipelineConfig& cfg) {
  auto cache = std::make_shared<EmbeddingCache>(cfg.layout().embedding_cache_dir());
  return EmbeddingClient(make_embedding_transport(cfg.embedding_backend), cfg.embedding_backend,
                         cache);
}

std::map<std::string, EmbeddingVector> embeddings_by_id(EmbeddingClient& embedder,
                                                        const std::vector<Question>& questions) {
  std::vector<std::string> texts;
  texts.reserve(questions.size());
  for (const auto& q : questions) texts.push_back(embedding_text(q));
  auto vectors = embedder.embed_batch(texts);
  std::map<std::string, EmbeddingVector> out;
  for (std::size_t i = 0; i < questions.size(); ++i) out[questions[i].id] = vectors[i];
  return out;
}

// Dendrograms are cached per task alongside the leaf order they were built
// with; a corpus change invalidates the cache file.
Dendrogram load_or_build_dendrogram(const PipelineConfig& cfg, const Task& task,
                                    const std::vector<Question>& train,
                                    const std::vector<std::string>& leaf_ids) {
  fs::path path = cfg.layout().dendrogram_file(task);
  if (fs::exists(path)) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    if (j.value("leaf_ids", std::vector<std::string>{}) != leaf_ids) {
      throw ConfigError("cached dendrogram at " + path.string() +
                        " was built from a different corpus; delete it to rebuild");
    }
    return dendrogram_from_json(j);
  }
  EmbeddingClient embedder = make_embedder(cfg);
  std::vector<std::string> texts;
  for (const auto& q : train) texts.push_back(embedding_text(q));
  auto vectors = embedder.embed_batch(texts);
  std::cerr << "[cluster] building dendrogram for " << task.name() << " over "
            << vectors.size() << " embeddings\n";
  Dendrogram d = build_dendrogram(vectors);
  nlohmann::json j = dendrogram_to_json(d);
  j["leaf_ids"] = leaf_ids;
  write_text_file(path, j.dump() + "\n");
  return d;
}

ExperimentPlan plan_from_config(const PipelineConfig& cfg, const std::vector<Task>& tasks,
                                const std::vector<Condition>& conditions,
                                const std::vector<std::string>& threshold_ids,
                                const std::string& output) {
  ExperimentPlan plan;
  plan.tasks = tasks;
  plan.models = cfg.models;
  plan.conditions = conditions;
  plan.threshold_ids = threshold_ids;
  plan.k = cfg.k;
  plan.budget = cfg.budget;
  plan.embedding_backend = cfg.embedding_backend;
  plan.rng_seed = cfg.rng_seed;
  plan.output = output;
  plan.ablation_variant = cfg.ablation_variant;
  return plan;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int cmd_ingest(const GlobalArgs& args, const std::string& task_flag) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  bool ok = true;
  for (const auto& task : selected_tasks(cfg, task_flag)) {
    fs::path source = cfg.task_config(task).corpus;
    if (!fs::exists(source)) throw MissingArtifact("corpus file not found: " + source.string());
    auto questions = read_jsonl_as<Question>(source);
    ValidationReport report = validate_corpus(questions);
    for (const auto& issue : report.issues) {
      std::cout << "invalid " << task.name() << " " << issue.question_id << ": "
                << issue.message << "\n";
    }
    if (!report.ok()) {
      ok = false;
      continue;
    }
    std::vector<Question> train, test;
    for (const auto& q : questions) {
      (q.split == Split::Train ? train : test).push_back(q);
    }
    if (args.dry_run) {
      std::cout << task.name() << ": " << train.size() << " train / " << test.size()
                << " test questions (dry-run, nothing written)\n";
      continue;
    }
    write_jsonl_as(layout.corpus_file(task, Split::Train), train);
    write_jsonl_as(layout.corpus_file(task, Split::Test), test);
    std::cout << task.name() << ": " << train.size() << " train / " << test.size()
              << " test questions ingested\n";
  }
  return ok ? 0 : 1;
}

int cmd_embed(const GlobalArgs& args, const std::string& task_flag, const std::string& split) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  std::vector<Split> splits;
  if (split == "train") splits = {Split::Train};
  else if (split == "test") splits = {Split::Test};
  else splits = {Split::Train, Split::Test};

  for (const auto& task : selected_tasks(cfg, task_flag)) {
    for (Split s : splits) {
      auto questions = load_split(layout, task, s);
      if (questions.empty()) continue;
      if (args.dry_run) {
        std::cout << task.name() << " " << to_string(s) << ": would embed "
                  << questions.size() << " questions\n";
        continue;
      }
      EmbeddingClient embedder = make_embedder(cfg);
      auto vectors = embeddings_by_id(embedder, questions);
      std::cout << task.name() << " " << to_string(s) << ": " << vectors.size()
                << " embeddings cached (dim " << vectors.begin()->second.dim << ")\n";
    }
  }
  return 0;
}

int cmd_cluster(const GlobalArgs& args, const std::string& task_flag,
                const std::vector<double>& threshold_flags) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  for (const auto& task : selected_tasks(cfg, task_flag)) {
    auto train = load_split(layout, task, Split::Train);
    std::vector<std::string> leaf_ids;
    for (const auto& q : train) leaf_ids.push_back(q.id);

    if (args.dry_run) {
      std::cout << task.name() << ": would cluster " << train.size() << " questions\n";
      continue;
    }
    Dendrogram d = load_or_build_dendrogram(cfg, task, train, leaf_ids);

    EmbeddingClient embedder = make_embedder(cfg);
    auto vectors = embedder.embed_batch([&] {
      std::vector<std::string> texts;
      for (const auto& q : train) texts.push_back(embedding_text(q));
      return texts;
    }());

    for (double threshold : selected_thresholds(cfg, task, threshold_flags)) {
      ClusterCut cut = cut_dendrogram(d, threshold, "", &leaf_ids);
      ClusterStats stats = cluster_stats(cut, vectors);
      write_cut_jsonl(layout.cut_file(task, cut.threshold_id), cut, leaf_ids);
      write_text_file(layout.stats_file(task, cut.threshold_id),
                      nlohmann::json(stats).dump(2) + "\n");
      std::cout << task.name() << " " << cut.threshold_id << ": " << stats.n_clusters
                << " clusters, mean size " << stats.mean_size << ", max " << stats.max_size
                << ", silhouette "
                << (stats.silhouette ? std::to_string(*stats.silhouette) : std::string("n/a"))
                << "\n";
    }
  }
  return 0;
}

int cmd_gen(const GlobalArgs& args, const std::string& task_flag,
            const std::vector<double>& threshold_flags, const std::string& variant_flag) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  std::vector<InstructionVariant> variants;
  if (variant_flag.empty()) {
    variants = InstructionVariant::all();
  } else {
    variants = {InstructionVariant::parse(variant_flag)};
  }

  for (const auto& task : selected_tasks(cfg, task_flag)) {
    auto train = load_split(layout, task, Split::Train);
    std::map<std::string, Question> by_id;
    for (const auto& q : train) by_id[q.id] = q;

    for (double threshold : selected_thresholds(cfg, task, threshold_flags)) {
      std::string threshold_id = threshold_id_for(threshold);
      fs::path cut_path = layout.cut_file(task, threshold_id);
      if (!fs::exists(cut_path)) {
        throw MissingArtifact("cluster cut not found (run `icr cluster` first): " +
                              cut_path.string());
      }
      auto clusters = read_cut_jsonl(cut_path);
      InstructionStore store(layout.instructions_root(task));

      for (const auto& variant : variants) {
        if (args.dry_run) {
          auto existing = store.load(threshold_id, variant);
          std::size_t todo = 0;
          for (const auto& c : clusters) {
            if (!existing.instructions.count(c.cluster_id)) ++todo;
          }
          std::cout << task.name() << " " << threshold_id << " " << variant.name()
                    << ": would generate " << todo << " instructions\n";
          continue;
        }
        ChatClient chat(make_chat_transport(cfg.chat_backend), cfg.chat_backend);
        GenerationOptions options;
        options.rng_seed = cfg.rng_seed;
        GenerationResult result =
            generate_corpus(clusters, by_id, variant, chat, store, threshold_id, options);
        std::cout << task.name() << " " << threshold_id << " " << variant.name() << ": "
                  << result.instructions.size() << " instructions (" << result.skipped
                  << " reused, " << result.failures.size() << " failed, "
                  << result.chat_calls << " calls)\n";
        for (const auto& [cluster_id, message] : result.failures) {
          std::cerr << "warning: cluster " << cluster_id << " failed: " << message << "\n";
        }
      }
    }
  }
  return 0;
}

int cmd_index(const GlobalArgs& args, const std::string& task_flag,
              const std::vector<double>& threshold_flags) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  for (const auto& task : selected_tasks(cfg, task_flag)) {
    auto train = load_split(layout, task, Split::Train);
    for (double threshold : selected_thresholds(cfg, task, threshold_flags)) {
      std::string threshold_id = threshold_id_for(threshold);
      fs::path cut_path = layout.cut_file(task, threshold_id);
      if (!fs::exists(cut_path)) {
        throw MissingArtifact("cluster cut not found (run `icr cluster` first): " +
                              cut_path.string());
      }
      auto clusters = read_cut_jsonl(cut_path);
      if (args.dry_run) {
        std::cout << task.name() << " " << threshold_id << ": would index "
                  << clusters.size() << " clusters\n";
        continue;
      }
      EmbeddingClient embedder = make_embedder(cfg);
      auto embeddings = embeddings_by_id(embedder, train);
      RetrievalIndex index =
          build_index(clusters, embeddings, threshold_id, cfg.representative_mode);
      write_index(layout.index_base(task, threshold_id), index);
      std::cout << task.name() << " " << threshold_id << ": indexed " << index.entries.size()
                << " clusters (dim " << index.dim << ", " << to_string(index.mode) << ")\n";
    }
  }
  return 0;
}

std::vector<Condition> parse_conditions(const std::vector<std::string>& condition_flags) {
  std::vector<Condition> conditions;
  for (const auto& name : condition_flags) conditions.push_back(Condition::parse(name));
  if (conditions.empty()) {
    conditions = {Condition::zero_shot(),
                  Condition::instructed(InstructionVariant::high_school_concise())};
  }
  return conditions;
}

int cmd_run(const GlobalArgs& args, const std::string& plan_path, const std::string& task_flag,
            const std::vector<double>& threshold_flags,
            const std::vector<std::string>& condition_flags, int k_flag,
            const std::string& output) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();

  ExperimentPlan plan;
  if (!plan_path.empty()) {
    plan = load_plan(plan_path);
  } else {
    std::vector<Task> tasks = selected_tasks(cfg, task_flag);
    std::vector<std::string> threshold_ids;
    for (const auto& task : tasks) {
      for (double t : selected_thresholds(cfg, task, threshold_flags)) {
        std::string id = threshold_id_for(t);
        if (std::find(threshold_ids.begin(), threshold_ids.end(), id) == threshold_ids.end()) {
          threshold_ids.push_back(id);
        }
      }
    }
    plan = plan_from_config(cfg, tasks, parse_conditions(condition_flags), threshold_ids,
                            output);
  }
  if (k_flag > 0) plan.k = k_flag;
  if (args.seed) plan.rng_seed = *args.seed;

  RunStats stats = run_plan(plan, layout, args.dry_run);
  if (args.dry_run) {
    std::cout << "dry-run: " << (stats.cells_total - stats.cells_skipped) << " of "
              << stats.cells_total << " cells pending\n";
    return 0;
  }
  std::cout << "results: " << stats.results_path.string() << " (" << stats.cells_run
            << " new, " << stats.cells_skipped << " reused of " << stats.cells_total
            << " cells)\n";

  auto records = read_jsonl_as<EvalRecord>(stats.results_path);
  AccuracyTable table = aggregate(records);
  std::cout << accuracy_table_text(table);
  fs::path csv_path = stats.results_path;
  csv_path.replace_extension(".accuracy.csv");
  write_text_file(csv_path, accuracy_table_csv(table));
  return 0;
}

int cmd_aggregate(const GlobalArgs& args, const std::string& results_name) {
  PipelineConfig cfg = load_config(args);
  fs::path path = cfg.layout().results_file(results_name);
  if (!fs::exists(path)) throw MissingArtifact("results not found: " + path.string());
  AccuracyTable table = aggregate(read_jsonl_as<EvalRecord>(path));
  std::cout << accuracy_table_text(table);
  fs::path csv_path = path;
  csv_path.replace_extension(".accuracy.csv");
  write_text_file(csv_path, accuracy_table_csv(table));
  std::cout << "csv: " << csv_path.string() << "\n";
  return 0;
}

int cmd_sweep(const GlobalArgs& args, const std::string& task_flag,
              const std::vector<double>& threshold_flags,
              const std::string& condition_flag) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  if (task_flag.empty()) throw ConfigError("sweep requires --task");
  Task task = Task::parse(task_flag);

  Condition condition = condition_flag.empty()
                            ? Condition::instructed(InstructionVariant::high_school_concise())
                            : Condition::parse(condition_flag);
  std::vector<std::string> threshold_ids;
  for (double t : selected_thresholds(cfg, task, threshold_flags)) {
    threshold_ids.push_back(threshold_id_for(t));
  }
  ExperimentPlan plan = plan_from_config(cfg, {task}, {condition}, threshold_ids,
                                         "sweep." + task.name() + ".jsonl");
  if (args.dry_run) {
    run_plan(plan, layout, true);
    return 0;
  }
  SweepTable table = threshold_sweep(plan, layout, condition);
  std::string csv = sweep_table_csv(table);
  fs::path out = layout.results_file("sweep." + task.name() + ".csv");
  write_text_file(out, csv);
  std::cout << csv << "sweep table: " << out.string() << "\n";
  return 0;
}

int cmd_judge(const GlobalArgs& args, const std::string& task_flag,
              const std::vector<double>& threshold_flags, const std::string& variant_flag) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();
  std::vector<InstructionVariant> variants;
  if (variant_flag.empty()) {
    variants = InstructionVariant::all();
  } else {
    variants = {InstructionVariant::parse(variant_flag)};
  }

  for (const auto& task : selected_tasks(cfg, task_flag)) {
    InstructionStore store(layout.instructions_root(task));
    for (double threshold : selected_thresholds(cfg, task, threshold_flags)) {
      std::string threshold_id = threshold_id_for(threshold);
      std::vector<JudgedInstruction> all_judged;
      for (const auto& variant : variants) {
        if (!store.exists(threshold_id, variant)) continue;
        auto contents = store.load(threshold_id, variant);
        std::vector<Instruction> instructions;
        for (const auto& [cluster_id, instr] : contents.instructions) {
          instructions.push_back(instr);
        }
        if (instructions.empty()) continue;
        if (args.dry_run) {
          std::cout << task.name() << " " << threshold_id << " " << variant.name()
                    << ": would judge " << instructions.size() << " instructions\n";
          continue;
        }
        ChatClient judge(make_chat_transport(cfg.judge_backend), cfg.judge_backend);
        JudgeCorpusResult result = judge_corpus(instructions, judge, cfg.judge_repeats);
        all_judged.insert(all_judged.end(), result.judged.begin(), result.judged.end());
        for (const auto& [cluster_id, message] : result.failures) {
          std::cerr << "warning: judging " << cluster_id << " failed: " << message << "\n";
        }
      }
      if (args.dry_run || all_judged.empty()) continue;
      fs::path judged_path =
          layout.results_file("judged." + task.name() + "." + threshold_id + ".jsonl");
      write_jsonl_as(judged_path, all_judged);
      JudgeSummary summary = summarize_judged(all_judged);
      std::string csv = judge_summary_csv(summary);
      fs::path summary_path =
          layout.results_file("judged." + task.name() + "." + threshold_id + ".summary.csv");
      write_text_file(summary_path, csv);
      std::cout << csv << "judged: " << judged_path.string() << "\n";
    }
  }
  return 0;
}

int cmd_lengths(const GlobalArgs& args, const std::string& task_flag) {
  PipelineConfig cfg = load_config(args);
  WorkspaceLayout layout = cfg.layout();

  std::vector<LengthProfileInput> inputs;
  for (const auto& task : selected_tasks(cfg, task_flag)) {
    InstructionStore store(layout.instructions_root(task));
    for (const auto& variant : InstructionVariant::all()) {
      LengthProfileInput input{task, variant, {}};
      for (double threshold : cfg.task_config(task).thresholds) {
        std::string threshold_id = threshold_id_for(threshold);
        if (!store.exists(threshold_id, variant)) continue;
        auto contents = store.load(threshold_id, variant);
        for (const auto& [cluster_id, instr] : contents.instructions) {
          input.instructions.push_back(instr);
        }
      }
      inputs.push_back(std::move(input));
    }
  }
  auto summaries = length_profile(inputs, cfg.budget.tokenizer_id);
  std::string csv = length_profile_csv(summaries);
  fs::path out = layout.results_file("instruction_lengths.csv");
  write_text_file(out, csv);
  std::cout << csv << "length profile: " << out.string() << "\n";
  return 0;
}

int cmd_analyze(const GlobalArgs& args, const std::string& results_name) {
  PipelineConfig cfg = load_config(args);
  fs::path path = cfg.layout().results_file(results_name);
  if (!fs::exists(path)) throw MissingArtifact("results not found: " + path.string());

  auto records = read_jsonl_as<EvalRecord>(path);
  DesignOptions options;
  options.reference_family = cfg.reference_family;
  DesignMatrix design = build_design(records, cfg.model_registry(), options);
  if (design.skipped_ablation_rows > 0) {
    std::cerr << "note: " << design.skipped_ablation_rows
              << " ablation-condition records are outside the regression design\n";
  }
  FitResult fit = fit_logistic(design);
  fit.marginal_effects = marginal_effects(fit, design);

  fs::path json_path = path;
  json_path.replace_extension(".fit.json");
  write_text_file(json_path, fit_summary_json(fit).dump(2) + "\n");
  std::cout << fit_summary_text(fit) << "fit: " << json_path.string() << "\n";
  return 0;
}

int cmd_export(const GlobalArgs& args, const std::string& results_name,
               const std::string& out_flag) {
  PipelineConfig cfg = load_config(args);
  fs::path path = cfg.layout().results_file(results_name);
  if (!fs::exists(path)) throw MissingArtifact("results not found: " + path.string());
  auto records = read_jsonl_as<EvalRecord>(path);
  DesignOptions options;
  options.reference_family = cfg.reference_family;
  fs::path out = out_flag.empty()
                     ? [&] {
                         fs::path p = path;
                         p.replace_extension(".long.csv");
                         return p;
                       }()
                     : fs::path(out_flag);
  export_long(records, cfg.model_registry(), out, options);
  std::cout << "long-format export: " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instruction corpus retrieval pipeline"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "pipeline config file (JSON)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override the configured rng seed");
  app.add_flag("--dry-run", args.dry_run, "print the work plan without backend calls");

  std::string task_flag, variant_flag, condition_flag, plan_path, results_name, split_flag,
      output_flag, out_flag;
  std::vector<double> threshold_flags;
  std::vector<std::string> condition_flags;
  int k_flag = 0;

  auto* ingest = app.add_subcommand("ingest", "validate corpora and split train/test");
  ingest->add_option("--task", task_flag, "restrict to one task");

  auto* embed = app.add_subcommand("embed", "warm the embedding cache");
  embed->add_option("--task", task_flag);
  embed->add_option("--split", split_flag, "train|test|both")->default_val("both");

  auto* cluster = app.add_subcommand("cluster", "build dendrogram, cut and report stats");
  cluster->add_option("--task", task_flag);
  cluster->add_option("--threshold", threshold_flags, "cut threshold(s)");

  auto* gen = app.add_subcommand("gen", "generate instructions per cluster");
  gen->add_option("--task", task_flag);
  gen->add_option("--threshold", threshold_flags);
  gen->add_option("--variant", variant_flag, "one of the five template variants");

  auto* index = app.add_subcommand("index", "build the retrieval index");
  index->add_option("--task", task_flag);
  index->add_option("--threshold", threshold_flags);

  auto* run = app.add_subcommand("run", "run an experiment grid");
  run->add_option("--plan", plan_path, "experiment plan JSON (overrides flags)");
  run->add_option("--task", task_flag);
  run->add_option("--threshold", threshold_flags);
  run->add_option("--condition", condition_flags, "conditions to run (repeatable)");
  run->add_option("--k", k_flag, "retrieved instructions per query");
  run->add_option("--output", output_flag)->default_val("results.jsonl");

  auto* agg = app.add_subcommand("aggregate", "accuracy table from a results file");
  agg->add_option("--results", results_name)->default_val("results.jsonl");

  auto* sweep = app.add_subcommand("sweep", "accuracy across clustering thresholds");
  sweep->add_option("--task", task_flag)->required();
  sweep->add_option("--threshold", threshold_flags);
  sweep->add_option("--condition", condition_flag);

  auto* judge = app.add_subcommand("judge", "score instruction quality on the rubric");
  judge->add_option("--task", task_flag);
  judge->add_option("--threshold", threshold_flags);
  judge->add_option("--variant", variant_flag);

  auto* lengths = app.add_subcommand("lengths", "instruction token-length profile");
  lengths->add_option("--task", task_flag);

  auto* analyze = app.add_subcommand("analyze", "fit the correctness regression");
  analyze->add_option("--results", results_name)->default_val("results.jsonl");

  auto* exp = app.add_subcommand("export", "long-format CSV for external tooling");
  exp->add_option("--results", results_name)->default_val("results.jsonl");
  exp->add_option("--out", out_flag, "output CSV path");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) args.seed = seed_value;

  try {
    if (ingest->parsed()) return cmd_ingest(args, task_flag);
    if (embed->parsed()) return cmd_embed(args, task_flag, split_flag);
    if (cluster->parsed()) return cmd_cluster(args, task_flag, threshold_flags);
    if (gen->parsed()) return cmd_gen(args, task_flag, threshold_flags, variant_flag);
    if (index->parsed()) return cmd_index(args, task_flag, threshold_flags);
    if (run->parsed()) {
      return cmd_run(args, plan_path, task_flag, threshold_flags, condition_flags, k_flag,
                     output_flag);
    }
    if (agg->parsed()) return cmd_aggregate(args, results_name);
    if (sweep->parsed()) return cmd_sweep(args, task_flag, threshold_flags, condition_flag);
    if (judge->parsed()) return cmd_judge(args, task_flag, threshold_flags, variant_flag);
    if (lengths->parsed()) return cmd_lengths(args, task_flag);
    if (analyze->parsed()) return cmd_analyze(args, results_name);
    if (exp->parsed()) return cmd_export(args, results_name, out_flag);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
