#include "icr/instructgen.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "icr/concurrency.hpp"
#include "icr/errors.hpp"
#include "icr/hash.hpp"
#include "icr/jsonl.hpp"
#include "icr/tokens.hpp"

namespace icr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

std::vector<Question> sample_examples(const std::vector<Question>& cluster_members,
                                      std::uint64_t rng_seed) {
  if (cluster_members.empty()) {
    throw InvalidArgument("sample_examples requires a non-empty cluster");
  }
  const std::size_t n = cluster_members.size();
  const std::size_t k = std::min<std::size_t>(kMaxExamplesPerCluster, n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  // Partial Fisher-Yates driven by splitmix64; std distributions are
  // implementation-defined, this is bit-stable across platforms.
  std::uint64_t state = rng_seed ^ 0x5851f42d4c957f2dull;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(splitmix64(state) % (n - i));
    std::swap(order[i], order[j]);
  }

  std::vector<Question> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(cluster_members[order[i]]);
  return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_examples(const std::vector<Question>& examples) {
  std::ostringstream out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Question& q = examples[i];
    if (i > 0) out << "\n\n";
    out << "Example " << (i + 1) << ":\n"
        << "Question: " << q.stem << "\n"
        << "Options:\n"
        << render_options(q) << "\n"
        << "Correct Answer: " << q.gold;
  }
  return out.str();
}

std::string render_prompt(const std::string& template_text,
                          const std::vector<Question>& examples) {
  if (examples.empty()) throw InvalidArgument("render_prompt requires at least one example");
  auto pos = template_text.find(kExamplesPlaceholder);
  if (pos == std::string::npos) {
    throw MissingPlaceholder(std::string("template lacks the ") + kExamplesPlaceholder +
                             " slot");
  }
  std::string out = template_text;
  out.replace(pos, std::string(kExamplesPlaceholder).size(), render_examples(examples));
  return out;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

struct SplitLines {
  std::vector<std::string> lines;

  explicit SplitLines(const std::string& text) {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string::npos) {
        lines.push_back(text.substr(start));
        break;
      }
      lines.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }

  int find_header(const char* header, int from = 0) const {
    for (int i = from; i < static_cast<int>(lines.size()); ++i) {
      if (trim(lines[i]) == header) return i;
    }
    return -1;
  }

  std::string join(int first, int last) const {  // [first, last)
    std::string out;
    for (int i = first; i < last; ++i) {
      if (i > first) out += '\n';
      out += lines[i];
    }
    return out;
  }
};

}  // namespace

Instruction parse_instruction(const std::string& raw, std::string cluster_id,
                              InstructionVariant variant,
                              std::vector<std::string> example_ids) {
  SplitLines lines(raw);
  int bg = lines.find_header(kBackgroundHeader);
  int rs = lines.find_header(kReasoningHeader);
  if (bg < 0) throw MalformedInstruction(std::string("missing header '") + kBackgroundHeader + "'");
  if (rs < 0) throw MalformedInstruction(std::string("missing header '") + kReasoningHeader + "'");
  if (rs < bg) throw MalformedInstruction("section headers out of order");

  Instruction instr;
  instr.cluster_id = std::move(cluster_id);
  instr.variant = variant;
  instr.background = trim(lines.join(bg + 1, rs));
  instr.reasoning = trim(lines.join(rs + 1, static_cast<int>(lines.lines.size())));
  if (instr.background.empty()) throw MalformedInstruction("empty background section");
  if (instr.reasoning.empty()) throw MalformedInstruction("empty reasoning section");
  instr.raw = raw;
  instr.example_ids = std::move(example_ids);
  instr.token_len = count_tokens(raw, kBytesPer4Tokenizer);
  return instr;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

std::string to_string(AblationMode mode) {
  return mode == AblationMode::KnowledgeOnly ? "knowledge_only" : "reasoning_only";
}

AblationMode parse_ablation_mode(const std::string& name) {
  if (name == "knowledge_only") return AblationMode::KnowledgeOnly;
  if (name == "reasoning_only") return AblationMode::ReasoningOnly;
  throw ConfigError("unknown ablation mode '" + name + "'");
}

std::string ablate_instruction(const Instruction& instr, AblationMode mode) {
  if (mode == AblationMode::KnowledgeOnly) {
    return std::string(kBackgroundHeader) + "\n" + instr.background;
  }
  return std::string(kReasoningHeader) + "\n" + instr.reasoning;
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

InstructionStore::InstructionStore(fs::path root) : root_(std::move(root)) {}

fs::path InstructionStore::file_path(const std::string& threshold_id,
                                     const InstructionVariant& variant) const {
  return root_ / threshold_id / (variant.name() + ".json");
}

bool InstructionStore::exists(const std::string& threshold_id,
                              const InstructionVariant& variant) const {
  return fs::exists(file_path(threshold_id, variant));
}

InstructionStore::Contents InstructionStore::load(const std::string& threshold_id,
                                                  const InstructionVariant& variant) const {
  Contents contents;
  fs::path path = file_path(threshold_id, variant);
  if (!fs::exists(path)) return contents;
  nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  for (const auto& [cluster_id, item] : j.at("instructions").items()) {
    contents.instructions[cluster_id] = item.get<Instruction>();
  }
  if (j.contains("failures")) {
    for (const auto& [cluster_id, msg] : j.at("failures").items()) {
      contents.failures[cluster_id] = msg.get<std::string>();
    }
  }
  return contents;
}

void InstructionStore::save(const std::string& threshold_id, const InstructionVariant& variant,
                            const Contents& contents) const {
  nlohmann::json instructions = nlohmann::json::object();
  for (const auto& [cluster_id, instr] : contents.instructions) {
    instructions[cluster_id] = instr;
  }
  nlohmann::json failures = nlohmann::json::object();
  for (const auto& [cluster_id, msg] : contents.failures) failures[cluster_id] = msg;
  nlohmann::json j = {{"threshold_id", threshold_id},
                      {"variant", variant.name()},
                      {"instructions", instructions},
                      {"failures", failures}};
  write_text_file(file_path(threshold_id, variant), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

GenerationResult generate_corpus(const std::vector<LabeledCluster>& clusters,
                                 const std::map<std::string, Question>& questions_by_id,
                                 const InstructionVariant& variant, ChatClient& chat,
                                 InstructionStore& store, const std::string& threshold_id,
                                 const GenerationOptions& options) {
  if (clusters.empty()) throw InvalidArgument("generate_corpus requires a non-empty cut");
  const TemplateSet& templates =
      options.templates ? *options.templates : TemplateSet::standard();
  const std::string& template_text = templates.for_variant(variant);

  auto contents = store.load(threshold_id, variant);

  GenerationResult result;
  std::vector<const LabeledCluster*> todo;
  for (const auto& cluster : clusters) {
    if (contents.instructions.count(cluster.cluster_id)) {
      ++result.skipped;
    } else {
      todo.push_back(&cluster);
    }
  }

  std::mutex mu;  // guards contents + result bookkeeping
  std::atomic<int> chat_calls{0};
  int concurrency = options.concurrency > 0 ? options.concurrency
                                            : chat.config().max_concurrency;

  auto run_job = [&](std::size_t idx) {
    const LabeledCluster& cluster = *todo[idx];

    std::vector<Question> members;
    members.reserve(cluster.member_ids.size());
    for (const auto& qid : cluster.member_ids) {
      auto it = questions_by_id.find(qid);
      if (it == questions_by_id.end()) {
        std::lock_guard lock(mu);
        contents.failures[cluster.cluster_id] = "unknown member question id " + qid;
        return;
      }
      members.push_back(it->second);
    }

    std::uint64_t seed = fnv1a64(cluster.cluster_id) ^
                         (options.rng_seed * 0x9e3779b97f4a7c15ull);
    auto sampled = sample_examples(members, seed);
    std::vector<std::string> example_ids;
    for (const auto& q : sampled) example_ids.push_back(q.id);

    std::string prompt = render_prompt(template_text, sampled);

    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      std::string completion;
      try {
        ++chat_calls;
        completion = chat.chat({.user = prompt});
      } catch (const AuthError&) {
        throw;  // aborts the whole run; partial progress is saved by the caller frame
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        contents.failures[cluster.cluster_id] = e.what();
        return;
      }
      try {
        Instruction instr =
            parse_instruction(completion, cluster.cluster_id, variant, example_ids);
        std::lock_guard lock(mu);
        contents.instructions[instr.cluster_id] = std::move(instr);
        contents.failures.erase(cluster.cluster_id);
        return;
      } catch (const MalformedInstruction& e) {
        std::lock_guard lock(mu);
        if (attempt < options.max_retries) {
          result.retries.push_back({cluster.cluster_id, attempt + 1, e.what()});
        } else {
          contents.failures[cluster.cluster_id] = e.what();
        }
      }
    }
  };

  try {
    parallel_for(todo.size(), concurrency, run_job);
  } catch (...) {
    store.save(threshold_id, variant, contents);  // keep partial progress resumable
    throw;
  }

  store.save(threshold_id, variant, contents);

  result.chat_calls = chat_calls.load();
  result.failures = contents.failures;
  result.instructions.reserve(contents.instructions.size());
  for (const auto& [cluster_id, instr] : contents.instructions) {
    result.instructions.push_back(instr);
  }
  return result;
}

}  // namespace icr
