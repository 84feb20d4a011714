#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "icr/backends.hpp"
#include "icr/cluster.hpp"
#include "icr/templates.hpp"
#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Example sampling and prompt rendering
// ---------------------------------------------------------------------------

inline constexpr int kMaxExamplesPerCluster = 5;

/// Uniform sample without replacement of min(5, |members|) questions.
/// Deterministic for a given seed, independent of platform.
std::vector<Question> sample_examples(const std::vector<Question>& cluster_members,
                                      std::uint64_t rng_seed);

/// Examples serialized as numbered blocks: stem, options, gold answer.
std::string render_examples(const std::vector<Question>& examples);

/// Substitutes the numbered example blocks into the template's {EXAMPLES}
/// slot. Throws MissingPlaceholder when the template has no slot.
std::string render_prompt(const std::string& template_text,
                          const std::vector<Question>& examples);

struct GenerationJob {
  std::string cluster_id;
  InstructionVariant variant;
  std::vector<Question> sampled_examples;  // 1..5
  std::string rendered_prompt;
};

// ---------------------------------------------------------------------------
// Completion parsing and ablation
// ---------------------------------------------------------------------------

/// Splits a completion into (background, reasoning) on the two exact headers.
/// Text before the first header is discarded; header lines tolerate
/// surrounding whitespace. Throws MalformedInstruction when a header is
/// missing, headers are out of order, or either body is empty.
Instruction parse_instruction(const std::string& raw, std::string cluster_id,
                              InstructionVariant variant,
                              std::vector<std::string> example_ids);

enum class AblationMode { KnowledgeOnly, ReasoningOnly };

std::string to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);

/// Header plus the kept section only.
std::string ablate_instruction(const Instruction& instr, AblationMode mode);

// ---------------------------------------------------------------------------
// Instruction store
// ---------------------------------------------------------------------------

/// One JSON file per (threshold_id, variant) under the store root, holding
/// instructions keyed by cluster_id plus recorded generation failures.
class InstructionStore {
 public:
  explicit InstructionStore(std::filesystem::path root);

  std::filesystem::path file_path(const std::string& threshold_id,
                                  const InstructionVariant& variant) const;
  bool exists(const std::string& threshold_id, const InstructionVariant& variant) const;

  struct Contents {
    std::map<std::string, Instruction> instructions;  // by cluster_id
    std::map<std::string, std::string> failures;      // cluster_id -> message
  };

  /// Empty contents when the file does not exist yet.
  Contents load(const std::string& threshold_id, const InstructionVariant& variant) const;
  void save(const std::string& threshold_id, const InstructionVariant& variant,
            const Contents& contents) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

struct GenerationOptions {
  std::uint64_t rng_seed = 0;
  int max_retries = 2;   // re-asks on MalformedInstruction, identical prompt
  int concurrency = 0;   // 0 = follow the chat backend's max_concurrency
  const TemplateSet* templates = nullptr;  // null = TemplateSet::standard()
};

struct GenerationResult {
  std::vector<Instruction> instructions;  // full corpus for the cut, sorted by cluster_id
  std::map<std::string, std::string> failures;
  struct RetryEvent {
    std::string cluster_id;
    int attempt = 0;
    std::string message;
  };
  std::vector<RetryEvent> retries;
  int chat_calls = 0;  // calls issued by this invocation
  int skipped = 0;     // clusters already present in the store
};

/// Generates one instruction per cluster (or records a failure), resuming
/// past work in the store. Aborts only on AuthError; everything else becomes
/// a per-cluster failure. Jobs run concurrently up to the backend limit.
GenerationResult generate_corpus(const std::vector<LabeledCluster>& clusters,
                                 const std::map<std::string, Question>& questions_by_id,
                                 const InstructionVariant& variant, ChatClient& chat,
                                 InstructionStore& store, const std::string& threshold_id,
                                 const GenerationOptions& options = {});

}  // namespace icr
