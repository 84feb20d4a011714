#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "icr/backends.hpp"
#include "icr/instructgen.hpp"
#include "icr/retrieve.hpp"
#include "icr/tokens.hpp"
#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Prompt budget
// ---------------------------------------------------------------------------

struct PromptBudget {
  int context_limit_tokens = 8192;
  int reserved_output_tokens = 512;
  std::string tokenizer_id = kBytesPer4Tokenizer;

  void validate() const;
};

void to_json(nlohmann::json& j, const PromptBudget& b);
void from_json(const nlohmann::json& j, PromptBudget& b);

/// The fixed answer directive, identical across all conditions so accuracy
/// deltas cannot come from differing answer-format instructions.
inline constexpr const char* kAnswerDirective =
    "Answer with the letter of the correct option.";

struct AssembledPrompt {
  std::vector<std::string> instructions_used;  // prefix of the retrieval ranking
  std::string text;
  int token_count = 0;

  /// token_count + reserved_output_tokens <= context_limit_tokens.
  void check_budget(const PromptBudget& budget) const;
};

/// Renders instruction blocks in rank order, then the question, options and
/// the answer directive. Starting from all instructions, the lowest-ranked
/// one is dropped until the prompt fits the budget; an empty instruction
/// list is the zero-shot prompt. Throws BudgetInfeasible when the question
/// alone exceeds the budget.
AssembledPrompt assemble_prompt(const Question& question,
                                const std::vector<Instruction>& ranked_instructions,
                                const PromptBudget& budget,
                                std::optional<AblationMode> ablation_mode = std::nullopt);

// ---------------------------------------------------------------------------
// Answer extraction
// ---------------------------------------------------------------------------

/// Total function; never throws.
/// Precedence: (1) last "Answer: X" / "answer is X" occurrence with a valid
/// X; (2) a standalone valid letter token on the final non-empty line;
/// (3) none.
std::optional<char> extract_answer(const std::string& raw_output,
                                   const std::set<char>& valid_labels);

std::set<char> valid_labels_of(const Question& q);

// ---------------------------------------------------------------------------
// Single-question inference
// ---------------------------------------------------------------------------

/// Retrieval artifacts for one (task, threshold). Zero-shot runs need none.
struct InferenceContext {
  const RetrievalIndex* index = nullptr;
  const std::map<std::string, Instruction>* instructions = nullptr;  // by cluster_id
  std::string threshold_id;
  int k = 5;
};

/// Embeds the query, retrieves top-k, assembles under the budget, calls the
/// model at the standard sampling settings and emits a complete EvalRecord.
/// Backend failures become records with correct=false and an error tag in
/// raw_output rather than aborting the run.
EvalRecord run_inference(const Question& question, const Condition& condition,
                         const InferenceContext& ctx, const PromptBudget& budget,
                         ChatClient& chat, EmbeddingClient* embedder);

}  // namespace icr
