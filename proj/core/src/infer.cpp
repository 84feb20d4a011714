#include "icr/infer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "icr/errors.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Budget
// ---------------------------------------------------------------------------

void PromptBudget::validate() const {
  if (context_limit_tokens < 1) throw ConfigError("context_limit_tokens must be positive");
  if (reserved_output_tokens < 1) throw ConfigError("reserved_output_tokens must be positive");
  if (reserved_output_tokens >= context_limit_tokens) {
    throw ConfigError("reserved_output_tokens must be smaller than context_limit_tokens");
  }
}

void to_json(nlohmann::json& j, const PromptBudget& b) {
  j = {{"context_limit_tokens", b.context_limit_tokens},
       {"reserved_output_tokens", b.reserved_output_tokens},
       {"tokenizer_id", b.tokenizer_id}};
}

void from_json(const nlohmann::json& j, PromptBudget& b) {
  b.context_limit_tokens = j.value("context_limit_tokens", 8192);
  b.reserved_output_tokens = j.value("reserved_output_tokens", 512);
  b.tokenizer_id = j.value("tokenizer_id", std::string(kBytesPer4Tokenizer));
}

void AssembledPrompt::check_budget(const PromptBudget& budget) const {
  if (token_count + budget.reserved_output_tokens > budget.context_limit_tokens) {
    throw BudgetInfeasible("assembled prompt of " + std::to_string(token_count) +
                           " tokens breaks the budget (limit " +
                           std::to_string(budget.context_limit_tokens) + ", reserved " +
                           std::to_string(budget.reserved_output_tokens) + ")");
  }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

namespace {

std::string render_prompt_text(const Question& question,
                               const std::vector<Instruction>& ranked, std::size_t use,
                               std::optional<AblationMode> ablation_mode) {
  std::string out;
  for (std::size_t i = 0; i < use; ++i) {
    out += ablation_mode ? ablate_instruction(ranked[i], *ablation_mode) : ranked[i].raw;
    out += "\n\n";
  }
  out += "Question: " + question.stem + "\n";
  out += render_options(question);
  out += "\n";
  out += kAnswerDirective;
  return out;
}

}  // namespace

AssembledPrompt assemble_prompt(const Question& question,
                                const std::vector<Instruction>& ranked_instructions,
                                const PromptBudget& budget,
                                std::optional<AblationMode> ablation_mode) {
  budget.validate();
  for (std::size_t use = ranked_instructions.size();; --use) {
    std::string text = render_prompt_text(question, ranked_instructions, use, ablation_mode);
    int tokens = count_tokens(text, budget.tokenizer_id);
    if (tokens + budget.reserved_output_tokens <= budget.context_limit_tokens) {
      AssembledPrompt prompt;
      for (std::size_t i = 0; i < use; ++i) {
        prompt.instructions_used.push_back(ranked_instructions[i].cluster_id);
      }
      prompt.text = std::move(text);
      prompt.token_count = tokens;
      prompt.check_budget(budget);
      return prompt;
    }
    if (use == 0) {
      throw BudgetInfeasible("question " + question.id + " alone needs " +
                             std::to_string(tokens) + " tokens; budget allows " +
                             std::to_string(budget.context_limit_tokens -
                                            budget.reserved_output_tokens));
    }
  }
}

// ---------------------------------------------------------------------------
// Answer extraction
// ---------------------------------------------------------------------------

std::set<char> valid_labels_of(const Question& q) {
  std::set<char> labels;
  for (const auto& opt : q.options) labels.insert(opt.label);
  return labels;
}

namespace {

bool is_valid_label(char c, const std::set<char>& valid) {
  char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return upper >= kMinLabel && upper <= kMaxLabel && valid.count(upper) > 0;
}

std::optional<char> last_phrase_match(const std::string& text, const std::set<char>& valid) {
  // "Answer: X" / "answer is X", tolerating markdown and parentheses around X.
  static const std::regex pattern(
      R"([Aa]nswer\s*(?:is|:)\s*[\*\("']*([A-E])(?![A-Za-z]))");
  std::optional<char> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern);
       it != std::sregex_iterator(); ++it) {
    char letter = (*it)[1].str()[0];
    if (is_valid_label(letter, valid)) found = letter;
  }
  return found;
}

std::optional<char> final_line_token(const std::string& text, const std::set<char>& valid) {
  std::vector<std::string> lines;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) lines.push_back(line);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::istringstream words(*it);
    std::string word;
    std::optional<char> found;
    bool any_word = false;
    while (words >> word) {
      any_word = true;
      // strip surrounding punctuation
      std::size_t begin = 0, end = word.size();
      auto is_punct = [](char c) {
        return std::ispunct(static_cast<unsigned char>(c)) != 0;
      };
      while (begin < end && is_punct(word[begin])) ++begin;
      while (end > begin && is_punct(word[end - 1])) --end;
      if (end - begin == 1 && is_valid_label(word[begin], valid)) {
        found = static_cast<char>(std::toupper(static_cast<unsigned char>(word[begin])));
      }
    }
    if (any_word) return found;  // only the final non-empty line counts
  }
  return std::nullopt;
}

}  // namespace

std::optional<char> extract_answer(const std::string& raw_output,
                                   const std::set<char>& valid_labels) {
  if (auto phrase = last_phrase_match(raw_output, valid_labels)) return phrase;
  return final_line_token(raw_output, valid_labels);
}

// ---------------------------------------------------------------------------
// run_inference
// ---------------------------------------------------------------------------

EvalRecord run_inference(const Question& question, const Condition& condition,
                         const InferenceContext& ctx, const PromptBudget& budget,
                         ChatClient& chat, EmbeddingClient* embedder) {
  EvalRecord record;
  record.question_id = question.id;
  record.task = question.task;
  record.model_id = chat.config().model_name;
  record.condition = condition;

  std::vector<Instruction> ranked;
  if (condition.retrieves()) {
    if (ctx.index == nullptr || ctx.instructions == nullptr) {
      throw MissingArtifact("condition " + condition.name() +
                            " needs a retrieval index and an instruction store");
    }
    if (embedder == nullptr) {
      throw MissingArtifact("condition " + condition.name() + " needs an embedding backend");
    }
    record.threshold_id = ctx.threshold_id;
    EmbeddingVector query = embedder->embed_one(embedding_text(question));
    for (const auto& hit : top_k(*ctx.index, query, ctx.k)) {
      record.retrieved_cluster_ids.push_back(hit.cluster_id);
      auto it = ctx.instructions->find(hit.cluster_id);
      if (it != ctx.instructions->end()) ranked.push_back(it->second);
    }
  }

  std::optional<AblationMode> mode;
  if (condition.kind == Condition::Kind::KnowledgeOnly) mode = AblationMode::KnowledgeOnly;
  if (condition.kind == Condition::Kind::ReasoningOnly) mode = AblationMode::ReasoningOnly;

  AssembledPrompt prompt = assemble_prompt(question, ranked, budget, mode);
  record.prompt_tokens = prompt.token_count;

  ChatRequest request;
  request.user = prompt.text;
  request.max_tokens = budget.reserved_output_tokens;
  try {
    record.raw_output = chat.chat(std::move(request));
  } catch (const Error& e) {
    record.raw_output = std::string("[error] ") + e.what();
    record.extracted_answer = std::nullopt;
    record.correct = false;
    return record;
  }

  record.extracted_answer = extract_answer(record.raw_output, valid_labels_of(question));
  record.correct = is_correct(record.extracted_answer, question.gold);
  return record;
}

}  // namespace icr
