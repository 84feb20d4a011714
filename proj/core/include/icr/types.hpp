#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace icr {

// ---------------------------------------------------------------------------
// Task / Split
// ---------------------------------------------------------------------------

/// Benchmark identity. The three named tasks cover the shipped reference
/// corpora; Custom lets any other corpus flow through the same pipeline.
struct Task {
  enum class Kind { MedQA, MMLULaw, MathQA, Custom };

  Kind kind = Kind::Custom;
  std::string custom_name;  // set only when kind == Custom

  static Task medqa() { return {Kind::MedQA, {}}; }
  static Task mmlu_law() { return {Kind::MMLULaw, {}}; }
  static Task mathqa() { return {Kind::MathQA, {}}; }
  static Task custom(std::string name) { return {Kind::Custom, std::move(name)}; }

  /// Parses "medqa" | "mmlu_law" | "mathqa"; anything else becomes Custom.
  static Task parse(const std::string& name);

  std::string name() const;

  bool operator==(const Task& o) const {
    return kind == o.kind && (kind != Kind::Custom || custom_name == o.custom_name);
  }
  bool operator<(const Task& o) const { return name() < o.name(); }
};

enum class Split { Train, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

// ---------------------------------------------------------------------------
// Question
// ---------------------------------------------------------------------------

struct Option {
  char label = 'A';  // single uppercase letter
  std::string text;

  bool operator==(const Option&) const = default;
};

/// One multiple-choice benchmark item.
///
/// Invariants (checked by validate_corpus, not by the constructor):
///   - option labels are unique and contiguous starting at 'A', capped at 'E'
///   - gold appears among the option labels
///   - id is unique within (task, split)
struct Question {
  std::string id;
  Task task;
  Split split = Split::Train;
  std::string stem;
  std::vector<Option> options;
  char gold = 'A';

  bool operator==(const Question&) const = default;
};

/// Option letters permitted by the corpus format.
inline constexpr char kMinLabel = 'A';
inline constexpr char kMaxLabel = 'E';

/// Options rendered as "A. text\nB. text" lines.
std::string render_options(const Question& q);

/// The text embedded for clustering and retrieval: stem plus rendered
/// options (options carry discriminative clues the stem alone lacks).
std::string embedding_text(const Question& q);

// ---------------------------------------------------------------------------
// EmbeddingVector
// ---------------------------------------------------------------------------

struct EmbeddingVector {
  std::vector<double> values;
  int dim = 0;  // must equal values.size()
  std::string source_model;

  double norm() const;
  /// Unit-norm copy. Throws ZeroVector when the norm is 0.
  EmbeddingVector normalized() const;

  bool operator==(const EmbeddingVector&) const = default;
};

// ---------------------------------------------------------------------------
// Instructions
// ---------------------------------------------------------------------------

enum class Audience { HighSchool, Graduate, Baseline };
enum class Length { Concise, Verbose, Unconstrained };

/// One of the five template conditions. Baseline pairs only with
/// Unconstrained; the four controlled variants cross the two factors.
struct InstructionVariant {
  Audience audience = Audience::Baseline;
  Length length = Length::Unconstrained;

  static InstructionVariant baseline() { return {Audience::Baseline, Length::Unconstrained}; }
  static InstructionVariant high_school_concise() { return {Audience::HighSchool, Length::Concise}; }
  static InstructionVariant high_school_verbose() { return {Audience::HighSchool, Length::Verbose}; }
  static InstructionVariant graduate_concise() { return {Audience::Graduate, Length::Concise}; }
  static InstructionVariant graduate_verbose() { return {Audience::Graduate, Length::Verbose}; }

  /// The Baseline/Unconstrained pairing rule.
  bool valid() const {
    return (audience == Audience::Baseline) == (length == Length::Unconstrained);
  }

  std::string name() const;
  static InstructionVariant parse(const std::string& name);
  static const std::vector<InstructionVariant>& all();

  bool operator==(const InstructionVariant&) const = default;
  bool operator<(const InstructionVariant& o) const { return name() < o.name(); }
};

inline constexpr const char* kBackgroundHeader = "## Background Knowledge";
inline constexpr const char* kReasoningHeader = "## Reasoning Steps";

/// A generated two-section instruction tied to one cluster.
struct Instruction {
  std::string cluster_id;
  InstructionVariant variant;
  std::string background;  // body under "## Background Knowledge"
  std::string reasoning;   // body under "## Reasoning Steps"
  std::string raw;         // full generated text
  std::vector<std::string> example_ids;  // generation seeds, <= 5
  int token_len = 0;

  bool operator==(const Instruction&) const = default;
};

/// Canonical raw form: both headers plus their trimmed bodies. Parsing the
/// result recovers (background, reasoning) exactly.
std::string reconstruct_raw(const std::string& background, const std::string& reasoning);

// ---------------------------------------------------------------------------
// Evaluation records
// ---------------------------------------------------------------------------

/// Prompting condition for one inference call.
struct Condition {
  enum class Kind { ZeroShot, Instructed, KnowledgeOnly, ReasoningOnly };

  Kind kind = Kind::ZeroShot;
  InstructionVariant variant;  // meaningful only for Instructed

  static Condition zero_shot() { return {Kind::ZeroShot, {}}; }
  static Condition instructed(InstructionVariant v) { return {Kind::Instructed, v}; }
  static Condition knowledge_only() { return {Kind::KnowledgeOnly, {}}; }
  static Condition reasoning_only() { return {Kind::ReasoningOnly, {}}; }

  bool retrieves() const { return kind != Kind::ZeroShot; }

  std::string name() const;  // "zero_shot", "instructed:<variant>", ...
  static Condition parse(const std::string& name);

  bool operator==(const Condition&) const = default;
  bool operator<(const Condition& o) const { return name() < o.name(); }
};

/// One (question, model, condition) outcome row.
struct EvalRecord {
  std::string question_id;
  Task task;
  std::string model_id;
  Condition condition;
  std::vector<std::string> retrieved_cluster_ids;
  int prompt_tokens = 0;
  std::string raw_output;
  std::optional<char> extracted_answer;
  bool correct = false;
  std::string threshold_id;  // empty for ZeroShot

  bool operator==(const EvalRecord&) const = default;
};

/// correct is a pure function of the extracted answer and the gold label;
/// None is always incorrect.
inline bool is_correct(const std::optional<char>& extracted, char gold) {
  return extracted.has_value() && *extracted == gold;
}

// ---------------------------------------------------------------------------
// Corpus validation
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string question_id;
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
};

/// Checks every corpus invariant; violations are reported, never thrown.
/// An empty report means the corpus is loadable downstream.
ValidationReport validate_corpus(const std::vector<Question>& questions);

// ---------------------------------------------------------------------------
// JSON conversions (used by the JSONL corpus and results formats)
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const Task& t);
void from_json(const nlohmann::json& j, Task& t);
void to_json(nlohmann::json& j, const Option& o);
void from_json(const nlohmann::json& j, Option& o);
void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);
void to_json(nlohmann::json& j, const EmbeddingVector& v);
void from_json(const nlohmann::json& j, EmbeddingVector& v);
void to_json(nlohmann::json& j, const InstructionVariant& v);
void from_json(const nlohmann::json& j, InstructionVariant& v);
void to_json(nlohmann::json& j, const Instruction& i);
void from_json(const nlohmann::json& j, Instruction& i);
void to_json(nlohmann::json& j, const Condition& c);
void from_json(const nlohmann::json& j, Condition& c);
void to_json(nlohmann::json& j, const EvalRecord& r);
void from_json(const nlohmann::json& j, EvalRecord& r);

}  // namespace icr
