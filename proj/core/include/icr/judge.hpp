#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "icr/backends.hpp"
#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Rubric scores
// ---------------------------------------------------------------------------

inline constexpr std::array<const char*, 5> kRubricAxes = {
    "knowledge_comprehensiveness", "knowledge_relevance", "reasoning_accuracy",
    "reasoning_relevance", "clarity"};

struct RubricScore {
  int knowledge_comprehensiveness = 1;
  int knowledge_relevance = 1;
  int reasoning_accuracy = 1;
  int reasoning_relevance = 1;
  int clarity = 1;

  bool factual_error_in_steps = false;
  bool required_step_missing = false;
  bool background_mostly_tangential = false;
  bool step_boundaries_unclear = false;

  int axis(std::size_t i) const;
  void set_axis(std::size_t i, int value);

  bool operator==(const RubricScore&) const = default;
};

void to_json(nlohmann::json& j, const RubricScore& s);
void from_json(const nlohmann::json& j, RubricScore& s);

/// The rubric's global decision rules, enforced in code rather than trusted
/// to the judge model:
///   factual_error_in_steps        -> reasoning_accuracy capped at 2
///   required_step_missing         -> reasoning_relevance capped at 2 and
///                                    knowledge_comprehensiveness capped at 3
///   background_mostly_tangential  -> knowledge_relevance capped at 2
///   step_boundaries_unclear       -> clarity capped at 3
/// Scores never increase; idempotent.
RubricScore apply_caps(RubricScore score);

// ---------------------------------------------------------------------------
// Judging
// ---------------------------------------------------------------------------

struct JudgedInstruction {
  std::string cluster_id;
  InstructionVariant variant;
  std::vector<RubricScore> runs;        // capped, one per repeat
  std::array<double, 5> averaged{};     // mean of capped scores per axis

  bool operator==(const JudgedInstruction&) const = default;
};

void to_json(nlohmann::json& j, const JudgedInstruction& s);
void from_json(const nlohmann::json& j, JudgedInstruction& s);

/// The judging prompt: all five criteria with their level descriptors, the
/// four flags, a strict JSON answer schema, and the instruction under review.
std::string judging_prompt(const Instruction& instr);

/// Parses the judge's strict-JSON reply. Throws JudgeParseError on malformed
/// JSON, missing keys, non-integer or out-of-range scores.
RubricScore parse_judge_response(const std::string& text);

/// Scores one instruction `repeats` times (sequentially), applying caps per
/// run and averaging. One re-ask per run on a parse failure, then
/// JudgeParseError propagates. Backend errors propagate.
JudgedInstruction judge_instruction(const Instruction& instr, ChatClient& judge,
                                    int repeats = 3);

// ---------------------------------------------------------------------------
// Corpus-level summaries
// ---------------------------------------------------------------------------

struct JudgeSummaryRow {
  InstructionVariant variant;
  int count = 0;
  std::array<double, 5> means{};  // mean of averaged axes over instructions
};

struct JudgeSummary {
  std::vector<JudgeSummaryRow> rows;  // empty variant buckets omitted
};

struct JudgeCorpusResult {
  std::vector<JudgedInstruction> judged;
  JudgeSummary summary;
  std::map<std::string, std::string> failures;  // cluster_id -> message
};

/// Judges every instruction (parallel across instructions up to the backend
/// limit; repeats within one instruction stay sequential) and summarizes per
/// variant. Per-instruction failures are aggregated; AuthError aborts.
JudgeCorpusResult judge_corpus(const std::vector<Instruction>& instructions,
                               ChatClient& judge, int repeats = 3);

JudgeSummary summarize_judged(const std::vector<JudgedInstruction>& judged);

/// CSV layout: audience, length, then the five axes.
std::string judge_summary_csv(const JudgeSummary& summary);

}  // namespace icr
