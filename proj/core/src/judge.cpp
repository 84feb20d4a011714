#include "icr/judge.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "icr/concurrency.hpp"
#include "icr/errors.hpp"

namespace icr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// RubricScore
// ---------------------------------------------------------------------------

int RubricScore::axis(std::size_t i) const {
  switch (i) {
    case 0: return knowledge_comprehensiveness;
    case 1: return knowledge_relevance;
    case 2: return reasoning_accuracy;
    case 3: return reasoning_relevance;
    case 4: return clarity;
  }
  throw InvalidArgument("rubric axis index out of range");
}

void RubricScore::set_axis(std::size_t i, int value) {
  switch (i) {
    case 0: knowledge_comprehensiveness = value; return;
    case 1: knowledge_relevance = value; return;
    case 2: reasoning_accuracy = value; return;
    case 3: reasoning_relevance = value; return;
    case 4: clarity = value; return;
  }
  throw InvalidArgument("rubric axis index out of range");
}

void to_json(json& j, const RubricScore& s) {
  j = {{"knowledge_comprehensiveness", s.knowledge_comprehensiveness},
       {"knowledge_relevance", s.knowledge_relevance},
       {"reasoning_accuracy", s.reasoning_accuracy},
       {"reasoning_relevance", s.reasoning_relevance},
       {"clarity", s.clarity},
       {"factual_error_in_steps", s.factual_error_in_steps},
       {"required_step_missing", s.required_step_missing},
       {"background_mostly_tangential", s.background_mostly_tangential},
       {"step_boundaries_unclear", s.step_boundaries_unclear}};
}

void from_json(const json& j, RubricScore& s) {
  j.at("knowledge_comprehensiveness").get_to(s.knowledge_comprehensiveness);
  j.at("knowledge_relevance").get_to(s.knowledge_relevance);
  j.at("reasoning_accuracy").get_to(s.reasoning_accuracy);
  j.at("reasoning_relevance").get_to(s.reasoning_relevance);
  j.at("clarity").get_to(s.clarity);
  j.at("factual_error_in_steps").get_to(s.factual_error_in_steps);
  j.at("required_step_missing").get_to(s.required_step_missing);
  j.at("background_mostly_tangential").get_to(s.background_mostly_tangential);
  j.at("step_boundaries_unclear").get_to(s.step_boundaries_unclear);
}

RubricScore apply_caps(RubricScore score) {
  if (score.factual_error_in_steps) {
    score.reasoning_accuracy = std::min(score.reasoning_accuracy, 2);
  }
  if (score.required_step_missing) {
    score.reasoning_relevance = std::min(score.reasoning_relevance, 2);
    score.knowledge_comprehensiveness = std::min(score.knowledge_comprehensiveness, 3);
  }
  if (score.background_mostly_tangential) {
    score.knowledge_relevance = std::min(score.knowledge_relevance, 2);
  }
  if (score.step_boundaries_unclear) {
    score.clarity = std::min(score.clarity, 3);
  }
  return score;
}

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

namespace {

const char* kRubricText =
    R"(Knowledge Comprehensiveness
  5: All background facts needed for typical instances are present, including key definitions, edge cases, and disambiguations.
  4: Nearly all essentials covered. Minor omissions that rarely affect correctness.
  3: Mixed coverage with several common cases or definitions missing. Sometimes blocks a correct solution.
  2: Multiple essential facts missing. Frequent failure without extra knowledge.
  1: Largely incomplete background.

Knowledge Relevance
  5: Background contains only necessary or highly useful facts for the cluster. No tangents.
  4: Small amount of extra detail that is not distracting.
  3: Noticeable extraneous content. Can distract or slow reasoning.
  2: Large amount of irrelevant or low-yield content. Likely to mislead.
  1: Mostly off-topic or generic background.

Reasoning Accuracy
  5: Reasoning steps are logically sound, factually correct, and properly sequenced. No contradictions.
  4: Minor imprecision or wording issues that do not change the outcome.
  3: At least one underspecified or brittle step that could lead to a wrong branch. Small gaps.
  2: Clear logical or factual error that would often yield an incorrect answer.
  1: Reasoning is largely incorrect or inconsistent.

Reasoning Relevance
  5: Steps are tailored to the problem type, align with input and output, and include cluster-critical operations.
  4: Mostly tailored with minimal generic filler.
  3: Mix of tailored and generic steps. Some do not map to the task structure.
  2: Largely generic advice. Missing one or more cluster-critical steps.
  1: Steps unrelated to the problem type.

Clarity
  5: Concise, well structured, unambiguous. Consistent terminology. Numbered steps or clear bullets. Explicit stop conditions or decision points.
  4: Generally clear with minor verbosity or mild ambiguity.
  3: Mixed clarity. Some steps vague or terminology inconsistent.
  2: Hard to follow. Long sentences, unclear step boundaries, or undefined terms.
  1: Confusing or unreadable.)";

const char* kJudgeSchema =
    R"({"knowledge_comprehensiveness": <1-5>, "knowledge_relevance": <1-5>, "reasoning_accuracy": <1-5>, "reasoning_relevance": <1-5>, "clarity": <1-5>, "factual_error_in_steps": <true|false>, "required_step_missing": <true|false>, "background_mostly_tangential": <true|false>, "step_boundaries_unclear": <true|false>})";

}  // namespace

std::string judging_prompt(const Instruction& instr) {
  std::ostringstream out;
  out << "You are evaluating the quality of an instruction guide that pairs background "
         "knowledge with step-by-step reasoning for a group of similar multiple-choice "
         "problems.\n\n"
      << "Score the instruction on each of these five criteria using the 1-5 descriptors:\n\n"
      << kRubricText << "\n\n"
      << "Also report four boolean observations (report what you see; do not adjust your "
         "scores for them):\n"
      << "- factual_error_in_steps: a factual error is present in the reasoning steps\n"
      << "- required_step_missing: a step required to solve the problems is missing\n"
      << "- background_mostly_tangential: much of the background is tangential\n"
      << "- step_boundaries_unclear: step boundaries are unclear or terminology is "
         "inconsistent\n\n"
      << "Respond with strict JSON only, exactly this schema:\n"
      << kJudgeSchema << "\n\n"
      << "Instruction to evaluate:\n\n"
      << instr.raw;
  return out.str();
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

RubricScore parse_judge_response(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    auto open = text.find('{');
    auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      throw JudgeParseError("reply is not JSON");
    }
    try {
      j = json::parse(text.substr(open, close - open + 1));
    } catch (const json::exception& e) {
      throw JudgeParseError(std::string("reply is not JSON: ") + e.what());
    }
  }

  RubricScore score;
  for (std::size_t i = 0; i < kRubricAxes.size(); ++i) {
    if (!j.contains(kRubricAxes[i])) {
      throw JudgeParseError(std::string("missing score '") + kRubricAxes[i] + "'");
    }
    const json& value = j.at(kRubricAxes[i]);
    if (!value.is_number_integer()) {
      throw JudgeParseError(std::string("score '") + kRubricAxes[i] + "' is not an integer");
    }
    int v = value.get<int>();
    if (v < 1 || v > 5) {
      throw JudgeParseError(std::string("score '") + kRubricAxes[i] + "' = " +
                            std::to_string(v) + " outside [1, 5]");
    }
    score.set_axis(i, v);
  }
  for (const char* flag : {"factual_error_in_steps", "required_step_missing",
                           "background_mostly_tangential", "step_boundaries_unclear"}) {
    if (!j.contains(flag) || !j.at(flag).is_boolean()) {
      throw JudgeParseError(std::string("missing or non-boolean flag '") + flag + "'");
    }
  }
  score.factual_error_in_steps = j.at("factual_error_in_steps").get<bool>();
  score.required_step_missing = j.at("required_step_missing").get<bool>();
  score.background_mostly_tangential = j.at("background_mostly_tangential").get<bool>();
  score.step_boundaries_unclear = j.at("step_boundaries_unclear").get<bool>();
  return score;
}

// ---------------------------------------------------------------------------
// Judging
// ---------------------------------------------------------------------------

JudgedInstruction judge_instruction(const Instruction& instr, ChatClient& judge, int repeats) {
  if (repeats < 1) throw InvalidArgument("repeats must be >= 1");

  JudgedInstruction out;
  out.cluster_id = instr.cluster_id;
  out.variant = instr.variant;
  std::string prompt = judging_prompt(instr);

  for (int run = 0; run < repeats; ++run) {
    RubricScore score;
    try {
      score = parse_judge_response(judge.chat({.user = prompt}));
    } catch (const JudgeParseError&) {
      // one re-ask with the identical prompt
      score = parse_judge_response(judge.chat({.user = prompt}));
    }
    out.runs.push_back(apply_caps(score));
  }

  for (std::size_t axis = 0; axis < kRubricAxes.size(); ++axis) {
    double sum = 0.0;
    for (const auto& run : out.runs) sum += run.axis(axis);
    out.averaged[axis] = sum / static_cast<double>(out.runs.size());
  }
  return out;
}

void to_json(json& j, const JudgedInstruction& s) {
  j = {{"cluster_id", s.cluster_id},
       {"variant", s.variant},
       {"runs", s.runs},
       {"averaged", s.averaged}};
}

void from_json(const json& j, JudgedInstruction& s) {
  j.at("cluster_id").get_to(s.cluster_id);
  j.at("variant").get_to(s.variant);
  j.at("runs").get_to(s.runs);
  j.at("averaged").get_to(s.averaged);
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

JudgeCorpusResult judge_corpus(const std::vector<Instruction>& instructions,
                               ChatClient& judge, int repeats) {
  if (instructions.empty()) throw InvalidArgument("judge_corpus requires instructions");

  JudgeCorpusResult result;
  std::vector<std::optional<JudgedInstruction>> judged(instructions.size());
  std::mutex mu;

  parallel_for(instructions.size(), judge.config().max_concurrency, [&](std::size_t i) {
    try {
      judged[i] = judge_instruction(instructions[i], judge, repeats);
    } catch (const AuthError&) {
      throw;
    } catch (const Error& e) {
      std::lock_guard lock(mu);
      result.failures[instructions[i].cluster_id] = e.what();
    }
  });

  for (auto& item : judged) {
    if (item) result.judged.push_back(std::move(*item));
  }
  result.summary = summarize_judged(result.judged);
  return result;
}

JudgeSummary summarize_judged(const std::vector<JudgedInstruction>& judged) {
  std::map<std::string, std::pair<InstructionVariant, std::vector<std::array<double, 5>>>>
      buckets;
  for (const auto& item : judged) {
    auto& bucket = buckets[item.variant.name()];
    bucket.first = item.variant;
    bucket.second.push_back(item.averaged);
  }

  JudgeSummary summary;
  for (const auto& variant : InstructionVariant::all()) {
    auto it = buckets.find(variant.name());
    if (it == buckets.end()) continue;  // empty buckets omitted
    JudgeSummaryRow row;
    row.variant = it->second.first;
    row.count = static_cast<int>(it->second.second.size());
    for (std::size_t axis = 0; axis < kRubricAxes.size(); ++axis) {
      double sum = 0.0;
      for (const auto& a : it->second.second) sum += a[axis];
      row.means[axis] = sum / static_cast<double>(row.count);
    }
    summary.rows.push_back(row);
  }
  return summary;
}

std::string judge_summary_csv(const JudgeSummary& summary) {
  std::ostringstream out;
  out << "audience,length,knowledge_comprehensiveness,knowledge_relevance,"
         "reasoning_accuracy,reasoning_relevance,clarity\n";
  out.precision(17);
  for (const auto& row : summary.rows) {
    std::string audience = row.variant.audience == Audience::Baseline     ? "baseline"
                           : row.variant.audience == Audience::HighSchool ? "high_school"
                                                                          : "graduate";
    std::string length = row.variant.length == Length::Unconstrained ? "unconstrained"
                         : row.variant.length == Length::Concise     ? "concise"
                                                                     : "verbose";
    out << audience << ',' << length;
    for (double mean : row.means) out << ',' << mean;
    out << '\n';
  }
  return out.str();
}

}  // namespace icr
