#include "icr/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "icr/errors.hpp"
#include "icr/hash.hpp"

namespace icr {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Task / Split
// ---------------------------------------------------------------------------

Task Task::parse(const std::string& name) {
  if (name == "medqa") return medqa();
  if (name == "mmlu_law") return mmlu_law();
  if (name == "mathqa") return mathqa();
  return custom(name);
}

std::string Task::name() const {
  switch (kind) {
    case Kind::MedQA: return "medqa";
    case Kind::MMLULaw: return "mmlu_law";
    case Kind::MathQA: return "mathqa";
    case Kind::Custom: return custom_name;
  }
  return custom_name;
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "' (expected train|test)");
}

// ---------------------------------------------------------------------------
// Question rendering
// ---------------------------------------------------------------------------

std::string render_options(const Question& q) {
  std::string out;
  for (const auto& opt : q.options) {
    out += opt.label;
    out += ". ";
    out += opt.text;
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string embedding_text(const Question& q) {
  return q.stem + "\n" + render_options(q);
}

// ---------------------------------------------------------------------------
// EmbeddingVector
// ---------------------------------------------------------------------------

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

EmbeddingVector EmbeddingVector::normalized() const {
  double n = norm();
  if (n == 0.0) throw ZeroVector("cannot normalize a zero vector");
  EmbeddingVector out = *this;
  for (double& v : out.values) v /= n;
  return out;
}

// ---------------------------------------------------------------------------
// InstructionVariant
// ---------------------------------------------------------------------------

std::string InstructionVariant::name() const {
  if (audience == Audience::Baseline) return "baseline";
  std::string a = audience == Audience::HighSchool ? "high_school" : "graduate";
  std::string l = length == Length::Concise ? "concise" : "verbose";
  return a + "_" + l;
}

InstructionVariant InstructionVariant::parse(const std::string& name) {
  for (const auto& v : all()) {
    if (v.name() == name) return v;
  }
  throw ConfigError("unknown instruction variant '" + name + "'");
}

const std::vector<InstructionVariant>& InstructionVariant::all() {
  static const std::vector<InstructionVariant> variants = {
      baseline(), high_school_concise(), high_school_verbose(),
      graduate_concise(), graduate_verbose()};
  return variants;
}

std::string reconstruct_raw(const std::string& background, const std::string& reasoning) {
  return std::string(kBackgroundHeader) + "\n" + background + "\n\n" +
         kReasoningHeader + "\n" + reasoning;
}

// ---------------------------------------------------------------------------
// Condition
// ---------------------------------------------------------------------------

std::string Condition::name() const {
  switch (kind) {
    case Kind::ZeroShot: return "zero_shot";
    case Kind::Instructed: return "instructed:" + variant.name();
    case Kind::KnowledgeOnly: return "knowledge_only";
    case Kind::ReasoningOnly: return "reasoning_only";
  }
  return "zero_shot";
}

Condition Condition::parse(const std::string& name) {
  if (name == "zero_shot") return zero_shot();
  if (name == "knowledge_only") return knowledge_only();
  if (name == "reasoning_only") return reasoning_only();
  const std::string prefix = "instructed:";
  if (name.rfind(prefix, 0) == 0) {
    return instructed(InstructionVariant::parse(name.substr(prefix.size())));
  }
  throw ConfigError("unknown condition '" + name + "'");
}

// ---------------------------------------------------------------------------
// Corpus validation
// ---------------------------------------------------------------------------

ValidationReport validate_corpus(const std::vector<Question>& questions) {
  ValidationReport report;
  auto flag = [&](const Question& q, const std::string& msg) {
    report.issues.push_back({q.id, msg});
  };

  std::map<std::pair<std::string, Split>, std::set<std::string>> seen_ids;
  for (const auto& q : questions) {
    if (q.options.empty()) {
      flag(q, "question has no options");
    } else {
      std::set<char> labels;
      bool dup = false;
      for (const auto& opt : q.options) {
        if (!labels.insert(opt.label).second) dup = true;
      }
      if (dup) flag(q, "duplicate option label");
      // Contiguity from 'A': the i-th option must be labeled 'A' + i.
      bool contiguous = true;
      for (std::size_t i = 0; i < q.options.size(); ++i) {
        if (q.options[i].label != static_cast<char>(kMinLabel + i)) contiguous = false;
      }
      if (!dup && !contiguous) flag(q, "option labels not contiguous from A");
      if (q.options.back().label > kMaxLabel || q.options.size() > 5) {
        flag(q, "more than 5 options (labels beyond E unsupported)");
      }
      if (!labels.count(q.gold)) flag(q, "gold not among options");
    }

    auto key = std::make_pair(q.task.name(), q.split);
    if (!seen_ids[key].insert(q.id).second) {
      flag(q, "duplicate id within (task, split)");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON conversions
// ---------------------------------------------------------------------------

using nlohmann::json;

void to_json(json& j, const Task& t) { j = t.name(); }
void from_json(const json& j, Task& t) { t = Task::parse(j.get<std::string>()); }

void to_json(json& j, const Option& o) {
  j = json{{"label", std::string(1, o.label)}, {"text", o.text}};
}

void from_json(const json& j, Option& o) {
  std::string label = j.at("label").get<std::string>();
  if (label.size() != 1) throw ConfigError("option label must be a single letter, got '" + label + "'");
  o.label = label[0];
  o.text = j.at("text").get<std::string>();
}

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id},         {"task", q.task},
           {"split", to_string(q.split)}, {"stem", q.stem},
           {"options", q.options}, {"gold", std::string(1, q.gold)}};
}

void from_json(const json& j, Question& q) {
  j.at("id").get_to(q.id);
  j.at("task").get_to(q.task);
  q.split = parse_split(j.at("split").get<std::string>());
  j.at("stem").get_to(q.stem);
  j.at("options").get_to(q.options);
  std::string gold = j.at("gold").get<std::string>();
  if (gold.size() != 1) throw ConfigError("gold must be a single letter, got '" + gold + "'");
  q.gold = gold[0];
}

void to_json(json& j, const EmbeddingVector& v) {
  j = json{{"values", v.values}, {"dim", v.dim}, {"source_model", v.source_model}};
}

void from_json(const json& j, EmbeddingVector& v) {
  j.at("values").get_to(v.values);
  j.at("dim").get_to(v.dim);
  j.at("source_model").get_to(v.source_model);
  if (static_cast<int>(v.values.size()) != v.dim) {
    throw DimensionMismatch("embedding dim field disagrees with values length");
  }
}

void to_json(json& j, const InstructionVariant& v) { j = v.name(); }
void from_json(const json& j, InstructionVariant& v) {
  v = InstructionVariant::parse(j.get<std::string>());
}

void to_json(json& j, const Instruction& i) {
  j = json{{"cluster_id", i.cluster_id}, {"variant", i.variant},
           {"background", i.background}, {"reasoning", i.reasoning},
           {"raw", i.raw},               {"example_ids", i.example_ids},
           {"token_len", i.token_len}};
}

void from_json(const json& j, Instruction& i) {
  j.at("cluster_id").get_to(i.cluster_id);
  j.at("variant").get_to(i.variant);
  j.at("background").get_to(i.background);
  j.at("reasoning").get_to(i.reasoning);
  j.at("raw").get_to(i.raw);
  j.at("example_ids").get_to(i.example_ids);
  j.at("token_len").get_to(i.token_len);
}

void to_json(json& j, const Condition& c) { j = c.name(); }
void from_json(const json& j, Condition& c) { c = Condition::parse(j.get<std::string>()); }

void to_json(json& j, const EvalRecord& r) {
  j = json{{"question_id", r.question_id},
           {"task", r.task},
           {"model_id", r.model_id},
           {"condition", r.condition},
           {"retrieved_cluster_ids", r.retrieved_cluster_ids},
           {"prompt_tokens", r.prompt_tokens},
           {"raw_output", r.raw_output},
           {"extracted_answer",
            r.extracted_answer ? json(std::string(1, *r.extracted_answer)) : json(nullptr)},
           {"correct", r.correct},
           {"threshold_id", r.threshold_id}};
}

void from_json(const json& j, EvalRecord& r) {
  j.at("question_id").get_to(r.question_id);
  j.at("task").get_to(r.task);
  j.at("model_id").get_to(r.model_id);
  j.at("condition").get_to(r.condition);
  j.at("retrieved_cluster_ids").get_to(r.retrieved_cluster_ids);
  j.at("prompt_tokens").get_to(r.prompt_tokens);
  j.at("raw_output").get_to(r.raw_output);
  if (j.at("extracted_answer").is_null()) {
    r.extracted_answer = std::nullopt;
  } else {
    std::string s = j.at("extracted_answer").get<std::string>();
    if (s.size() != 1) throw ConfigError("extracted_answer must be one letter or null");
    r.extracted_answer = s[0];
  }
  j.at("correct").get_to(r.correct);
  j.at("threshold_id").get_to(r.threshold_id);
}

}  // namespace icr
