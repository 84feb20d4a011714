#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "icr/errors.hpp"
#include "icr/instructgen.hpp"
#include "icr/mock_backends.hpp"

using namespace icr;
using namespace icr::test;

namespace {

std::vector<Question> cluster_of(int n) {
  std::vector<Question> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(make_question("m" + std::to_string(i), "member stem " + std::to_string(i),
                                {"one", "two", "three"}, 'B'));
  }
  return out;
}

BackendConfig mock_cfg() {
  BackendConfig cfg;
  cfg.base_url = "mock://";
  cfg.model_name = "gen-model";
  cfg.max_concurrency = 1;  // keeps retry attribution deterministic in tests
  return cfg;
}

}  // namespace

TEST_CASE("sample_examples: small clusters return everything, larger ones cap at 5") {
  auto three = cluster_of(3);
  auto sampled = sample_examples(three, 1);
  CHECK(sampled.size() == 3);
  std::set<std::string> ids;
  for (const auto& q : sampled) ids.insert(q.id);
  CHECK(ids.size() == 3);

  auto twelve = cluster_of(12);
  CHECK(sample_examples(twelve, 1).size() == 5);
  CHECK_THROWS_AS(sample_examples({}, 1), InvalidArgument);
}

TEST_CASE("sample_examples is deterministic per seed and varies across seeds") {
  auto members = cluster_of(12);
  auto a = sample_examples(members, 1);
  auto b = sample_examples(members, 1);
  CHECK(a == b);

  int differing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s1 = sample_examples(members, seed);
    auto s2 = sample_examples(members, seed + 1);
    CHECK(s1.size() == 5);
    std::set<std::string> ids;
    for (const auto& q : s1) ids.insert(q.id);
    CHECK(ids.size() == 5);  // without replacement
    if (s1 != s2) ++differing;
  }
  CHECK(differing >= 18);  // distinct seeds almost always differ
}

TEST_CASE("the five shipped templates carry the required sentinels") {
  const TemplateSet& set = TemplateSet::standard();
  for (const auto& variant : InstructionVariant::all()) {
    const std::string& tmpl = set.for_variant(variant);
    CHECK(tmpl.find("Your response must contain exactly these two sections with these exact "
                    "headers:") != std::string::npos);
    CHECK(tmpl.find(kBackgroundHeader) != std::string::npos);
    CHECK(tmpl.find(kReasoningHeader) != std::string::npos);
    CHECK(tmpl.find("{EXAMPLES}") != std::string::npos);
    CHECK(tmpl.find("<examples>") != std::string::npos);
    CHECK(tmpl.find("</examples>") != std::string::npos);
    CHECK(tmpl.find("Here are the examples to analyze:") != std::string::npos);
  }
  // audience/length markers distinguish the variants
  CHECK(set.high_school_concise.find("**high school students**") != std::string::npos);
  CHECK(set.high_school_concise.find("**short and practical**") != std::string::npos);
  CHECK(set.high_school_verbose.find("**comprehensive, encouraging**") != std::string::npos);
  CHECK(set.graduate_concise.find("**graduate-level students**") != std::string::npos);
  CHECK(set.graduate_verbose.find("**comprehensive, thorough**") != std::string::npos);
  CHECK(set.baseline.find("The instructions must work for every example provided.") !=
        std::string::npos);
}

TEST_CASE("render_prompt places numbered blocks inside the examples tags") {
  auto examples = sample_examples(cluster_of(5), 3);
  std::string prompt = render_prompt(TemplateSet::standard().baseline, examples);

  CHECK(prompt.find(examples[0].stem) != std::string::npos);
  CHECK(prompt.find(kBackgroundHeader) != std::string::npos);
  CHECK(prompt.find(kReasoningHeader) != std::string::npos);
  CHECK(prompt.find("{EXAMPLES}") == std::string::npos);

  // exactly 5 numbered blocks between the tags
  auto open = prompt.find("<examples>");
  auto close = prompt.find("</examples>");
  REQUIRE(open != std::string::npos);
  REQUIRE(close != std::string::npos);
  std::string inner = prompt.substr(open, close - open);
  int blocks = 0;
  for (int i = 1; i <= 9; ++i) {
    if (inner.find("Example " + std::to_string(i) + ":") != std::string::npos) ++blocks;
  }
  CHECK(blocks == 5);
  CHECK(inner.find("Correct Answer: B") != std::string::npos);
}

TEST_CASE("render_prompt without a placeholder slot fails") {
  CHECK_THROWS_AS(render_prompt("no slot here", cluster_of(1)), MissingPlaceholder);
  CHECK_THROWS_AS(render_prompt(TemplateSet::standard().baseline, {}), InvalidArgument);
}

TEST_CASE("parse_instruction recovers both sections") {
  std::string raw = "Some preamble the model added.\n\n## Background Knowledge\nFact one.\n"
                    "Fact two.\n\n## Reasoning Steps\n1. Do this.\n2. Then that.";
  Instruction instr = parse_instruction(raw, "c1", InstructionVariant::baseline(), {"m0"});
  CHECK(instr.background == "Fact one.\nFact two.");
  CHECK(instr.reasoning == "1. Do this.\n2. Then that.");
  CHECK(instr.raw == raw);
  CHECK(instr.token_len > 0);
  CHECK(instr.cluster_id == "c1");
}

TEST_CASE("parse_instruction error paths") {
  auto variant = InstructionVariant::baseline();
  CHECK_THROWS_AS(parse_instruction("## Background Knowledge\nonly facts", "c", variant, {}),
                  MalformedInstruction);
  CHECK_THROWS_AS(parse_instruction("## Reasoning Steps\nonly steps", "c", variant, {}),
                  MalformedInstruction);
  // reversed headers
  CHECK_THROWS_AS(parse_instruction("## Reasoning Steps\nsteps\n## Background Knowledge\nfacts",
                                    "c", variant, {}),
                  MalformedInstruction);
  // empty bodies
  CHECK_THROWS_AS(parse_instruction("## Background Knowledge\n\n## Reasoning Steps\nsteps",
                                    "c", variant, {}),
                  MalformedInstruction);
  CHECK_THROWS_AS(parse_instruction("## Background Knowledge\nfacts\n## Reasoning Steps\n\n",
                                    "c", variant, {}),
                  MalformedInstruction);
}

TEST_CASE("parse after reconstruct is the identity on both sections") {
  std::vector<std::pair<std::string, std::string>> cases = {
      {"facts", "steps"},
      {"multi\nline\nbackground", "1. a\n2. b\n3. c"},
      {"contains ## inline marker", "step with trailing spaces"},
  };
  for (const auto& [bg, rs] : cases) {
    Instruction instr = parse_instruction(reconstruct_raw(bg, rs), "c",
                                          InstructionVariant::baseline(), {});
    CHECK(instr.background == bg);
    CHECK(instr.reasoning == rs);
  }
}

TEST_CASE("ablation keeps exactly one section") {
  Instruction instr = parse_instruction(reconstruct_raw("facts here", "steps here"), "c",
                                        InstructionVariant::high_school_concise(), {});
  std::string knowledge = ablate_instruction(instr, AblationMode::KnowledgeOnly);
  CHECK(knowledge.find(kBackgroundHeader) != std::string::npos);
  CHECK(knowledge.find(kReasoningHeader) == std::string::npos);
  CHECK(knowledge.find("facts here") != std::string::npos);
  CHECK(knowledge.find("steps here") == std::string::npos);

  std::string reasoning = ablate_instruction(instr, AblationMode::ReasoningOnly);
  CHECK(reasoning.find(kReasoningHeader) != std::string::npos);
  CHECK(reasoning.find("facts here") == std::string::npos);

  // the two ablations partition the canonical raw text
  std::string joined = knowledge + "\n\n" + reasoning;
  CHECK(joined == reconstruct_raw(instr.background, instr.reasoning));
}

TEST_CASE("generate_corpus produces one instruction per cluster with mocks") {
  TempDir tmp("gen");
  std::vector<LabeledCluster> clusters = {
      {"ca", {"m0", "m1"}}, {"cb", {"m2"}}, {"cc", {"m3", "m4"}}};
  std::map<std::string, Question> by_id;
  for (const auto& q : cluster_of(5)) by_id[q.id] = q;

  auto transport = std::make_shared<MockChatTransport>(instruction_script());
  ChatClient chat(transport, mock_cfg());
  InstructionStore store(tmp.path() / "instructions");

  GenerationResult result = generate_corpus(clusters, by_id,
                                            InstructionVariant::graduate_concise(), chat,
                                            store, "t0.2", {});
  CHECK(result.instructions.size() == 3);
  CHECK(result.failures.empty());
  CHECK(result.chat_calls == 3);
  for (const auto& instr : result.instructions) {
    CHECK(!instr.background.empty());
    CHECK(!instr.reasoning.empty());
    CHECK(instr.example_ids.size() >= 1);
    CHECK(instr.example_ids.size() <= 5);
  }

  // resumability: a re-run issues zero chat calls
  GenerationResult again = generate_corpus(clusters, by_id,
                                           InstructionVariant::graduate_concise(), chat,
                                           store, "t0.2", {});
  CHECK(again.chat_calls == 0);
  CHECK(again.skipped == 3);
  CHECK(again.instructions.size() == 3);
}

TEST_CASE("malformed completions retry with the identical prompt, then record failure") {
  TempDir tmp("gen-retry");
  std::vector<LabeledCluster> clusters = {{"c1", {"m0"}}, {"c2", {"m1"}}, {"c3", {"m2"}}};
  std::map<std::string, Question> by_id;
  for (const auto& q : cluster_of(3)) by_id[q.id] = q;

  SUBCASE("fails once then succeeds") {
    int call = 0;
    std::string first_prompt, second_prompt;
    auto transport = std::make_shared<MockChatTransport>([&](const ChatRequest& req) {
      ++call;
      if (call == 1) {
        first_prompt = req.user;
        return std::string("no headers at all");
      }
      if (call == 2) second_prompt = req.user;
      return reconstruct_raw("facts", "steps");
    });
    ChatClient chat(transport, mock_cfg());
    InstructionStore store(tmp.path() / "a");
    GenerationResult result = generate_corpus(clusters, by_id, InstructionVariant::baseline(),
                                              chat, store, "t0", {});
    CHECK(result.instructions.size() == 3);
    CHECK(result.retries.size() == 1);
    CHECK(result.failures.empty());
    CHECK(second_prompt == first_prompt);  // identical prompt on retry
  }

  SUBCASE("persistent malformed output becomes a recorded failure") {
    auto transport = std::make_shared<MockChatTransport>(fixed_script("still not valid"));
    ChatClient chat(transport, mock_cfg());
    InstructionStore store(tmp.path() / "b");
    GenerationOptions options;
    options.max_retries = 2;
    GenerationResult result = generate_corpus(clusters, by_id, InstructionVariant::baseline(),
                                              chat, store, "t0", options);
    CHECK(result.instructions.empty());
    CHECK(result.failures.size() == 3);
    CHECK(result.chat_calls == 9);  // 3 attempts per cluster

    // failed clusters are retried on the next run
    auto transport2 = std::make_shared<MockChatTransport>(instruction_script());
    ChatClient chat2(transport2, mock_cfg());
    GenerationResult second = generate_corpus(clusters, by_id, InstructionVariant::baseline(),
                                              chat2, store, "t0", options);
    CHECK(second.instructions.size() == 3);
    CHECK(second.failures.empty());
  }
}

TEST_CASE("auth errors abort generation instead of being swallowed") {
  TempDir tmp("gen-auth");
  std::vector<LabeledCluster> clusters = {{"c1", {"m0"}}};
  std::map<std::string, Question> by_id;
  for (const auto& q : cluster_of(1)) by_id[q.id] = q;

  auto transport = std::make_shared<MockChatTransport>(
      [](const ChatRequest&) -> std::string { throw AuthError("no key"); });
  ChatClient chat(transport, mock_cfg());
  InstructionStore store(tmp.path() / "s");
  CHECK_THROWS_AS(generate_corpus(clusters, by_id, InstructionVariant::baseline(), chat, store,
                                  "t0", {}),
                  AuthError);
}

TEST_CASE("store files are deterministic and reload exactly") {
  TempDir tmp("store");
  InstructionStore store(tmp.path());
  InstructionStore::Contents contents;
  Instruction instr = parse_instruction(reconstruct_raw("b", "r"), "cl-1",
                                        InstructionVariant::high_school_verbose(), {"m0"});
  contents.instructions["cl-1"] = instr;
  contents.failures["cl-2"] = "boom";
  store.save("t0.3", InstructionVariant::high_school_verbose(), contents);

  auto loaded = store.load("t0.3", InstructionVariant::high_school_verbose());
  CHECK(loaded.instructions.at("cl-1") == instr);
  CHECK(loaded.failures.at("cl-2") == "boom");
  CHECK(store.exists("t0.3", InstructionVariant::high_school_verbose()));
  CHECK(!store.exists("t0.3", InstructionVariant::baseline()));
}
