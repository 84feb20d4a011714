#include "icr/templates.hpp"

#include "icr/errors.hpp"

namespace icr {

namespace {

const char* kBaseline =
    R"(You are tasked with creating an instruction guide based on a set of examples of similar problems. Carefully examine these examples to identify common patterns, concepts, and problem-solving approaches. Your analysis should focus on extracting knowledge and reasoning patterns.

Consider the examples as a whole to understand their complexity and domain. Let the nature of the questions guide how simple or sophisticated and detailed your instructions should be. Write in clear, instructional language as if teaching someone how to solve this type of problem, using terminology and explanations that match the level demonstrated in the examples.

Your response must contain exactly these two sections with these exact headers:

## Background Knowledge
Present the essential principles, definitions, or rules that are directly relevant across the examples. Include important patterns that help distinguish correct from incorrect answers. For each key point, indicate whether it strongly determines the answer when present, provides helpful support, or might mislead if given too much weight. Use the language and concepts appropriate to the field and complexity level shown in the examples.

## Reasoning Steps
Provide a clear approach that works across examples, connecting each step to the background knowledge. Start by identifying what the question is asking and what key information or clues to look for. Explain how to apply the most important knowledge first, and when certain clues should override other considerations. Address how to weigh different types of evidence and handle situations where answers might seem similar. When relevant, explain how to tell apart commonly confused options. End by stating what should determine the final choice.

Here are the examples to analyze:

<examples>
{EXAMPLES}
</examples>

The instructions must work for every example provided.)";

const char* kHighSchoolConcise =
    R"(You are tasked with creating a **quick, practical** instruction guide for **high school students** based on a set of examples of similar problems. Carefully examine these examples to identify common patterns, concepts, and problem-solving approaches. Your analysis should focus on extracting knowledge and reasoning patterns.

Write in **clear, simple language** that high school students can understand quickly. Keep your response **short and practical** - focus only on what students need to know to solve the problem. Your response must contain exactly these two sections with these exact headers:

## Background Knowledge
Present the essential concepts needed to solve these problems. Include important patterns that help distinguish correct from incorrect answers. For each key point, indicate whether it strongly determines the answer when present, provides helpful support, or might mislead if given too much weight. **Use simple language and keep explanations short and practical.**

## Reasoning Steps
Provide a clear approach that works across examples, connecting each step to the background knowledge. Start by identifying what the question is asking and what key information or clues to look for. Explain how to apply the most important knowledge first, and when certain clues should override other considerations. Address how to weigh different types of evidence and handle situations where answers might seem similar. When relevant, explain how to tell apart commonly confused options. End by stating what should determine the final choice. **Keep steps clear and practical.** Here are the examples to analyze:

<examples>
{EXAMPLES}
</examples>

The instruction guide must work for every example provided.)";

const char* kHighSchoolVerbose =
    R"(You are tasked with creating a **comprehensive, encouraging** instruction guide for **high school students** based on a set of examples of similar problems. Carefully examine these examples to identify common patterns, concepts, and problem-solving approaches. Your analysis should focus on extracting knowledge and reasoning patterns.

Write in **clear, encouraging language** that builds confidence for high school students. Provide **detailed explanations** to help students really understand. Your response must contain exactly these two sections with these exact headers:

## Background Knowledge
Present the essential concepts that directly help solve these problems. Include important patterns that help distinguish correct from incorrect answers. For each key point, indicate whether it strongly determines the answer when present, provides helpful support, or might mislead if given too much weight. **Use encouraging, detailed language with examples.** Connect new concepts to things students already know and explain why principles work the way they do.

## Reasoning Steps
Provide a detailed approach that works across examples, connecting each step to the background knowledge with encouraging explanations. Start by identifying what the question is asking and what key information or clues to look for. Explain how to apply the most important knowledge first, and when certain clues should override other considerations. Address how to weigh different types of evidence and handle situations where answers might seem similar. When relevant, explain how to tell apart commonly confused options by describing the key differences. End by stating what should determine the final choice and explain why. **Remember to explain the "why" behind each step to build understanding and confidence.** Here are the examples to analyze:

<examples>
{EXAMPLES}
</examples>

The instruction guide must work for every example provided.)";

const char* kGraduateConcise =
    R"(You are tasked with creating a **concise** instruction guide for **graduate-level students** based on a set of examples of similar problems. Carefully examine these examples to identify common patterns, concepts, and problem-solving approaches. Your analysis should focus on extracting knowledge and reasoning patterns.

Write in precise, **graduate-level language** using terminology appropriate for the domain. Keep your response **concise and focused on essential information only**. Your response must contain exactly these two sections with these exact headers:

## Background Knowledge
Present the essential principles, definitions, and domain knowledge directly relevant across most examples. Include important patterns that help distinguish correct from incorrect answers, even if they appear less frequently. For each key point, indicate whether it strongly determines the answer when present, provides helpful support, or might mislead if given too much weight. **Use precise graduate-level terminology.**

## Reasoning Steps
Provide a systematic approach that works across examples, connecting each step to the background knowledge. Start by identifying what the question is asking and what key information or clues to look for. Explain how to apply the most important knowledge first, and when certain clues should override other considerations. Address how to weigh different types of evidence and handle situations where answers might seem similar. When relevant, explain how to tell apart commonly confused options. End by stating what should determine the final choice. **Keep explanations concise but complete.** Here are the examples to analyze:

<examples>
{EXAMPLES}
</examples>

The instruction guide must work for every example provided.)";

const char* kGraduateVerbose =
    R"(You are tasked with creating a **comprehensive, thorough** instruction guide for **graduate students** based on a set of examples of similar problems. Carefully examine these examples to identify common patterns, concepts, and problem-solving approaches. Your analysis should focus on extracting knowledge and reasoning patterns.

Write in precise, **graduate-level language** using **advanced terminology** appropriate for the domain. Provide **comprehensive coverage and detailed explanations**. Your response must contain exactly these two sections with these exact headers:

## Background Knowledge
Present comprehensive coverage of the essential principles, definitions, and domain knowledge directly relevant across most examples. Include important patterns that help distinguish correct from incorrect answers, even if they appear less frequently. For each key point, indicate whether it strongly determines the answer when present, provides helpful support, or might mislead if given too much weight. **Use precise graduate-level terminology.** Include detailed definitions with theoretical context, fundamental principles, complex relationships between concepts, and connections to broader theory when directly applicable.

## Reasoning Steps
Provide a comprehensive approach that works across examples, connecting each step to the background knowledge with detailed explanations. Start by identifying what the question is asking and what key information or clues to look for. Explain how to apply the most important knowledge first, and when certain clues should override other considerations. Address how to weigh different types of evidence and handle situations where answers might seem similar, explaining the theoretical foundations behind this hierarchy. When relevant, explain how to tell apart commonly confused options by comprehensively comparing the alternatives. Include multiple solution approaches when applicable, discuss trade-offs between methods, and address edge cases. End by stating what should determine the final choice with theoretical justification. Here are the examples to analyze:

<examples>
{EXAMPLES}
</examples>

The instruction guide must work for every example provided.)";

}  // namespace

const TemplateSet& TemplateSet::standard() {
  static const TemplateSet set = {kBaseline, kHighSchoolConcise, kHighSchoolVerbose,
                                  kGraduateConcise, kGraduateVerbose};
  return set;
}

const std::string& TemplateSet::for_variant(const InstructionVariant& v) const {
  if (!v.valid()) throw InvalidArgument("invalid instruction variant pairing");
  if (v.audience == Audience::Baseline) return baseline;
  if (v.audience == Audience::HighSchool) {
    return v.length == Length::Concise ? high_school_concise : high_school_verbose;
  }
  return v.length == Length::Concise ? graduate_concise : graduate_verbose;
}

}  // namespace icr
