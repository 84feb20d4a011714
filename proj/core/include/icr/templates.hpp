#pragma once

#include <string>

#include "icr/types.hpp"

namespace icr {

/// The five generation prompt templates. Each contains exactly one
/// {EXAMPLES} placeholder and demands the two exact section headers that
/// parse_instruction recovers.
struct TemplateSet {
  std::string baseline;
  std::string high_school_concise;
  std::string high_school_verbose;
  std::string graduate_concise;
  std::string graduate_verbose;

  const std::string& for_variant(const InstructionVariant& v) const;

  /// The shipped templates.
  static const TemplateSet& standard();
};

inline constexpr const char* kExamplesPlaceholder = "{EXAMPLES}";

}  // namespace icr
