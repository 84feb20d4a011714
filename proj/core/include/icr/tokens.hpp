#pragma once

#include <functional>
#include <string>

namespace icr {

/// Built-in "bytes/4" counter: ceil(byte length / 4).
inline constexpr const char* kBytesPer4Tokenizer = "bytes/4";

/// Deterministic nonnegative token count for text under the named method.
/// Throws UnknownTokenizer for unregistered ids.
int count_tokens(const std::string& text, const std::string& tokenizer_id);

/// Hook for plugging an external tokenizer (e.g. a real BPE) behind an id.
/// Registered functions must be pure.
void register_tokenizer(const std::string& tokenizer_id,
                        std::function<int(const std::string&)> fn);

bool has_tokenizer(const std::string& tokenizer_id);

}  // namespace icr
