#include "icr/tokens.hpp"

#include <map>
#include <mutex>

#include "icr/errors.hpp"

namespace icr {

namespace {

std::mutex registry_mu;
std::map<std::string, std::function<int(const std::string&)>>& registry() {
  static std::map<std::string, std::function<int(const std::string&)>> r;
  return r;
}

}  // namespace

int count_tokens(const std::string& text, const std::string& tokenizer_id) {
  if (tokenizer_id == kBytesPer4Tokenizer) {
    return static_cast<int>((text.size() + 3) / 4);
  }
  std::function<int(const std::string&)> fn;
  {
    std::lock_guard lock(registry_mu);
    auto it = registry().find(tokenizer_id);
    if (it == registry().end()) {
      throw UnknownTokenizer("no tokenizer registered under '" + tokenizer_id + "'");
    }
    fn = it->second;
  }
  return fn(text);
}

void register_tokenizer(const std::string& tokenizer_id,
                        std::function<int(const std::string&)> fn) {
  std::lock_guard lock(registry_mu);
  registry()[tokenizer_id] = std::move(fn);
}

bool has_tokenizer(const std::string& tokenizer_id) {
  if (tokenizer_id == kBytesPer4Tokenizer) return true;
  std::lock_guard lock(registry_mu);
  return registry().count(tokenizer_id) > 0;
}

}  // namespace icr
