#include "icr/mock_backends.hpp"

#include <algorithm>

#include <json.hpp>

#include "icr/errors.hpp"
#include "icr/hash.hpp"

namespace icr {

namespace {

struct InFlightTracker {
  InFlightTracker(std::atomic<int>& in_flight, std::atomic<int>& max_in_flight)
      : in_flight_(in_flight), max_(max_in_flight) {
    int now = ++in_flight_;
    int prev = max_.load();
    while (now > prev && !max_.compare_exchange_weak(prev, now)) {
    }
  }
  ~InFlightTracker() { --in_flight_; }
  std::atomic<int>& in_flight_;
  std::atomic<int>& max_;
};

bool consume_failure(std::atomic<int>& remaining) {
  int expected = remaining.load();
  while (expected > 0) {
    if (remaining.compare_exchange_weak(expected, expected - 1)) return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// MockChatTransport
// ---------------------------------------------------------------------------

MockChatTransport::MockChatTransport(Script script) : script_(std::move(script)) {}

std::string MockChatTransport::complete(const ChatRequest& request, const BackendConfig&) {
  InFlightTracker tracker(in_flight_, max_in_flight_);
  ++calls_;
  {
    std::lock_guard lock(log_mu_);
    log_.push_back(request);
  }
  if (consume_failure(fail_remaining_)) {
    throw NetworkError("injected transport failure");
  }
  return script_(request);
}

std::vector<ChatRequest> MockChatTransport::log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

// ---------------------------------------------------------------------------
// MockEmbeddingTransport
// ---------------------------------------------------------------------------

MockEmbeddingTransport::MockEmbeddingTransport(int dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {}

std::vector<double> MockEmbeddingTransport::vector_for(const std::string& text, int dim,
                                                       std::uint64_t seed) {
  std::uint64_t state = fnv1a64(text) ^ (seed * 0x9e3779b97f4a7c15ull);
  std::vector<double> values(dim);
  for (double& v : values) {
    // map to [-1, 1); never all-zero in practice
    v = static_cast<double>(splitmix64(state) >> 11) / 4503599627370496.0 - 1.0;
  }
  return values;
}

std::vector<std::vector<double>> MockEmbeddingTransport::embed(
    const std::vector<std::string>& texts, const BackendConfig&) {
  InFlightTracker tracker(in_flight_, max_in_flight_);
  ++calls_;
  if (consume_failure(fail_remaining_)) {
    throw NetworkError("injected transport failure");
  }
  texts_ += static_cast<int>(texts.size());
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vector_for(t, dim_, seed_));
  return out;
}

// ---------------------------------------------------------------------------
// Scripts
// ---------------------------------------------------------------------------

MockChatTransport::Script echo_script() {
  return [](const ChatRequest& req) { return req.user; };
}

MockChatTransport::Script fixed_script(std::string text) {
  return [text = std::move(text)](const ChatRequest&) { return text; };
}

MockChatTransport::Script instruction_script() {
  return [](const ChatRequest& req) {
    std::string tag = hex64(fnv1a64(req.user));
    std::string background =
        "Key facts for problem group " + tag +
        ": identify the decisive clue, recall the governing rule, and note "
        "which tempting option it rules out.";
    std::string reasoning =
        "1. Restate what the question asks.\n"
        "2. Match the strongest clue against the governing rule (" + tag + ").\n"
        "3. Eliminate options that contradict the rule.\n"
        "4. Choose the remaining option.";
    return reconstruct_raw(background, reasoning);
  };
}

MockChatTransport::Script gold_oracle_script(std::vector<Question> questions,
                                             bool require_instructions) {
  return [questions = std::move(questions), require_instructions](const ChatRequest& req) {
    if (require_instructions &&
        req.user.find(kBackgroundHeader) == std::string::npos &&
        req.user.find(kReasoningHeader) == std::string::npos) {
      return std::string("I considered the options but cannot decide.");
    }
    // The question block comes after any instruction blocks, so prefer the
    // stem found at the latest position (longest stem on ties).
    const Question* best = nullptr;
    std::size_t best_pos = 0;
    for (const auto& q : questions) {
      if (q.stem.empty()) continue;
      std::size_t pos = req.user.rfind(q.stem);
      if (pos == std::string::npos) continue;
      if (!best || pos > best_pos ||
          (pos == best_pos && q.stem.size() > best->stem.size())) {
        best = &q;
        best_pos = pos;
      }
    }
    if (!best) return std::string("I considered the options but cannot decide.");
    return "Answer: " + std::string(1, best->gold);
  };
}

MockChatTransport::Script judge_script(const std::vector<int>& scores,
                                       const std::vector<bool>& flags) {
  nlohmann::json j = {
      {"knowledge_comprehensiveness", scores.size() > 0 ? scores[0] : 5},
      {"knowledge_relevance", scores.size() > 1 ? scores[1] : 5},
      {"reasoning_accuracy", scores.size() > 2 ? scores[2] : 5},
      {"reasoning_relevance", scores.size() > 3 ? scores[3] : 5},
      {"clarity", scores.size() > 4 ? scores[4] : 5},
      {"factual_error_in_steps", flags.size() > 0 && flags[0]},
      {"required_step_missing", flags.size() > 1 && flags[1]},
      {"background_mostly_tangential", flags.size() > 2 && flags[2]},
      {"step_boundaries_unclear", flags.size() > 3 && flags[3]},
  };
  return fixed_script(j.dump());
}

}  // namespace icr
