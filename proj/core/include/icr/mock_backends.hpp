#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "icr/backends.hpp"
#include "icr/types.hpp"

namespace icr {

// Deterministic offline backends. These ship in the library (not test-only):
// the acceptance suite, --dry-run workflows, and downstream users all rely on
// reproducible runs without a network.
//
// Selectable via BackendConfig.base_url:
//   mock://embedding?dim=64&seed=7
//   mock://chat/echo
//   mock://chat/fixed?text=<url-escaped>
//   mock://chat/instruction
//   mock://chat/gold?corpus=<path>[&corpus=<path>...][&require_instructions=1]
//   mock://chat/judge?scores=5,5,5,5,5&flags=0,0,0,0

/// Scripted chat transport with failure injection and a request log.
class MockChatTransport : public ChatTransport {
 public:
  using Script = std::function<std::string(const ChatRequest&)>;

  explicit MockChatTransport(Script script);

  std::string complete(const ChatRequest& request, const BackendConfig& cfg) override;

  /// The next n calls throw NetworkError before reaching the script.
  void fail_next(int n) { fail_remaining_ = n; }

  int calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<ChatRequest> log() const;

 private:
  Script script_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> fail_remaining_{0};
  mutable std::mutex log_mu_;
  std::vector<ChatRequest> log_;
};

/// Seeded hash-based embeddings: the same (seed, text) always yields the same
/// vector, on every platform.
class MockEmbeddingTransport : public EmbeddingTransport {
 public:
  MockEmbeddingTransport(int dim, std::uint64_t seed);

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                         const BackendConfig& cfg) override;

  void fail_next(int n) { fail_remaining_ = n; }
  int calls() const { return calls_.load(); }
  int texts_embedded() const { return texts_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

  static std::vector<double> vector_for(const std::string& text, int dim, std::uint64_t seed);

 private:
  int dim_;
  std::uint64_t seed_;
  std::atomic<int> calls_{0};
  std::atomic<int> texts_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> fail_remaining_{0};
};

// ---------------------------------------------------------------------------
// Prebuilt scripts
// ---------------------------------------------------------------------------

/// Returns the user message verbatim.
MockChatTransport::Script echo_script();

/// Returns the same text on every call.
MockChatTransport::Script fixed_script(std::string text);

/// Returns a well-formed two-section instruction whose bodies are a
/// deterministic function of the prompt, so corpus generation is reproducible.
MockChatTransport::Script instruction_script();

/// Answers with the gold label of whichever question's stem appears in the
/// prompt. With require_instructions set, answers gold only when instruction
/// section text is present in the prompt and refuses otherwise — useful for
/// verifying that the harness detects condition differences.
MockChatTransport::Script gold_oracle_script(std::vector<Question> questions,
                                             bool require_instructions = false);

/// Returns a fixed rubric-score JSON payload.
MockChatTransport::Script judge_script(const std::vector<int>& scores,
                                       const std::vector<bool>& flags);

}  // namespace icr
