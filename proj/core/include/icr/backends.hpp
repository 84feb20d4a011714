#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icr/concurrency.hpp"
#include "icr/embedding_cache.hpp"
#include "icr/types.hpp"

namespace icr {

// ---------------------------------------------------------------------------
// Requests and configuration
// ---------------------------------------------------------------------------

/// One chat completion request. Sampling fields left unset resolve to the
/// standard settings (temperature 0.7, top_p 0.95) before the request is
/// handed to the transport, so transport logs show the effective values.
struct ChatRequest {
  std::optional<std::string> system;
  std::string user;
  std::optional<double> temperature;  // [0, 2]
  std::optional<double> top_p;        // (0, 1]
  int max_tokens = 1024;

  static constexpr double kDefaultTemperature = 0.7;
  static constexpr double kDefaultTopP = 0.95;

  double effective_temperature() const { return temperature.value_or(kDefaultTemperature); }
  double effective_top_p() const { return top_p.value_or(kDefaultTopP); }
};

struct BackendConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env_var;  // name of the env var holding the key; empty = no auth
  double timeout_s = 60.0;
  int max_retries = 3;      // total attempts before NetworkError propagates
  int max_concurrency = 4;  // requests in flight at once

  void validate() const;
};

void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

// ---------------------------------------------------------------------------
// Transports: one attempt against a concrete service
// ---------------------------------------------------------------------------

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Single attempt. Throws NetworkError / AuthError / EmptyCompletion.
  virtual std::string complete(const ChatRequest& request, const BackendConfig& cfg) = 0;
};

class EmbeddingTransport {
 public:
  virtual ~EmbeddingTransport() = default;
  /// Single attempt, order-preserving. Throws NetworkError / AuthError /
  /// DimensionMismatch.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                                 const BackendConfig& cfg) = 0;
};

/// OpenAI-compatible REST transports (POST /v1/chat/completions and
/// POST /v1/embeddings). The same client shape covers hosted services and
/// local inference servers.
std::shared_ptr<ChatTransport> make_http_chat_transport();
std::shared_ptr<EmbeddingTransport> make_http_embedding_transport();

/// Builds a transport from cfg.base_url. URLs with the mock:// scheme select
/// deterministic offline transports (see mock_backends.hpp for the forms);
/// anything else is treated as an OpenAI-compatible HTTP endpoint.
std::shared_ptr<ChatTransport> make_chat_transport(const BackendConfig& cfg);
std::shared_ptr<EmbeddingTransport> make_embedding_transport(const BackendConfig& cfg);

// ---------------------------------------------------------------------------
// Clients: retries, backoff, concurrency limit, caching
// ---------------------------------------------------------------------------

struct ClientOptions {
  int retry_base_delay_ms = 250;  // doubles per attempt
  int embed_batch_size = 128;     // texts per transport call
};

/// Thread-safe chat client. Applies sampling defaults, validates the request,
/// caps in-flight requests at cfg.max_concurrency, and retries NetworkError
/// with exponential backoff up to cfg.max_retries attempts. AuthError and
/// EmptyCompletion propagate immediately.
class ChatClient {
 public:
  ChatClient(std::shared_ptr<ChatTransport> transport, BackendConfig cfg,
             ClientOptions opts = {});

  std::string chat(ChatRequest request);

  const BackendConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<ChatTransport> transport_;
  BackendConfig cfg_;
  ClientOptions opts_;
  Semaphore gate_;
};

/// Thread-safe embedding client with an optional persistent cache. Results
/// for previously seen (model_name, text) pairs are served from the cache
/// without touching the transport.
class EmbeddingClient {
 public:
  EmbeddingClient(std::shared_ptr<EmbeddingTransport> transport, BackendConfig cfg,
                  std::shared_ptr<EmbeddingCache> cache = nullptr,
                  ClientOptions opts = {});

  /// Order-preserving; output length equals input length; uniform dim.
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

  EmbeddingVector embed_one(const std::string& text);

  const BackendConfig& config() const { return cfg_; }

 private:
  std::vector<std::vector<double>> fetch_with_retry(const std::vector<std::string>& texts);

  std::shared_ptr<EmbeddingTransport> transport_;
  BackendConfig cfg_;
  ClientOptions opts_;
  std::shared_ptr<EmbeddingCache> cache_;
  Semaphore gate_;
};

}  // namespace icr
