#include "icr/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <map>
#include <thread>

#ifdef ICR_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "icr/errors.hpp"
#include "icr/jsonl.hpp"
#include "icr/mock_backends.hpp"

namespace icr {

using nlohmann::json;

void BackendConfig::validate() const {
  if (max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  if (timeout_s <= 0) throw ConfigError("timeout_s must be > 0");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
}

void to_json(json& j, const BackendConfig& c) {
  j = json{{"base_url", c.base_url},
           {"model_name", c.model_name},
           {"api_key_env_var", c.api_key_env_var},
           {"timeout_s", c.timeout_s},
           {"max_retries", c.max_retries},
           {"max_concurrency", c.max_concurrency}};
}

void from_json(const json& j, BackendConfig& c) {
  j.at("base_url").get_to(c.base_url);
  j.at("model_name").get_to(c.model_name);
  c.api_key_env_var = j.value("api_key_env_var", std::string());
  c.timeout_s = j.value("timeout_s", 60.0);
  c.max_retries = j.value("max_retries", 3);
  c.max_concurrency = j.value("max_concurrency", 4);
}

// ---------------------------------------------------------------------------
// HTTP transports (OpenAI-compatible REST shape)
// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
  std::string host;    // scheme://host[:port]
  std::string prefix;  // path prefix, possibly empty
};

ParsedUrl split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("base_url must include a scheme: " + base_url);
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

httplib::Headers auth_headers(const BackendConfig& cfg) {
  httplib::Headers headers;
  if (!cfg.api_key_env_var.empty()) {
    const char* key = std::getenv(cfg.api_key_env_var.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError("environment variable " + cfg.api_key_env_var + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  return headers;
}

json post_json(const BackendConfig& cfg, const std::string& endpoint, const json& body) {
  ParsedUrl url = split_base_url(cfg.base_url);
  httplib::Client client(url.host);
  auto timeout = std::chrono::milliseconds(static_cast<long>(cfg.timeout_s * 1000));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(url.prefix + endpoint, auth_headers(cfg), body.dump(),
                         "application/json");
  if (!res) {
    throw NetworkError("POST " + cfg.base_url + endpoint + " failed: " +
                       httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw AuthError("service rejected the API key (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw NetworkError("POST " + cfg.base_url + endpoint + " returned HTTP " +
                       std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw NetworkError(std::string("malformed JSON response: ") + e.what());
  }
}

class HttpChatTransport : public ChatTransport {
 public:
  std::string complete(const ChatRequest& request, const BackendConfig& cfg) override {
    json messages = json::array();
    if (request.system) {
      messages.push_back({{"role", "system"}, {"content", *request.system}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body = {{"model", cfg.model_name},
                 {"messages", messages},
                 {"temperature", request.effective_temperature()},
                 {"top_p", request.effective_top_p()},
                 {"max_tokens", request.max_tokens}};
    json res = post_json(cfg, "/v1/chat/completions", body);
    std::string content;
    try {
      content = res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw NetworkError(std::string("unexpected completion shape: ") + e.what());
    }
    if (content.empty()) throw EmptyCompletion("service returned empty text");
    return content;
  }
};

class HttpEmbeddingTransport : public EmbeddingTransport {
 public:
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                         const BackendConfig& cfg) override {
    json body = {{"model", cfg.model_name}, {"input", texts}};
    json res = post_json(cfg, "/v1/embeddings", body);
    std::vector<std::vector<double>> out(texts.size());
    std::vector<bool> seen(texts.size(), false);
    try {
      for (const auto& item : res.at("data")) {
        std::size_t idx = item.at("index").get<std::size_t>();
        if (idx >= out.size()) throw NetworkError("embedding index out of range");
        out[idx] = item.at("embedding").get<std::vector<double>>();
        seen[idx] = true;
      }
    } catch (const json::exception& e) {
      throw NetworkError(std::string("unexpected embeddings shape: ") + e.what());
    }
    for (bool s : seen) {
      if (!s) throw NetworkError("service returned fewer embeddings than inputs");
    }
    return out;
  }
};

}  // namespace

std::shared_ptr<ChatTransport> make_http_chat_transport() {
  return std::make_shared<HttpChatTransport>();
}

std::shared_ptr<EmbeddingTransport> make_http_embedding_transport() {
  return std::make_shared<HttpEmbeddingTransport>();
}

// ---------------------------------------------------------------------------
// mock:// URL parsing
// ---------------------------------------------------------------------------

namespace {

std::string url_decode(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else if (s[i] == '+') {
      out += ' ';
    } else {
      out += s[i];
    }
  }
  return out;
}

struct MockUrl {
  std::string path;                                      // e.g. "chat/gold"
  std::vector<std::pair<std::string, std::string>> params;  // repeated keys kept

  std::string get(const std::string& key, const std::string& fallback = "") const {
    for (const auto& [k, v] : params) {
      if (k == key) return v;
    }
    return fallback;
  }
  std::vector<std::string> get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : params) {
      if (k == key) out.push_back(v);
    }
    return out;
  }
};

MockUrl parse_mock_url(const std::string& url) {
  constexpr const char* kScheme = "mock://";
  MockUrl out;
  std::string rest = url.substr(std::string(kScheme).size());
  auto q = rest.find('?');
  out.path = rest.substr(0, q);
  if (q != std::string::npos) {
    std::string query = rest.substr(q + 1);
    std::size_t start = 0;
    while (start <= query.size()) {
      auto amp = query.find('&', start);
      std::string pair = query.substr(start, amp == std::string::npos ? amp : amp - start);
      if (!pair.empty()) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) {
          out.params.emplace_back(url_decode(pair), "");
        } else {
          out.params.emplace_back(url_decode(pair.substr(0, eq)), url_decode(pair.substr(eq + 1)));
        }
      }
      if (amp == std::string::npos) break;
      start = amp + 1;
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    std::string item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!item.empty()) out.push_back(std::stoi(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_mock_url(const std::string& url) { return url.rfind("mock://", 0) == 0; }

}  // namespace

std::shared_ptr<ChatTransport> make_chat_transport(const BackendConfig& cfg) {
  if (!is_mock_url(cfg.base_url)) return make_http_chat_transport();
  MockUrl url = parse_mock_url(cfg.base_url);
  if (url.path == "chat/echo") {
    return std::make_shared<MockChatTransport>(echo_script());
  }
  if (url.path == "chat/fixed") {
    return std::make_shared<MockChatTransport>(fixed_script(url.get("text")));
  }
  if (url.path == "chat/instruction") {
    return std::make_shared<MockChatTransport>(instruction_script());
  }
  if (url.path == "chat/gold") {
    std::vector<Question> questions;
    for (const auto& path : url.get_all("corpus")) {
      auto qs = read_jsonl_as<Question>(path);
      questions.insert(questions.end(), qs.begin(), qs.end());
    }
    if (questions.empty()) {
      throw ConfigError("mock://chat/gold requires at least one corpus=<path> parameter");
    }
    bool require = url.get("require_instructions") == "1";
    return std::make_shared<MockChatTransport>(gold_oracle_script(std::move(questions), require));
  }
  if (url.path == "chat/judge") {
    std::vector<int> scores = parse_int_list(url.get("scores", "5,5,5,5,5"));
    std::vector<bool> flags;
    for (int f : parse_int_list(url.get("flags", "0,0,0,0"))) flags.push_back(f != 0);
    return std::make_shared<MockChatTransport>(judge_script(scores, flags));
  }
  throw ConfigError("unknown mock chat backend: " + cfg.base_url);
}

std::shared_ptr<EmbeddingTransport> make_embedding_transport(const BackendConfig& cfg) {
  if (!is_mock_url(cfg.base_url)) return make_http_embedding_transport();
  MockUrl url = parse_mock_url(cfg.base_url);
  if (url.path == "embedding") {
    int dim = std::stoi(url.get("dim", "64"));
    std::uint64_t seed = std::stoull(url.get("seed", "0"));
    return std::make_shared<MockEmbeddingTransport>(dim, seed);
  }
  throw ConfigError("unknown mock embedding backend: " + cfg.base_url);
}

// ---------------------------------------------------------------------------
// ChatClient
// ---------------------------------------------------------------------------

namespace {

void validate_request(const ChatRequest& req) {
  if (req.user.empty()) throw InvalidArgument("chat request user text is empty");
  double t = req.effective_temperature();
  if (t < 0.0 || t > 2.0) throw InvalidArgument("temperature must be in [0, 2]");
  double p = req.effective_top_p();
  if (p <= 0.0 || p > 1.0) throw InvalidArgument("top_p must be in (0, 1]");
  if (req.max_tokens < 1) throw InvalidArgument("max_tokens must be positive");
}

void backoff_sleep(int base_delay_ms, int attempt) {
  if (base_delay_ms <= 0) return;
  auto delay = std::chrono::milliseconds(static_cast<long>(base_delay_ms) << attempt);
  std::this_thread::sleep_for(delay);
}

}  // namespace

ChatClient::ChatClient(std::shared_ptr<ChatTransport> transport, BackendConfig cfg,
                       ClientOptions opts)
    : transport_(std::move(transport)),
      cfg_(std::move(cfg)),
      opts_(opts),
      gate_(cfg_.max_concurrency) {
  cfg_.validate();
}

std::string ChatClient::chat(ChatRequest request) {
  validate_request(request);
  request.temperature = request.effective_temperature();
  request.top_p = request.effective_top_p();

  SemaphoreGuard guard(gate_);
  for (int attempt = 0;; ++attempt) {
    try {
      return transport_->complete(request, cfg_);
    } catch (const NetworkError&) {
      if (attempt + 1 >= cfg_.max_retries) throw;
      backoff_sleep(opts_.retry_base_delay_ms, attempt);
    }
  }
}

// ---------------------------------------------------------------------------
// EmbeddingClient
// ---------------------------------------------------------------------------

EmbeddingClient::EmbeddingClient(std::shared_ptr<EmbeddingTransport> transport,
                                 BackendConfig cfg, std::shared_ptr<EmbeddingCache> cache,
                                 ClientOptions opts)
    : transport_(std::move(transport)),
      cfg_(std::move(cfg)),
      opts_(opts),
      cache_(std::move(cache)),
      gate_(cfg_.max_concurrency) {
  cfg_.validate();
}

std::vector<std::vector<double>> EmbeddingClient::fetch_with_retry(
    const std::vector<std::string>& texts) {
  SemaphoreGuard guard(gate_);
  for (int attempt = 0;; ++attempt) {
    try {
      return transport_->embed(texts, cfg_);
    } catch (const NetworkError&) {
      if (attempt + 1 >= cfg_.max_retries) throw;
      backoff_sleep(opts_.retry_base_delay_ms, attempt);
    }
  }
}

std::vector<EmbeddingVector> EmbeddingClient::embed_batch(
    const std::vector<std::string>& texts) {
  if (texts.empty()) throw InvalidArgument("embed_batch requires at least one text");
  for (const auto& t : texts) {
    if (t.empty()) throw InvalidArgument("embed_batch texts must be non-empty");
  }

  std::map<std::string, EmbeddingVector> resolved;
  std::vector<std::string> missing;
  for (const auto& t : texts) {
    if (resolved.count(t)) continue;
    if (cache_) {
      if (auto hit = cache_->get(cfg_.model_name, t)) {
        resolved.emplace(t, std::move(*hit));
        continue;
      }
    }
    if (std::find(missing.begin(), missing.end(), t) == missing.end()) {
      missing.push_back(t);
    }
  }

  int batch = std::max(1, opts_.embed_batch_size);
  for (std::size_t start = 0; start < missing.size(); start += batch) {
    std::vector<std::string> chunk(
        missing.begin() + start,
        missing.begin() + std::min(missing.size(), start + batch));
    auto values = fetch_with_retry(chunk);
    if (values.size() != chunk.size()) {
      throw NetworkError("service returned " + std::to_string(values.size()) +
                         " embeddings for " + std::to_string(chunk.size()) + " inputs");
    }
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      EmbeddingVector v;
      v.values = std::move(values[i]);
      v.dim = static_cast<int>(v.values.size());
      v.source_model = cfg_.model_name;
      if (v.norm() == 0.0) throw ZeroVector("service returned a zero embedding");
      if (cache_) cache_->put(cfg_.model_name, chunk[i], v);
      resolved.emplace(chunk[i], std::move(v));
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  int dim = -1;
  for (const auto& t : texts) {
    const EmbeddingVector& v = resolved.at(t);
    if (dim == -1) dim = v.dim;
    if (v.dim != dim) {
      throw DimensionMismatch("service returned inconsistent dims: " + std::to_string(dim) +
                              " vs " + std::to_string(v.dim));
    }
    out.push_back(v);
  }
  return out;
}

EmbeddingVector EmbeddingClient::embed_one(const std::string& text) {
  return embed_batch({text})[0];
}

}  // namespace icr
