#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace straptor::gateway {

enum class ProviderKind { Llm, Vlm, Embedding };

std::string_view to_string(ProviderKind kind) noexcept;
std::optional<ProviderKind> parse_provider_kind(std::string_view s) noexcept;

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Llm;
  // Absolute URL: http(s)://host[:port]/base for OpenAI-compatible services,
  // or mock://<script.json> for the scripted offline provider.
  std::string endpoint;
  std::string model_name;
  std::string auth_env_var;  // name of the variable holding the key, never the key
  int timeout_ms = 60000;
  int max_concurrency = 4;
};

// Throws InvalidConfig for relative endpoints or non-positive timeouts.
void validate(const ProviderConfig& cfg);

struct ChatRequest {
  // The mock provider keys on template_id + salient_args only, so prompt
  // wording can change without invalidating scripts.
  std::string template_id;
  std::vector<std::string> salient_args;
  std::string prompt;
  std::optional<std::string> image;  // resource id, VLM only
  double temperature = 0.0;

  std::string tag() const;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dimension() const { return values.size(); }
};

// template_id + ":" + slug of the joined arguments; long slugs are shortened
// to a 48-character prefix plus a hash of the full slug.
std::string make_tag(std::string_view template_id, const std::vector<std::string>& salient_args);

// Key used by the mock for embedding lookups.
std::string embedding_key(std::string_view text);

// dot(a,b) / (|a||b|); throws DimensionMismatch or ZeroVector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Deterministic character-trigram embedding; identical strings map to
// identical vectors and non-empty strings to non-zero vectors.
EmbeddingVector hashed_embedding(std::string_view text, std::size_t dimension);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const ChatRequest& req) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

// Canned responses keyed by request tag. Lookups are pure: a tag always maps
// to the same response for the lifetime of the script.
class MockScript {
 public:
  MockScript() = default;
  static MockScript from_json(const nlohmann::json& j);
  static MockScript from_file(const std::filesystem::path& path);

  MockScript& complete_with(std::string tag, std::string response);
  MockScript& embed_with(std::string text, std::vector<double> vector);
  MockScript& fail_with(std::string tag, std::string error_code);
  MockScript& use_hashed_embeddings(std::size_t dimension = 64);

  std::string completion(const std::string& tag) const;
  EmbeddingVector embedding(const std::string& text) const;

  nlohmann::json to_json() const;

 private:
  void maybe_fail(const std::string& tag) const;

  std::map<std::string, std::string> completions_;
  std::map<std::string, std::vector<double>> embeddings_;
  std::map<std::string, std::string> failures_;
  std::optional<std::size_t> hashed_dimension_;
};

class MockProvider final : public Provider {
 public:
  explicit MockProvider(std::shared_ptr<const MockScript> script) : script_(std::move(script)) {}
  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  std::shared_ptr<const MockScript> script_;
};

// Resolves an image resource id to (bytes, mime type).
using ResourceResolver = std::function<std::pair<std::string, std::string>(const std::string& resource_id)>;

// OpenAI-compatible chat/completions and embeddings over HTTP(S).
class HttpProvider final : public Provider {
 public:
  HttpProvider(ProviderConfig cfg, ResourceResolver resolver);
  std::string complete(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  std::string api_key() const;
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  ProviderConfig cfg_;
  ResourceResolver resolver_;
  std::string scheme_host_port_;
  std::string base_path_;
};

struct GatewayConfig {
  std::map<ProviderKind, ProviderConfig> providers;

  static GatewayConfig from_json(const nlohmann::json& j);
  // Relative mock:// script paths resolve against the config file's directory.
  static GatewayConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// The only component that talks to model providers. Shareable across threads;
// each provider admits at most max_concurrency in-flight requests.
class Gateway {
 public:
  explicit Gateway(GatewayConfig config, ResourceResolver resolver = {});
  // Every provider kind served by the same in-memory script.
  static std::shared_ptr<Gateway> scripted(MockScript script);
  ~Gateway();

  bool has(ProviderKind kind) const;
  const GatewayConfig& config() const { return config_; }

  // kind must be Llm or Vlm; an image is only accepted for Vlm.
  std::string complete(ProviderKind kind, const ChatRequest& req) const;
  // One vector per text, order preserved, uniform dimension.
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const;

 private:
  struct Slot;
  Gateway() = default;
  Slot& slot(ProviderKind kind) const;

  GatewayConfig config_;
  std::map<ProviderKind, std::unique_ptr<Slot>> slots_;
};

ResourceResolver file_resource_resolver(std::filesystem::path root);

}  // namespace straptor::gateway
