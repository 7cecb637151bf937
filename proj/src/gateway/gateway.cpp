#include "gateway/gateway.hpp"

#include <cmath>
#include <fstream>
#include <semaphore>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace straptor::gateway {

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::Llm: return "llm";
    case ProviderKind::Vlm: return "vlm";
    case ProviderKind::Embedding: return "embedding";
  }
  return "llm";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view s) noexcept {
  if (s == "llm") return ProviderKind::Llm;
  if (s == "vlm") return ProviderKind::Vlm;
  if (s == "embedding") return ProviderKind::Embedding;
  return std::nullopt;
}

void validate(const ProviderConfig& cfg) {
  const auto sep = cfg.endpoint.find("://");
  if (sep == std::string::npos || sep == 0 || sep + 3 >= cfg.endpoint.size())
    fail(ErrorCode::InvalidConfig, "endpoint must be an absolute URL: '" + cfg.endpoint + "'");
  const auto scheme = cfg.endpoint.substr(0, sep);
  if (scheme != "http" && scheme != "https" && scheme != "mock")
    fail(ErrorCode::InvalidConfig, "unsupported endpoint scheme '" + scheme + "'");
  if (cfg.timeout_ms <= 0) fail(ErrorCode::InvalidConfig, "timeout_ms must be positive");
  if (cfg.max_concurrency <= 0) fail(ErrorCode::InvalidConfig, "max_concurrency must be positive");
}

std::string make_tag(std::string_view template_id, const std::vector<std::string>& salient_args) {
  auto s = text::slug(text::join(salient_args, " "));
  if (s.size() > 64) s = s.substr(0, 48) + "-" + text::hex64(text::fnv1a64(s)).substr(0, 8);
  return std::string(template_id) + ":" + s;
}

std::string ChatRequest::tag() const { return make_tag(template_id, salient_args); }

std::string embedding_key(std::string_view t) { return text::to_lower(text::collapse_whitespace(t)); }

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension())
    fail(ErrorCode::DimensionMismatch, "cannot compare vectors of dimension " + std::to_string(a.dimension()) +
                                           " and " + std::to_string(b.dimension()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0 || nb == 0) fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  const double s = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(s, -1.0, 1.0);
}

EmbeddingVector hashed_embedding(std::string_view raw, std::size_t dimension) {
  EmbeddingVector v;
  v.values.assign(dimension, 0.0);
  const auto t = " " + embedding_key(raw) + " ";
  if (text::trim(t).empty() || dimension == 0) return v;
  auto bump = [&](std::string_view gram, double weight) {
    const auto h = text::fnv1a64(gram);
    const auto idx = static_cast<std::size_t>(h % dimension);
    v.values[idx] += ((h >> 63) ? -1.0 : 1.0) * weight;
  };
  for (std::size_t i = 0; i + 3 <= t.size(); ++i) bump(std::string_view(t).substr(i, 3), 1.0);
  for (const auto& word : text::split(text::trim(t), ' ')) bump("w:" + word, 2.0);
  double norm = 0;
  for (double x : v.values) norm += x * x;
  if (norm == 0) v.values[0] = 1.0;  // every bucket cancelled out
  return v;
}

// ---------------------------------------------------------------------------

namespace {

ProviderConfig provider_from_json(ProviderKind kind, const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "provider config must be an object");
  ProviderConfig cfg;
  cfg.kind = kind;
  if (j.contains("kind")) {
    auto k = parse_provider_kind(j.at("kind").get<std::string>());
    if (!k || *k != kind) fail(ErrorCode::InvalidConfig, "provider kind does not match its key");
  }
  cfg.endpoint = j.value("endpoint", "");
  cfg.model_name = j.value("model_name", "");
  cfg.auth_env_var = j.value("auth_env_var", "");
  cfg.timeout_ms = j.value("timeout_ms", 60000);
  cfg.max_concurrency = j.value("max_concurrency", 4);
  validate(cfg);
  return cfg;
}

}  // namespace

GatewayConfig GatewayConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, "model config must be a JSON object");
  GatewayConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      auto kind = parse_provider_kind(key);
      if (!kind) fail(ErrorCode::InvalidConfig, "unknown provider key '" + key + "'");
      cfg.providers[*kind] = provider_from_json(*kind, value);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("bad model config: ") + e.what());
  }
  return cfg;
}

GatewayConfig GatewayConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot read config file " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::InvalidConfig, "config file is not valid JSON: " + path.string());
  auto cfg = from_json(j);
  for (auto& [kind, p] : cfg.providers) {
    if (!p.endpoint.starts_with("mock://")) continue;
    std::filesystem::path script = p.endpoint.substr(7);
    if (script.is_relative()) p.endpoint = "mock://" + (path.parent_path() / script).lexically_normal().string();
  }
  return cfg;
}

nlohmann::json GatewayConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [kind, p] : providers)
    j[std::string(to_string(kind))] = {
        {"kind", to_string(kind)},         {"endpoint", p.endpoint},     {"model_name", p.model_name},
        {"auth_env_var", p.auth_env_var}, {"timeout_ms", p.timeout_ms}, {"max_concurrency", p.max_concurrency},
    };
  return j;
}

// ---------------------------------------------------------------------------

struct Gateway::Slot {
  explicit Slot(std::unique_ptr<Provider> p, int limit) : provider(std::move(p)), permits(limit) {}
  std::unique_ptr<Provider> provider;
  std::counting_semaphore<1024> permits;
};

namespace {

class Permit {
 public:
  explicit Permit(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~Permit() { s_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

}  // namespace

Gateway::Gateway(GatewayConfig config, ResourceResolver resolver) : config_(std::move(config)) {
  if (!resolver) resolver = file_resource_resolver(std::filesystem::current_path());
  std::map<std::string, std::shared_ptr<const MockScript>> scripts;
  for (const auto& [kind, cfg] : config_.providers) {
    validate(cfg);
    std::unique_ptr<Provider> provider;
    if (cfg.endpoint.starts_with("mock://")) {
      const auto path = cfg.endpoint.substr(7);
      auto& script = scripts[path];
      if (!script) script = std::make_shared<const MockScript>(MockScript::from_file(path));
      provider = std::make_unique<MockProvider>(script);
    } else {
      provider = std::make_unique<HttpProvider>(cfg, resolver);
    }
    slots_[kind] = std::make_unique<Slot>(std::move(provider), std::min(cfg.max_concurrency, 1024));
  }
}

std::shared_ptr<Gateway> Gateway::scripted(MockScript script) {
  auto shared = std::make_shared<const MockScript>(std::move(script));
  std::shared_ptr<Gateway> g(new Gateway());
  for (auto kind : {ProviderKind::Llm, ProviderKind::Vlm, ProviderKind::Embedding}) {
    ProviderConfig cfg;
    cfg.kind = kind;
    cfg.endpoint = "mock://inline";
    cfg.model_name = "scripted";
    g->config_.providers[kind] = cfg;
    g->slots_[kind] = std::make_unique<Slot>(std::make_unique<MockProvider>(shared), cfg.max_concurrency);
  }
  return g;
}

Gateway::~Gateway() = default;

bool Gateway::has(ProviderKind kind) const { return slots_.count(kind) > 0; }

Gateway::Slot& Gateway::slot(ProviderKind kind) const {
  auto it = slots_.find(kind);
  if (it == slots_.end())
    fail(ErrorCode::InvalidConfig, "no " + std::string(to_string(kind)) + " provider configured");
  return *it->second;
}

std::string Gateway::complete(ProviderKind kind, const ChatRequest& req) const {
  if (kind == ProviderKind::Embedding) fail(ErrorCode::InvalidArgument, "complete() needs an llm or vlm provider");
  if (req.image && kind != ProviderKind::Vlm) fail(ErrorCode::InvalidArgument, "images are only accepted by the vlm provider");
  if (text::trim(req.prompt).empty()) fail(ErrorCode::InvalidArgument, "prompt must not be empty");
  auto& s = slot(kind);
  Permit permit(s.permits);
  return s.provider->complete(req);
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) const {
  if (texts.empty()) fail(ErrorCode::InvalidArgument, "embed() needs at least one text");
  auto& s = slot(ProviderKind::Embedding);
  std::vector<EmbeddingVector> out;
  {
    Permit permit(s.permits);
    out = s.provider->embed(texts);
  }
  if (out.size() != texts.size())
    fail(ErrorCode::MalformedResponse, "provider returned " + std::to_string(out.size()) + " vectors for " +
                                           std::to_string(texts.size()) + " texts");
  for (const auto& v : out) {
    if (v.dimension() != out.front().dimension())
      fail(ErrorCode::DimensionMismatch, "provider returned vectors of dimension " +
                                             std::to_string(out.front().dimension()) + " and " +
                                             std::to_string(v.dimension()));
    for (double x : v.values)
      if (!std::isfinite(x)) fail(ErrorCode::MalformedResponse, "provider returned a non-finite embedding value");
  }
  return out;
}

ResourceResolver file_resource_resolver(std::filesystem::path root) {
  return [root = std::move(root)](const std::string& id) {
    std::filesystem::path p(id);
    if (p.is_relative()) p = root / p;
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read image resource '" + id + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto ext = text::file_extension_lower(id);
    return std::make_pair(ss.str(), std::string(ext == ".png" ? "image/png" : "image/jpeg"));
  };
}

}  // namespace straptor::gateway
