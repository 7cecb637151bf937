#include <cstdlib>

#include <httplib.h>

#include "common/error.hpp"
#include "gateway/gateway.hpp"

namespace straptor::gateway {

namespace {

std::string base64(std::string_view in) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const auto n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8) |
                   static_cast<unsigned char>(in[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i < in.size()) {
    const bool two = i + 1 < in.size();
    const auto n = (static_cast<unsigned char>(in[i]) << 16) | (two ? static_cast<unsigned char>(in[i + 1]) << 8 : 0);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += two ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

}  // namespace

HttpProvider::HttpProvider(ProviderConfig cfg, ResourceResolver resolver)
    : cfg_(std::move(cfg)), resolver_(std::move(resolver)) {
  validate(cfg_);
  const auto sep = cfg_.endpoint.find("://");
  const auto path_start = cfg_.endpoint.find('/', sep + 3);
  scheme_host_port_ = cfg_.endpoint.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : cfg_.endpoint.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::string HttpProvider::api_key() const {
  if (cfg_.auth_env_var.empty()) return {};
  const char* key = std::getenv(cfg_.auth_env_var.c_str());
  if (!key || !*key) fail(ErrorCode::AuthFailure, "environment variable " + cfg_.auth_env_var + " is not set");
  return key;
}

nlohmann::json HttpProvider::post(const std::string& path, const nlohmann::json& body) const {
  const auto key = api_key();
  httplib::Client client(scheme_host_port_);
  const auto secs = cfg_.timeout_ms / 1000;
  const auto usecs = (cfg_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

  auto res = client.Post(base_path_ + path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read || err == httplib::Error::Write)
      fail(ErrorCode::Timeout, cfg_.endpoint + ": request timed out or was cut off (" + httplib::to_string(err) + ")");
    fail(ErrorCode::ModelError, cfg_.endpoint + ": " + httplib::to_string(err));
  }
  if (res->status == 401 || res->status == 403)
    fail(ErrorCode::AuthFailure, cfg_.endpoint + " rejected the credentials (HTTP " + std::to_string(res->status) + ")");
  if (res->status == 408 || res->status == 504) fail(ErrorCode::Timeout, cfg_.endpoint + " timed out upstream");
  if (res->status / 100 != 2)
    fail(ErrorCode::ModelError, cfg_.endpoint + " returned HTTP " + std::to_string(res->status));
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::MalformedResponse, cfg_.endpoint + " returned a non-JSON body");
  return j;
}

std::string HttpProvider::complete(const ChatRequest& req) {
  nlohmann::json content;
  if (req.image) {
    if (!resolver_) fail(ErrorCode::InvalidConfig, "no resolver for image resources");
    auto [bytes, mime] = resolver_(*req.image);
    content = nlohmann::json::array({
        {{"type", "text"}, {"text", req.prompt}},
        {{"type", "image_url"}, {"image_url", {{"url", "data:" + mime + ";base64," + base64(bytes)}}}},
    });
  } else {
    content = req.prompt;
  }
  const nlohmann::json body = {
      {"model", cfg_.model_name},
      {"temperature", req.temperature},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
  };
  const auto j = post("/chat/completions", body);
  try {
    const auto& msg = j.at("choices").at(0).at("message").at("content");
    if (msg.is_string()) return msg.get<std::string>();
    // some providers return content parts
    std::string out;
    for (const auto& part : msg) out += part.value("text", "");
    return out;
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::MalformedResponse, cfg_.endpoint + ": response has no choices[0].message.content");
  }
}

std::vector<EmbeddingVector> HttpProvider::embed(const std::vector<std::string>& texts) {
  const nlohmann::json body = {{"model", cfg_.model_name}, {"input", texts}};
  const auto j = post("/embeddings", body);
  std::vector<EmbeddingVector> out(texts.size());
  try {
    const auto& data = j.at("data");
    if (data.size() != texts.size()) fail(ErrorCode::MalformedResponse, "embedding count does not match input count");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto index = data[i].value("index", i);
      if (index >= out.size()) fail(ErrorCode::MalformedResponse, "embedding index out of range");
      out[index].values = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::MalformedResponse, cfg_.endpoint + ": response has no data[].embedding");
  }
  for (const auto& v : out)
    if (v.dimension() != out.front().dimension())
      fail(ErrorCode::DimensionMismatch, "provider returned vectors of dimension " +
                                             std::to_string(out.front().dimension()) + " and " +
                                             std::to_string(v.dimension()));
  return out;
}

}  // namespace straptor::gateway
