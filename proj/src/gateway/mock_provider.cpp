#include <fstream>

#include "common/error.hpp"
#include "common/text.hpp"
#include "gateway/gateway.hpp"

namespace straptor::gateway {

MockScript MockScript::from_json(const nlohmann::json& j) {
  MockScript s;
  try {
    const auto completions = j.value("completions", nlohmann::json::object());
    const auto embeddings = j.value("embeddings", nlohmann::json::object());
    const auto failures = j.value("failures", nlohmann::json::object());
    for (const auto& [tag, text] : completions.items()) s.completions_[tag] = text.get<std::string>();
    for (const auto& [t, vec] : embeddings.items()) s.embeddings_[embedding_key(t)] = vec.get<std::vector<double>>();
    for (const auto& [tag, code] : failures.items()) s.failures_[tag] = code.get<std::string>();
    if (j.value("embedding_fallback", std::string("none")) == "hashed")
      s.hashed_dimension_ = j.value("dimension", std::size_t{64});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("bad mock script: ") + e.what());
  }
  return s;
}

MockScript MockScript::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidConfig, "cannot read mock script " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::InvalidConfig, "mock script is not valid JSON: " + path.string());
  return from_json(j);
}

MockScript& MockScript::complete_with(std::string tag, std::string response) {
  completions_[std::move(tag)] = std::move(response);
  return *this;
}

MockScript& MockScript::embed_with(std::string t, std::vector<double> vector) {
  embeddings_[embedding_key(t)] = std::move(vector);
  return *this;
}

MockScript& MockScript::fail_with(std::string tag, std::string error_code) {
  failures_[std::move(tag)] = std::move(error_code);
  return *this;
}

MockScript& MockScript::use_hashed_embeddings(std::size_t dimension) {
  hashed_dimension_ = dimension;
  return *this;
}

void MockScript::maybe_fail(const std::string& tag) const {
  auto it = failures_.find(tag);
  if (it == failures_.end()) return;
  if (it->second == "Timeout") fail(ErrorCode::Timeout, "scripted timeout for " + tag);
  if (it->second == "AuthFailure") fail(ErrorCode::AuthFailure, "scripted auth failure for " + tag);
  if (it->second == "MalformedResponse") fail(ErrorCode::MalformedResponse, "scripted malformed response for " + tag);
  fail(ErrorCode::ModelError, "scripted model error for " + tag);
}

std::string MockScript::completion(const std::string& tag) const {
  maybe_fail(tag);
  if (auto it = completions_.find(tag); it != completions_.end()) return it->second;
  const auto template_id = tag.substr(0, tag.find(':'));
  maybe_fail(template_id + ":*");
  if (auto it = completions_.find(template_id + ":*"); it != completions_.end()) return it->second;
  fail(ErrorCode::MissingScriptEntry, "no scripted completion for tag '" + tag + "'");
}

EmbeddingVector MockScript::embedding(const std::string& t) const {
  const auto key = embedding_key(t);
  maybe_fail("embed:" + text::slug(key));
  if (auto it = embeddings_.find(key); it != embeddings_.end()) return EmbeddingVector{it->second};
  if (hashed_dimension_) return hashed_embedding(key, *hashed_dimension_);
  fail(ErrorCode::MissingScriptEntry, "no scripted embedding for '" + key + "'");
}

nlohmann::json MockScript::to_json() const {
  nlohmann::json j;
  j["completions"] = completions_;
  nlohmann::json emb = nlohmann::json::object();
  for (const auto& [k, v] : embeddings_) emb[k] = v;
  j["embeddings"] = emb;
  j["failures"] = failures_;
  j["embedding_fallback"] = hashed_dimension_ ? "hashed" : "none";
  if (hashed_dimension_) j["dimension"] = *hashed_dimension_;
  return j;
}

std::string MockProvider::complete(const ChatRequest& req) { return script_->completion(req.tag()); }

std::vector<EmbeddingVector> MockProvider::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(script_->embedding(t));
  return out;
}

}  // namespace straptor::gateway
