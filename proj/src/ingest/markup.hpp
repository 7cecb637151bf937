#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace straptor::ingest::markup {

struct Token {
  enum class Kind { StartTag, EndTag, Text };
  Kind kind = Kind::Text;
  std::string name;  // local name, lowercased when tokenizing HTML
  std::map<std::string, std::string> attrs;
  bool self_closing = false;
  std::string text;  // entity-decoded for Text tokens

  bool is_start(std::string_view n) const { return kind == Kind::StartTag && name == n; }
  bool is_end(std::string_view n) const { return kind == Kind::EndTag && name == n; }
  std::string attr(const std::string& key, std::string fallback = {}) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second;
  }
};

enum class Dialect { Html, Xml };

// Lenient tokenizer shared by the HTML and OOXML readers. Comments,
// processing instructions and doctype are dropped; namespace prefixes are
// stripped from element and attribute names (`x:row` -> `row`, except that
// `r:id` keeps its prefix so relationship ids stay addressable). In HTML mode
// the contents of <script> and <style> are skipped.
std::vector<Token> tokenize(std::string_view src, Dialect dialect);

std::string decode_entities(std::string_view s);

}  // namespace straptor::ingest::markup
