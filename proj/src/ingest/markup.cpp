#include "ingest/markup.hpp"

#include <cctype>
#include <cstdint>
#include <cstdlib>

#include "common/text.hpp"

namespace straptor::ingest::markup {

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0x10FFFF) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.';
}

std::string local_name(std::string name, Dialect dialect, bool attribute) {
  if (dialect == Dialect::Html) name = text::to_lower(name);
  const auto colon = name.find(':');
  if (colon == std::string::npos) return name;
  if (attribute && name.substr(0, colon) == "r") return name;  // r:id
  if (attribute && name.substr(0, colon) == "xmlns") return name;
  return name.substr(colon + 1);
}

}  // namespace

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto entity = s.substr(i + 1, semi - i - 1);
    std::uint32_t cp = 0;
    if (!entity.empty() && entity[0] == '#') {
      const bool hex = entity.size() > 1 && (entity[1] == 'x' || entity[1] == 'X');
      const std::string digits(entity.substr(hex ? 2 : 1));
      char* end = nullptr;
      cp = static_cast<std::uint32_t>(std::strtoul(digits.c_str(), &end, hex ? 16 : 10));
      if (digits.empty() || *end != '\0') cp = 0;
    } else if (entity == "amp") {
      cp = '&';
    } else if (entity == "lt") {
      cp = '<';
    } else if (entity == "gt") {
      cp = '>';
    } else if (entity == "quot") {
      cp = '"';
    } else if (entity == "apos") {
      cp = '\'';
    } else if (entity == "nbsp") {
      cp = ' ';
    }
    if (cp == 0) {
      out.push_back('&');
      continue;
    }
    append_utf8(out, cp);
    i = semi;
  }
  return out;
}

std::vector<Token> tokenize(std::string_view src, Dialect dialect) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const auto n = src.size();
  auto flush_text = [&](std::size_t from, std::size_t to) {
    if (to <= from) return;
    Token t;
    t.kind = Token::Kind::Text;
    t.text = decode_entities(src.substr(from, to - from));
    tokens.push_back(std::move(t));
  };

  std::size_t text_start = 0;
  while (i < n) {
    if (src[i] != '<') {
      ++i;
      continue;
    }
    // comment / CDATA / doctype / PI
    if (src.compare(i, 4, "<!--") == 0) {
      flush_text(text_start, i);
      const auto end = src.find("-->", i + 4);
      i = end == std::string_view::npos ? n : end + 3;
      text_start = i;
      continue;
    }
    if (src.compare(i, 9, "<![CDATA[") == 0) {
      flush_text(text_start, i);
      const auto end = src.find("]]>", i + 9);
      Token t;
      t.text = std::string(src.substr(i + 9, (end == std::string_view::npos ? n : end) - i - 9));
      tokens.push_back(std::move(t));
      i = end == std::string_view::npos ? n : end + 3;
      text_start = i;
      continue;
    }
    if (i + 1 < n && (src[i + 1] == '!' || src[i + 1] == '?')) {
      flush_text(text_start, i);
      const auto end = src.find('>', i);
      i = end == std::string_view::npos ? n : end + 1;
      text_start = i;
      continue;
    }
    const bool closing = i + 1 < n && src[i + 1] == '/';
    std::size_t p = i + (closing ? 2 : 1);
    std::size_t name_start = p;
    while (p < n && is_name_char(src[p])) ++p;
    if (p == name_start) {  // a bare '<' in text
      ++i;
      continue;
    }
    flush_text(text_start, i);
    Token tag;
    tag.kind = closing ? Token::Kind::EndTag : Token::Kind::StartTag;
    tag.name = local_name(std::string(src.substr(name_start, p - name_start)), dialect, false);

    // attributes
    while (p < n && src[p] != '>') {
      if (src[p] == '/') {
        tag.self_closing = true;
        ++p;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(src[p]))) {
        ++p;
        continue;
      }
      const auto key_start = p;
      while (p < n && src[p] != '=' && src[p] != '>' && src[p] != '/' &&
             !std::isspace(static_cast<unsigned char>(src[p])))
        ++p;
      std::string key = local_name(std::string(src.substr(key_start, p - key_start)), dialect, true);
      while (p < n && std::isspace(static_cast<unsigned char>(src[p]))) ++p;
      std::string value;
      if (p < n && src[p] == '=') {
        ++p;
        while (p < n && std::isspace(static_cast<unsigned char>(src[p]))) ++p;
        if (p < n && (src[p] == '"' || src[p] == '\'')) {
          const char q = src[p++];
          const auto end = src.find(q, p);
          const auto stop = end == std::string_view::npos ? n : end;
          value = decode_entities(src.substr(p, stop - p));
          p = stop == n ? n : stop + 1;
        } else {
          const auto vstart = p;
          while (p < n && src[p] != '>' && !std::isspace(static_cast<unsigned char>(src[p]))) ++p;
          value = decode_entities(src.substr(vstart, p - vstart));
        }
      }
      if (!key.empty()) tag.attrs.emplace(std::move(key), std::move(value));
    }
    i = p < n ? p + 1 : n;
    text_start = i;

    if (dialect == Dialect::Html && tag.kind == Token::Kind::StartTag &&
        (tag.name == "script" || tag.name == "style") && !tag.self_closing) {
      const auto close = text::to_lower(std::string(src.substr(i))).find("</" + tag.name);
      const auto end = close == std::string::npos ? n : src.find('>', i + close);
      i = end == std::string_view::npos ? n : end + 1;
      text_start = i;
      continue;
    }
    tokens.push_back(std::move(tag));
  }
  flush_text(text_start, n);
  return tokens;
}

}  // namespace straptor::ingest::markup
