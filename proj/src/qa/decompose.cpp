#include <regex>

#include "common/text.hpp"
#include "qa/qa.hpp"

namespace straptor::qa {

using tree::HOTree;
using tree::NodeKind;

std::string_view to_string(DecomposerKind k) noexcept { return k == DecomposerKind::Llm ? "llm" : "template"; }

std::optional<DecomposerKind> parse_decomposer_kind(std::string_view s) noexcept {
  if (s == "llm") return DecomposerKind::Llm;
  if (s == "template") return DecomposerKind::Template;
  return std::nullopt;
}

namespace {

[[noreturn]] void undecomposable(const std::string& q) {
  fail(ErrorCode::UndecomposableQuestion, "cannot decompose question: " + q);
}

std::string norm(std::string_view s) { return text::to_lower(text::collapse_whitespace(s)); }

struct Intent {
  enum class Kind { Aggregate, TopK, Where, Of } kind = Kind::Aggregate;
  tree::AggregateFn fn = tree::AggregateFn::Count;
  std::string column;
  std::string scope;  // Meta label, optional
  std::size_t k = 0;
  tree::SortOrder order = tree::SortOrder::Desc;
  std::string key_column;
  std::string value;
};

class Labels {
 public:
  explicit Labels(const HOTree& t) {
    const tree::TreeView view(t);
    for (const auto& id : view.preorder()) {
      const auto& n = t.node(id);
      if (n.kind == NodeKind::Meta && !text::trim(n.label).empty()) labels_.push_back(text::collapse_whitespace(n.label));
    }
  }

  std::optional<std::string> exact(std::string_view fragment) const {
    const auto f = norm(fragment);
    for (const auto& l : labels_)
      if (norm(l) == f) return l;
    return std::nullopt;
  }

  // Exact label, else the longest label occurring as whole words.
  std::optional<std::string> find(std::string_view fragment) const {
    if (auto e = exact(fragment)) return e;
    const auto f = " " + norm(fragment) + " ";
    std::optional<std::string> best;
    for (const auto& l : labels_) {
      const auto needle = " " + norm(l) + " ";
      if (f.find(needle) != std::string::npos && (!best || l.size() > best->size())) best = l;
    }
    return best;
  }

 private:
  std::vector<std::string> labels_;
};

std::string clean_question(const std::string& q) {
  std::string s(text::trim(text::collapse_whitespace(q)));
  while (!s.empty() && (s.back() == '?' || s.back() == '.' || s.back() == '!')) s.pop_back();
  return std::string(text::trim(s));
}

std::string unquote(std::string s) {
  s = std::string(text::trim(s));
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

tree::AggregateFn fn_word(std::string w) {
  w = text::to_lower(w);
  if (w == "sum" || w == "total") return tree::AggregateFn::Sum;
  if (w == "average" || w == "avg" || w == "mean") return tree::AggregateFn::Avg;
  if (w == "minimum" || w == "min" || w == "lowest" || w == "smallest") return tree::AggregateFn::Min;
  if (w == "maximum" || w == "max" || w == "highest" || w == "largest") return tree::AggregateFn::Max;
  return tree::AggregateFn::Count;
}

// "<column>[ in|for|under|across <scope>]"
bool column_and_scope(const Labels& labels, const std::string& rest, Intent& in) {
  if (auto e = labels.exact(rest)) {
    in.column = *e;
    return true;
  }
  static const std::regex kSep(R"( (in|for|under|across all|across|within) )", std::regex::icase);
  for (auto it = std::sregex_iterator(rest.begin(), rest.end(), kSep); it != std::sregex_iterator(); ++it) {
    const auto pos = static_cast<std::size_t>(it->position());
    const auto col = labels.exact(rest.substr(0, pos));
    const auto scope = labels.find(rest.substr(pos + it->length()));
    if (col && scope) {
      in.column = *col;
      in.scope = *scope;
      return true;
    }
  }
  if (auto f = labels.find(rest)) {
    in.column = *f;
    return true;
  }
  return false;
}

Intent parse_intent(const std::string& question, const HOTree& t) {
  const Labels labels(t);
  const auto q = clean_question(question);
  if (q.empty()) undecomposable(question);
  std::smatch m;
  const auto flags = std::regex::icase | std::regex::ECMAScript;
  static const std::regex kTop(
      R"(^(?:what are |list |show |give me |find )?(?:the )?(top|bottom|highest|lowest|largest|smallest) (\d+) (?:values of |values in |of )?(?:the )?(.+)$)",
      flags);
  static const std::regex kWhere(
      R"(^(?:what is |what's |find |give me |show )?(?:the )?(?:values? of )?(.+?) (?:where|when|whose) (.+?) (?:==|=|equals|is) (.+)$)",
      flags);
  static const std::regex kAgg(
      R"(^(?:what is |what's |compute |give me |find |show )?(?:the )?(sum|total|average|avg|mean|minimum|min|lowest|smallest|maximum|max|highest|largest|count|number) (?:value of |number of |of )?(?:the |all )?(.+)$)",
      flags);
  static const std::regex kHowMany(R"(^how many (.+?)(?: are there)?$)", flags);
  static const std::regex kOf(R"(^(?:what is |what's |find |give me |show )?(?:the )?(.+?) (?:of|for) (.+)$)", flags);

  Intent in;
  if (std::regex_match(q, m, kTop)) {
    if (auto c = labels.find(m[3].str())) {
      const auto dir = text::to_lower(m[1].str());
      in.kind = Intent::Kind::TopK;
      in.column = *c;
      in.k = static_cast<std::size_t>(std::stoul(m[2].str()));
      in.order = (dir == "bottom" || dir == "lowest" || dir == "smallest") ? tree::SortOrder::Asc : tree::SortOrder::Desc;
      return in;
    }
  }
  if (std::regex_match(q, m, kWhere)) {
    auto c = labels.find(m[1].str());
    auto k = labels.find(m[2].str());
    if (c && k) {
      in.kind = Intent::Kind::Where;
      in.column = *c;
      in.key_column = *k;
      in.value = unquote(m[3].str());
      return in;
    }
  }
  if (std::regex_match(q, m, kAgg) && column_and_scope(labels, m[2].str(), in)) {
    in.kind = Intent::Kind::Aggregate;
    in.fn = fn_word(m[1].str());
    return in;
  }
  if (std::regex_match(q, m, kHowMany) && column_and_scope(labels, m[1].str(), in)) {
    in.kind = Intent::Kind::Aggregate;
    in.fn = tree::AggregateFn::Count;
    return in;
  }
  if (std::regex_match(q, m, kOf)) {
    if (auto c = labels.exact(m[1].str())) {
      in.kind = Intent::Kind::Of;
      in.column = *c;
      in.value = unquote(m[2].str());
      return in;
    }
  }
  undecomposable(question);
}

SubOperation step(std::size_t id, std::string op, json args, std::string note) {
  return SubOperation{id, std::move(op), std::move(args), std::move(note)};
}

json ref(std::size_t k) { return json{{"ref", k}}; }

}  // namespace

Plan template_decompose(const std::string& question, const HOTree& t) {
  const auto in = parse_intent(question, t);
  Plan p;
  p.question = question;
  p.tree_id = t.id;
  auto& s = p.steps;
  switch (in.kind) {
    case Intent::Kind::Aggregate:
    case Intent::Kind::TopK: {
      const auto anchor = in.scope.empty() ? in.column : in.scope;
      s.push_back(step(0, "locate", {{"key", anchor}, {"direction", "top_down"}}, "Where is '" + anchor + "'?"));
      s.push_back(step(1, "project", {{"nodes", ref(0)}, {"header", in.column}},
                       "Which values lie under '" + in.column + "'?"));
      if (in.kind == Intent::Kind::Aggregate) {
        s.push_back(step(2, "aggregate", {{"values", ref(1)}, {"fn", tree::to_string(in.fn)}},
                         "What is the " + std::string(tree::to_string(in.fn)) + " of those values?"));
      } else {
        s.push_back(step(2, "top_k", {{"values", ref(1)}, {"k", in.k}, {"order", tree::to_string(in.order)}},
                         "Which " + std::to_string(in.k) + " values rank " +
                             (in.order == tree::SortOrder::Desc ? "highest" : "lowest") + "?"));
      }
      break;
    }
    case Intent::Kind::Where:
      s.push_back(step(0, "locate", {{"key", in.key_column}, {"direction", "top_down"}},
                       "Where is '" + in.key_column + "'?"));
      s.push_back(step(1, "children", {{"nodes", ref(0)}}, "Which entries lie under '" + in.key_column + "'?"));
      s.push_back(step(2, "filter",
                       {{"nodes", ref(1)}, {"header", in.key_column}, {"relation", "eq"}, {"operand", in.value}},
                       "Which entries have '" + in.key_column + "' equal to '" + in.value + "'?"));
      s.push_back(step(3, "project", {{"nodes", ref(2)}, {"header", in.column}},
                       "What is '" + in.column + "' for those entries?"));
      break;
    case Intent::Kind::Of:
      s.push_back(step(0, "locate", {{"key", in.value}, {"direction", "bottom_up"}}, "Where is '" + in.value + "'?"));
      s.push_back(step(1, "project", {{"nodes", ref(0)}, {"header", in.column}},
                       "What is '" + in.column + "' of '" + in.value + "'?"));
      break;
  }
  return p;
}

std::string template_rephrase(const std::string& question, const HOTree& t) {
  const auto in = parse_intent(question, t);
  switch (in.kind) {
    case Intent::Kind::Aggregate: {
      static const char* kSynonym[] = {"total", "mean", "minimum", "maximum", "number"};
      auto out = "Compute the " + std::string(kSynonym[static_cast<int>(in.fn)]) + " of " + in.column;
      if (!in.scope.empty()) out += " within " + in.scope;
      return out;
    }
    case Intent::Kind::TopK:
      return "List the " + std::string(in.order == tree::SortOrder::Desc ? "highest " : "lowest ") +
             std::to_string(in.k) + " of " + in.column;
    case Intent::Kind::Where: return "Find " + in.column + " when " + in.key_column + " equals \"" + in.value + "\"";
    case Intent::Kind::Of: return "Find the " + in.column + " for \"" + in.value + "\"";
  }
  return question;
}

std::string schema_sketch(const HOTree& t) {
  const tree::TreeView view(t);
  std::size_t max_depth = 0;
  std::string lines;
  for (const auto& id : view.preorder()) {
    const auto& n = view.node(id);
    if (n.kind != NodeKind::Meta) continue;
    std::size_t depth = 0;
    for (const auto& a : view.ancestors(id))
      if (view.node(a).kind == NodeKind::Meta) ++depth;
    max_depth = std::max(max_depth, depth + 1);
    lines += std::string(2 * depth, ' ') + "- " + text::collapse_whitespace(n.label);
    if (n.field_type) lines += " [" + std::string(tree::to_string(*n.field_type)) + "]";
    lines += "\n";
  }
  return "table: " + t.title + "\nheader depth: " + std::to_string(max_depth) + "\nheaders:\n" + lines;
}

namespace {

constexpr const char* kGrammar =
    "Reply with JSON only: {\"steps\": [{\"op\": ..., \"args\": {...}, \"note\": \"sub-question\"}]}.\n"
    "Operations and arguments:\n"
    "  locate {key, direction: top_down|bottom_up}\n"
    "  children|parent_chain|subtree {nodes}\n"
    "  filter {nodes, header, relation: lt|le|eq|ge|gt|ne, operand}\n"
    "  project {nodes, header}\n"
    "  aggregate {values, fn: sum|avg|min|max|count}\n"
    "  compare {left, right, relation}\n"
    "  top_k {values, k, order: asc|desc}\n"
    "nodes may be \"$root\"; {\"ref\": k} uses the output of an earlier step k.\n";

}  // namespace

Plan llm_decompose(const std::string& question, const HOTree& t, const gateway::Gateway& gw) {
  gateway::ChatRequest req;
  req.template_id = "decompose";
  req.salient_args = {question};
  req.prompt = "Decompose the question into tree operations over this table.\n" + schema_sketch(t) + kGrammar +
               "Question: " + question;
  std::string first_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = gw.complete(gateway::ProviderKind::Llm, req);
    try {
      auto p = parse_plan_reply(reply);
      p.question = question;
      p.tree_id = t.id;
      return p;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InvalidPlan) throw;
      if (attempt == 1)
        fail(ErrorCode::UndecomposableQuestion, "no valid plan after a re-prompt: " + first_error + "; " + e.what());
      first_error = e.what();
      req.template_id = "decompose.retry";
      req.prompt += "\nYour previous reply was rejected (" + first_error + "). " + kGrammar;
    }
  }
  undecomposable(question);
}

std::string llm_rephrase(const std::string& question, const gateway::Gateway& gw) {
  gateway::ChatRequest req;
  req.template_id = "rephrase";
  req.salient_args = {question};
  req.prompt = "Rephrase the question with entirely different wording and the same meaning. Reply with the question only.\n"
               "Question: " + question;
  auto out = unquote(text::collapse_whitespace(gw.complete(gateway::ProviderKind::Llm, req)));
  if (out.empty()) fail(ErrorCode::MalformedResponse, "empty rephrasing");
  return out;
}

}  // namespace straptor::qa
