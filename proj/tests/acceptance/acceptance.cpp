#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>

#include "agent/agent.hpp"
#include "ingest/ingest.hpp"
#include "qa/qa.hpp"
#include "service/service.hpp"
#include "support/tree_fixtures.hpp"
#include "table2tree/table2tree.hpp"
#include "tree/edits.hpp"
#include "tree/serialize.hpp"

using namespace straptor;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_fixture(const std::string& name) {
  std::ifstream in(fs::path(STRAPTOR_FIXTURES) / name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

t2t::BuildOptions fixed_build() {
  t2t::BuildOptions o;
  o.created_at = "2026-01-01T00:00:00Z";
  return o;
}

std::string child_labelled(const tree::HOTree& t, const std::string& parent, const std::string& label) {
  for (const auto& c : t.node(parent).children)
    if (t.node(c).label == label) return c;
  return {};
}

std::vector<std::string> child_labels(const tree::HOTree& t, const std::string& id) {
  std::vector<std::string> out;
  for (const auto& c : t.node(id).children) out.push_back(t.node(c).label);
  return out;
}

std::string tag(const std::string& template_id, const std::string& arg) { return gateway::make_tag(template_id, {arg}); }

// ---- oracle QA ---------------------------------------------------------------

struct Column {
  std::string header;
  std::vector<std::optional<std::string>> cells;  // per data row
};

struct Relation {
  std::string key_header;
  std::vector<std::string> keys;
  std::vector<Column> columns;
};

Relation random_relation(std::mt19937& rng) {
  static const std::vector<std::string> kHeaders = {"Price",  "Revenue", "Units",  "Margin", "Score",  "Weight",
                                                    "Height", "Stock",   "Rating", "Volume", "Budget", "Cost"};
  const std::size_t rows = 1 + rng() % 9;      // data rows; grid has rows + 1
  const std::size_t numeric = 1 + rng() % 7;   // plus the key column, at most 8
  Relation r;
  r.key_header = "Item";
  std::set<std::string> used;
  while (r.keys.size() < rows) {
    auto k = "Unit " + std::to_string(rng() % 900 + 100);
    if (used.insert(k).second) r.keys.push_back(k);
  }
  auto headers = kHeaders;
  std::shuffle(headers.begin(), headers.end(), rng);
  for (std::size_t c = 0; c < numeric; ++c) {
    Column col{headers[c], {}};
    for (std::size_t i = 0; i < rows; ++i) {
      if (rows > 1 && rng() % 20 == 0) {
        col.cells.push_back(std::nullopt);
        continue;
      }
      const long raw = static_cast<long>(rng() % 40001) - 10000;
      col.cells.push_back(rng() % 2 ? std::to_string(raw / 10) : fmt("%.1f", raw / 10.0));
    }
    if (std::none_of(col.cells.begin(), col.cells.end(), [](const auto& v) { return v.has_value(); }))
      col.cells[0] = "1";
    r.columns.push_back(std::move(col));
  }
  return r;
}

ingest::CellGrid grid_of(const Relation& r) {
  ingest::CellGrid g(r.keys.size() + 1, r.columns.size() + 1);
  g.add_text(0, 0, r.key_header);
  for (std::size_t c = 0; c < r.columns.size(); ++c) g.add_text(0, c + 1, r.columns[c].header);
  for (std::size_t i = 0; i < r.keys.size(); ++i) {
    g.add_text(i + 1, 0, r.keys[i]);
    for (std::size_t c = 0; c < r.columns.size(); ++c)
      if (r.columns[c].cells[i]) g.add_text(i + 1, c + 1, *r.columns[c].cells[i]);
  }
  g.set_title("Generated");
  return g;
}

struct Expectation {
  std::string question;
  std::string kind;  // scalar_exact, scalar_rel, lookup
  double number = 0;
  double scale = 1;
  std::vector<std::string> texts;
};

std::vector<Expectation> oracle_questions(const Relation& r, std::mt19937& rng) {
  std::vector<Expectation> out;
  const auto& col = r.columns[rng() % r.columns.size()];
  std::vector<double> xs;
  for (const auto& v : col.cells)
    if (v) xs.push_back(std::strtod(v->c_str(), nullptr));
  double sum = 0, abs_sum = 0;
  for (double x : xs) {
    sum += x;
    abs_sum += std::fabs(x);
  }
  const auto pick = [&](std::vector<std::string> forms) { return forms[rng() % forms.size()]; };
  out.push_back({pick({"What is the sum of ", "sum of ", "What is the total of "}) + col.header + "?", "scalar_rel", sum,
                 std::max(1.0, abs_sum), {}});
  out.push_back({pick({"What is the average ", "average of ", "mean of the "}) + col.header + "?", "scalar_rel",
                 sum / static_cast<double>(xs.size()), std::max(1.0, abs_sum / static_cast<double>(xs.size())), {}});
  out.push_back({pick({"What is the minimum ", "min of "}) + col.header, "scalar_exact",
                 *std::min_element(xs.begin(), xs.end()), 1, {}});
  out.push_back({pick({"What is the maximum ", "max of "}) + col.header, "scalar_exact",
                 *std::max_element(xs.begin(), xs.end()), 1, {}});
  out.push_back({pick({"count of ", "How many "}) + col.header + "?", "scalar_exact", static_cast<double>(xs.size()), 1, {}});
  const auto row = rng() % r.keys.size();
  const auto& target = r.columns[rng() % r.columns.size()];
  Expectation lookup{"What is the " + target.header + " of " + r.keys[row] + "?", "lookup", 0, 1, {}};
  if (target.cells[row]) lookup.texts.push_back(*target.cells[row]);
  out.push_back(lookup);
  return out;
}

std::string check_answer(const qa::Answer& a, const Expectation& e) {
  if (a.error) return "error " + std::string(to_string(*a.error)) + ": " + a.text;
  const auto& raw = a.raw;
  if (e.kind == "lookup") {
    if (raw.value("kind", "") != "value_list") return "expected a value list, got " + raw.dump();
    std::vector<std::string> got;
    for (const auto& v : raw["values"]) got.push_back(v["text"]);
    return got == e.texts ? "" : "lookup returned " + json(got).dump() + ", oracle " + json(e.texts).dump();
  }
  if (raw.value("kind", "") != "scalar") return "expected a scalar, got " + raw.dump();
  const auto& v = raw["value"];
  const double got = v.contains("number") ? v["number"].get<double>() : std::strtod(v["text"].get<std::string>().c_str(), nullptr);
  const bool ok = e.kind == "scalar_exact" ? got == e.number : std::fabs(got - e.number) <= 1e-9 * e.scale;
  return ok ? "" : "got " + fmt("%.17g", got) + ", oracle " + fmt("%.17g", e.number);
}

Outcome oracle_qa() {
  const auto t0 = Clock::now();
  std::mt19937 rng(2026);
  std::size_t asked = 0, agreed = 0;
  std::string first_miss;
  for (int g = 0; g < 200; ++g) {
    const auto rel = random_relation(rng);
    auto built = t2t::build_hotree(grid_of(rel), nullptr, fixed_build());
    const auto t = qa::tag_field_types(built.tree);
    qa::AnswerOptions o;
    o.decomposer = qa::DecomposerKind::Template;
    for (const auto& e : oracle_questions(rel, rng)) {
      ++asked;
      const auto miss = check_answer(qa::answer(e.question, t, nullptr, o), e);
      if (miss.empty()) ++agreed;
      else if (first_miss.empty()) first_miss = "grid " + std::to_string(g) + " \"" + e.question + "\": " + miss;
    }
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = agreed == asked && secs < 10.0;
  out.detail = std::to_string(agreed) + "/" + std::to_string(asked) + " answers agree over 200 grids in " +
               fmt("%.2f", secs) + " s (limit 10 s)";
  if (!first_miss.empty()) out.detail += "; first disagreement: " + first_miss;
  return out;
}

// ---- structure preservation ---------------------------------------------------

Outcome structure_preservation() {
  std::vector<std::string> failures;
  {
    const auto g = ingest::parse_xlsx(read_fixture("merged_header.xlsx")).sheets.at(0).grid;
    const auto t = t2t::build_hotree(g, nullptr, fixed_build()).tree;
    std::size_t totals = 0, empties = 0;
    for (const auto& [id, n] : t.nodes) {
      if (n.label == "Total") {
        ++totals;
        if (!n.origin || n.origin->col_span != g.cols()) failures.push_back("(a) Total node does not span the full width");
      }
      if (n.label.empty()) ++empties;
    }
    if (totals != 1) failures.push_back("(a) " + std::to_string(totals) + " Total nodes");
    if (empties) failures.push_back("(a) " + std::to_string(empties) + " empty fragments");
  }
  {
    const auto g = ingest::parse_html(
        "<table><tr><th rowspan=2>Name</th><th colspan=2>2024</th></tr>"
        "<tr><th>Q1</th><th>Q2</th></tr>"
        "<tr><td>A</td><td>3</td><td>4</td></tr>"
        "<tr><td>B</td><td>5</td><td>6</td></tr></table>");
    const auto t = t2t::build_hotree(g, nullptr, fixed_build()).tree;
    const auto parent = child_labelled(t, t.root, "2024");
    if (parent.empty() || t.node(parent).kind != tree::NodeKind::Meta) {
      failures.push_back("(b) no Meta node for the merged header");
    } else {
      if (child_labels(t, parent) != std::vector<std::string>{"Q1", "Q2"})
        failures.push_back("(b) merged header children " + json(child_labels(t, parent)).dump());
      for (const auto& c : t.node(parent).children)
        if (t.node(c).kind != tree::NodeKind::Meta) failures.push_back("(b) sub-header is not Meta");
    }
  }
  {
    const auto g = ingest::parse_html(
        "<table><tr><th>Item</th><th>Spec</th></tr><tr><td>Box</td><td>"
        "<table><tr><th>w</th><th>h</th></tr><tr><td>1</td><td>2</td></tr></table></td></tr></table>");
    const auto t = t2t::build_hotree(g, nullptr, fixed_build()).tree;
    const auto spec = child_labelled(t, t.root, "Spec");
    bool ok = !spec.empty() && t.node(spec).children.size() == 1;
    if (ok) {
      const auto holder = t.node(spec).children[0];
      const auto w = child_labelled(t, holder, "w");
      const auto h = child_labelled(t, holder, "h");
      ok = !w.empty() && !h.empty() && t.node(w).kind == tree::NodeKind::Meta && child_labels(t, w) == std::vector<std::string>{"1"} &&
           child_labels(t, h) == std::vector<std::string>{"2"};
    }
    if (!ok) failures.push_back("(c) nested table is not a recursive subtree");
  }
  Outcome out;
  out.pass = failures.empty();
  out.detail = out.pass ? "(a) one Total node, (b) 2024 -> {Q1, Q2}, (c) nested subtree" : json(failures).dump();
  return out;
}

// ---- serialization ----------------------------------------------------------------

Outcome serialization() {
  const auto t0 = Clock::now();
  std::mt19937 rng(7);
  std::size_t ok = 0;
  std::string first;
  for (int i = 0; i < 500; ++i) {
    const auto t = fixtures::random_tree(rng, 200);
    const auto bytes = tree::serialize(t);
    const auto back = tree::deserialize(bytes);
    tree::HOTree shuffled = t;
    shuffled.nodes.clear();
    for (auto it = t.nodes.rbegin(); it != t.nodes.rend(); ++it) shuffled.nodes.emplace(it->first, it->second);
    const bool good = back == t && tree::serialize(back) == bytes && tree::serialize(shuffled) == bytes &&
                      tree::serialize(t) == bytes;
    if (good) ++ok;
    else if (first.empty()) first = "tree " + std::to_string(i);
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = ok == 500 && secs < 5.0;
  out.detail = std::to_string(ok) + "/500 trees round-trip with identical bytes in " + fmt("%.2f", secs) + " s (limit 5 s)";
  if (!first.empty()) out.detail += "; first failure: " + first;
  return out;
}

// ---- edit protocol -------------------------------------------------------------------

// Independent invariant check: one Root, every node reached exactly once from
// it, field types only on Meta, every Body node below some Meta node.
std::string invariant_violation(const tree::HOTree& t) {
  if (!t.contains(t.root) || t.node(t.root).kind != tree::NodeKind::Root) return "root missing";
  std::map<std::string, int> seen;
  std::vector<std::pair<std::string, bool>> stack{{t.root, false}};
  while (!stack.empty()) {
    auto [id, under_meta] = stack.back();
    stack.pop_back();
    if (!t.contains(id)) return "dangling child " + id;
    if (++seen[id] > 1) return "node reached twice " + id;
    const auto& n = t.node(id);
    if (n.id != id) return "id mismatch " + id;
    if (n.kind == tree::NodeKind::Root && id != t.root) return "second root " + id;
    if (n.field_type && n.kind != tree::NodeKind::Meta) return "field type on non-Meta " + id;
    if (n.kind == tree::NodeKind::Body && !under_meta) return "Body without Meta ancestor " + id;
    for (const auto& c : n.children) stack.push_back({c, under_meta || n.kind == tree::NodeKind::Meta});
  }
  if (seen.size() != t.nodes.size()) return "unreachable nodes";
  return {};
}

std::vector<std::string> subtree_of(const tree::HOTree& t, const std::string& id) {
  std::vector<std::string> out{id};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (const auto& c : t.node(out[i]).children) out.push_back(c);
  return out;
}

std::optional<tree::TreeEditOp> random_valid_edit(const tree::HOTree& t, std::mt19937& rng, int& fresh) {
  std::vector<std::string> ids, metas, non_root;
  for (const auto& [id, n] : t.nodes) {
    ids.push_back(id);
    if (n.kind == tree::NodeKind::Meta) metas.push_back(id);
    if (id != t.root) non_root.push_back(id);
  }
  const auto any = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  switch (rng() % 5) {
    case 0: return tree::RenameEdit{any(ids), "label " + std::to_string(fresh++)};
    case 1: {
      const auto parent = any(ids);
      const auto kind = t.node(parent).kind;
      const auto child = kind == tree::NodeKind::Root ? tree::NodeKind::Meta
                         : kind == tree::NodeKind::Body ? tree::NodeKind::Body
                         : (rng() % 2 ? tree::NodeKind::Meta : tree::NodeKind::Body);
      return tree::CreateChildEdit{parent, "new " + std::to_string(fresh), child, "e" + std::to_string(fresh++)};
    }
    case 2: {
      if (non_root.empty()) return std::nullopt;
      const auto node = any(non_root);
      const auto banned = subtree_of(t, node);
      std::vector<std::string> targets;
      for (const auto& id : ids) {
        if (std::find(banned.begin(), banned.end(), id) != banned.end()) continue;
        const auto k = t.node(id).kind;
        if (t.node(node).kind == tree::NodeKind::Meta ? k != tree::NodeKind::Body : k != tree::NodeKind::Root)
          targets.push_back(id);
      }
      if (targets.empty()) return std::nullopt;
      return tree::MoveEdit{node, any(targets), static_cast<std::size_t>(rng() % 4)};
    }
    case 3:
      if (non_root.empty() || t.nodes.size() < 6) return std::nullopt;
      return tree::DeleteEdit{any(non_root)};
    default: {
      if (metas.empty()) return std::nullopt;
      std::optional<tree::FieldType> ft;
      if (rng() % 4) ft = static_cast<tree::FieldType>(rng() % 3);
      return tree::SetFieldTypeEdit{any(metas), ft};
    }
  }
}

Outcome edit_protocol() {
  std::mt19937 rng(11);
  int fresh = 0;
  std::size_t valid_ok = 0, invalid_ok = 0;
  std::string first;
  const auto note = [&](std::string s) {
    if (first.empty()) first = std::move(s);
  };
  tree::HOTree cur = fixtures::random_tree(rng, 40);
  for (int batch = 0; batch < 1000; ++batch) {
    if (batch % 20 == 0) cur = fixtures::random_tree(rng, 40);
    std::vector<tree::TreeEditOp> edits;
    std::vector<tree::HOTree> states{cur};
    const std::size_t want = 1 + rng() % 8;
    for (int attempts = 0; edits.size() < want && attempts < 50; ++attempts) {
      auto e = random_valid_edit(states.back(), rng, fresh);
      if (!e) continue;
      try {
        states.push_back(tree::apply_edits(states.back(), {*e}));
        edits.push_back(*e);
      } catch (const Error& err) {
        note("batch " + std::to_string(batch) + ": valid edit " + tree::edit_to_json(*e).dump() + " rejected: " + err.what());
      }
    }
    const auto before = tree::serialize(cur);
    try {
      const auto next = tree::apply_edits(cur, edits);
      const auto why = invariant_violation(next);
      if (!why.empty()) note("batch " + std::to_string(batch) + ": " + why);
      else if (tree::serialize(next) != tree::serialize(states.back())) note("batch " + std::to_string(batch) + ": batch differs from sequential application");
      else if (tree::serialize(cur) != before) note("batch " + std::to_string(batch) + ": input tree modified");
      else {
        tree::validate(next);
        ++valid_ok;
      }
      // Inject one invalid edit at a random position.
      const auto pos = rng() % (edits.size() + 1);
      const auto& at = states[pos];
      tree::TreeEditOp bad;
      ErrorCode expected;
      const auto which = rng() % 3;
      std::vector<std::string> non_root;
      for (const auto& [id, n] : at.nodes)
        if (id != at.root) non_root.push_back(id);
      if (which == 0 && !non_root.empty()) {
        const auto node = non_root[rng() % non_root.size()];
        const auto sub = subtree_of(at, node);
        bad = tree::MoveEdit{node, sub[rng() % sub.size()], 0};
        expected = ErrorCode::CycleCreated;
      } else if (which == 1) {
        bad = tree::DeleteEdit{at.root};
        expected = ErrorCode::RootDeletion;
      } else {
        bad = rng() % 2 ? tree::TreeEditOp{tree::RenameEdit{"missing-" + std::to_string(batch), "x"}}
                        : tree::TreeEditOp{tree::DeleteEdit{"missing-" + std::to_string(batch)}};
        expected = ErrorCode::NodeNotFound;
      }
      auto poisoned = edits;
      poisoned.insert(poisoned.begin() + static_cast<long>(pos), bad);
      const auto code = fixtures::code_of([&] { tree::apply_edits(cur, poisoned); });
      if (code != expected) note("batch " + std::to_string(batch) + ": invalid edit gave " + std::string(to_string(code)));
      else if (tree::serialize(cur) != before) note("batch " + std::to_string(batch) + ": rejected batch modified the tree");
      else ++invalid_ok;
      cur = next;
    } catch (const Error& err) {
      note("batch " + std::to_string(batch) + ": " + err.what());
    }
  }
  Outcome out;
  out.pass = valid_ok == 1000 && invalid_ok == 1000;
  out.detail = std::to_string(valid_ok) + "/1000 valid batches keep invariants, " + std::to_string(invalid_ok) +
               "/1000 invalid batches rejected atomically";
  if (!first.empty()) out.detail += "; first problem: " + first;
  return out;
}

// ---- verification --------------------------------------------------------------------

Outcome verification_behaviour() {
  auto g = ingest::parse_csv("Region,Sales\nNorth,10\nSouth,20\nNorth,30\nSouth,5\nNorth,7\nSouth,8\n");
  g.set_title("Regional sales");
  const auto t = qa::tag_field_types(t2t::build_hotree(g, nullptr, fixed_build()).tree);
  const auto plan_for = [](const std::string& header) {
    return json{{"steps",
                 {{{"op", "locate"}, {"args", {{"key", header}}}},
                  {{"op", "project"}, {"args", {{"nodes", {{"ref", 0}}}, {"header", header}}}},
                  {{"op", "aggregate"}, {"args", {{"values", {{"ref", 1}}}, {"fn", "sum"}}}}}}}
        .dump();
  };
  const std::string bad_q = "What is the total Region?", bad_r = "Add up every Region.";
  const std::string good_q = "What is the total Sales?", good_r = "Add up all Sales values.";
  gateway::MockScript s;
  s.complete_with(tag("decompose", bad_q), plan_for("Region"));
  s.complete_with(tag("rephrase", bad_q), bad_r);
  s.complete_with(tag("decompose", bad_r), plan_for("Region"));
  s.complete_with(tag("decompose", good_q), plan_for("Sales"));
  s.complete_with(tag("rephrase", good_q), good_r);
  s.complete_with(tag("decompose", good_r), plan_for("Sales"));
  const auto gw = gateway::Gateway::scripted(s);
  const auto bad = qa::answer(bad_q, t, gw.get());
  const auto good = qa::answer(good_q, t, gw.get());

  const auto formula = [](const qa::VerificationReport& v) {
    double passed = 0;
    for (const auto& c : v.forward_checks) passed += c.passed;
    const double agree = !v.backward_agreement ? 0.5 : *v.backward_agreement ? 1.0 : 0.0;
    return 0.5 * passed / static_cast<double>(v.forward_checks.size()) + 0.5 * agree;
  };
  std::vector<std::string> failures;
  const auto& checks = bad.verification.forward_checks;
  if (checks.empty() || checks[0].name != "type_consistency" || checks[0].passed)
    failures.push_back("faulty plan did not fail type_consistency");
  if (bad.confidence > 0.5) failures.push_back("faulty plan confidence " + fmt("%.3f", bad.confidence));
  if (good.confidence != 1.0) failures.push_back("healthy plan confidence " + fmt("%.17g", good.confidence));
  if (good.text != "80") failures.push_back("healthy plan answered " + good.text);
  if (good.verification.backward_agreement != true) failures.push_back("healthy plan lacks backward agreement");
  if (std::fabs(good.confidence - formula(good.verification)) > 0 ||
      (!bad.error && std::fabs(bad.confidence - formula(bad.verification)) > 0))
    failures.push_back("confidence differs from 0.5 * forward + 0.5 * backward");
  Outcome out;
  out.pass = failures.empty();
  out.detail = out.pass ? "faulty aggregate fails type_consistency with confidence " + fmt("%.2f", bad.confidence) +
                              "; healthy plan confidence " + fmt("%.2f", good.confidence)
                        : json(failures).dump();
  return out;
}

// ---- agent resolution ------------------------------------------------------------------

Outcome agent_resolution() {
  const auto build = [](const std::string& csv, const std::string& title, const std::string& id) {
    auto g = ingest::parse_csv(csv);
    g.set_title(title);
    auto o = fixed_build();
    o.tree_id = id;
    return qa::tag_field_types(t2t::build_hotree(g, nullptr, o).tree);
  };
  const auto sales = build("Product,Revenue,Profit\nProduct A,100,30\nProduct B,80,20\n", "Sales Report", "sales");
  const auto payroll = build("Name,Salary\nAnn,5000\nBob,4000\n", "Payroll", "payroll");
  agent::MemoryCatalog catalog;
  catalog.put(sales);
  catalog.put(payroll);
  agent::MemorySessionStore store;
  const std::string q1 = "What is the revenue of Product A?";
  const std::string q2 = "What is the profit of this product?";
  const std::string r2 = "What is the profit of Product A?";
  gateway::MockScript s;
  s.embed_with(agent::tree_signature(sales), {1, 0.1});
  s.embed_with(agent::tree_signature(payroll), {0.1, 1});
  s.embed_with(q1, {1, 0.1});
  s.embed_with(r2, {1, 0.1});
  s.complete_with(tag("resolve", q2), r2);
  agent::AgentOptions o;
  o.answer.decomposer = qa::DecomposerKind::Template;
  agent::Agent a(gateway::Gateway::scripted(s), catalog, store, nullptr, o);
  const auto session = a.create_session({"payroll", "sales"});
  const auto t1 = a.handle_turn(session.id, q1);
  const auto t2 = a.handle_turn(session.id, q2);
  std::vector<std::string> failures;
  if (t1.tree_id != "sales" || t1.answer.value("text", "") != "100") failures.push_back("first turn " + t1.reply);
  if (t2.resolved_question.find("Product A") == std::string::npos)
    failures.push_back("resolved question \"" + t2.resolved_question + "\"");
  if (t2.tree_id != "sales") failures.push_back("second turn used tree " + t2.tree_id);
  if (t2.answer.value("text", "") != "30") failures.push_back("second turn answered " + t2.answer.value("text", ""));
  Outcome out;
  out.pass = failures.empty();
  out.detail = out.pass ? "\"" + q2 + "\" -> \"" + t2.resolved_question + "\" answered 30 from " + t2.tree_id
                        : json(failures).dump();
  return out;
}

// ---- service contract ---------------------------------------------------------------------

Outcome service_contract() {
  std::vector<std::string> failures;
  const auto dir = fs::temp_directory_path() / ("straptor-acceptance-" + std::to_string(std::random_device{}()));
  fs::remove_all(dir);
  std::string tree_id, session_id, tree_bytes, session_bytes;
  std::map<std::string, std::string> files_before;
  const auto snapshot = [&] {
    std::map<std::string, std::string> out;
    for (const auto* sub : {"trees", "sessions"})
      for (const auto& e : fs::directory_iterator(dir / sub)) {
        std::ifstream in(e.path(), std::ios::binary);
        out[e.path().lexically_relative(dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
      }
    return out;
  };
  try {
    {
      service::ServiceOptions o;
      o.data_dir = dir;
      service::Service svc(o);
      const int port = svc.start("127.0.0.1", 0);
      httplib::Client c("127.0.0.1", port);
      httplib::MultipartFormDataItems items{
          {"files", "Product,Revenue,Profit\nProduct A,100,30\nProduct B,80,20\n", "sales.csv", "text/csv"}};
      auto r = c.Post("/api/v1/jobs", items);
      if (!r || r->status != 202) throw std::runtime_error("job submission failed");
      const std::string job_id = json::parse(r->body)["job_id"];
      json job;
      for (int i = 0; i < 1000; ++i) {
        job = json::parse(c.Get("/api/v1/jobs/" + job_id)->body);
        if (job["status"] == "succeeded" || job["status"] == "failed") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      std::vector<std::string> states;
      for (const auto& h : job["history"]) states.push_back(h["status"]);
      if (states != std::vector<std::string>{"queued", "running", "succeeded"}) failures.push_back("lifecycle " + json(states).dump());
      if (job["message"] != "HO-Tree generated successfully") failures.push_back("message " + job["message"].dump());
      tree_id = job["tree_ids"].at(0);

      const auto t = tree::deserialize(c.Get("/api/v1/trees/" + tree_id)->body);
      const auto revenue = child_labelled(t, t.root, "Revenue");
      const json patch{{"base_version", 1}, {"edits", {{{"op", "rename"}, {"node", revenue}, {"new_label", "Turnover"}}}}};
      r = c.Patch("/api/v1/trees/" + tree_id, patch.dump(), "application/json");
      if (!r || r->status != 200 || json::parse(r->body)["version"] != 2) failures.push_back("PATCH on current version");
      r = c.Patch("/api/v1/trees/" + tree_id, patch.dump(), "application/json");
      if (!r || r->status != 409 || json::parse(r->body)["code"] != "VersionConflict")
        failures.push_back("stale PATCH was not a VersionConflict");

      r = c.Post("/api/v1/sessions", "{}", "application/json");
      session_id = json::parse(r->body)["session_id"];
      r = c.Post("/api/v1/sessions/" + session_id + "/questions", json{{"question", "What is the Turnover of Product B?"}}.dump(),
                 "application/json");
      if (!r || r->status != 200 || json::parse(r->body)["text"] != "80") failures.push_back("question after PATCH");
      tree_bytes = c.Get("/api/v1/trees/" + tree_id)->body;
      session_bytes = c.Get("/api/v1/sessions/" + session_id)->body;
      files_before = snapshot();
    }
    service::ServiceOptions o;
    o.data_dir = dir;
    service::Service svc(o);
    const int port = svc.start("127.0.0.1", 0);
    httplib::Client c("127.0.0.1", port);
    auto r = c.Get("/api/v1/trees/" + tree_id);
    if (!r || r->body != tree_bytes || r->get_header_value("X-Tree-Version") != "2") failures.push_back("tree changed across restart");
    r = c.Get("/api/v1/sessions/" + session_id);
    if (!r || r->body != session_bytes) failures.push_back("session changed across restart");
    if (snapshot() != files_before) failures.push_back("stored files changed across restart");
  } catch (const std::exception& e) {
    failures.push_back(e.what());
  }
  fs::remove_all(dir);
  Outcome out;
  out.pass = failures.empty();
  out.detail = out.pass ? "queued -> running -> succeeded, PATCH 200 then 409, trees and sessions byte-identical after restart"
                        : json(failures).dump();
  return out;
}

// ---- multi-sheet merge ----------------------------------------------------------------------

Outcome multi_sheet_merge() {
  const auto set = ingest::parse_table_file("two_sheets.xlsx", read_fixture("two_sheets.xlsx"));
  const auto r = t2t::build_sheets(set, nullptr, fixed_build());
  const auto& root = r.tree.node(r.tree.root);
  std::vector<std::string> failures;
  if (root.children.size() != 2) failures.push_back("root has " + std::to_string(root.children.size()) + " children");
  if (child_labels(r.tree, r.tree.root) != std::vector<std::string>{"Sales", "Staff"})
    failures.push_back("root children " + json(child_labels(r.tree, r.tree.root)).dump());
  for (const auto& c : root.children)
    if (r.tree.node(c).kind != tree::NodeKind::Meta) failures.push_back("title child is not Meta");
  if (!invariant_violation(r.tree).empty()) failures.push_back(invariant_violation(r.tree));
  Outcome out;
  out.pass = failures.empty();
  out.detail = out.pass ? "one tree, root children {Sales, Staff}" : json(failures).dump();
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle_qa_equivalence", oracle_qa},
      {"structure_preservation", structure_preservation},
      {"serialization", serialization},
      {"edit_protocol", edit_protocol},
      {"verification_behavior", verification_behaviour},
      {"agent_resolution", agent_resolution},
      {"service_contract", service_contract},
      {"multi_sheet_merge", multi_sheet_merge},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
