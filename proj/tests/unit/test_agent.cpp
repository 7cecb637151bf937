#include <gtest/gtest.h>

#include <thread>

#include "agent/agent.hpp"
#include "ingest/ingest.hpp"
#include "support/tree_fixtures.hpp"

using namespace straptor;
using namespace straptor::agent;
using fixtures::code_of;

namespace {

tree::HOTree csv_tree(const std::string& csv, const std::string& title, const std::string& id) {
  auto g = ingest::parse_csv(csv);
  g.set_title(title);
  t2t::BuildOptions o;
  o.tree_id = id;
  o.created_at = "2026-01-01T00:00:00Z";
  return qa::tag_field_types(t2t::build_hotree(g, nullptr, o).tree);
}

tree::HOTree sales() {
  return csv_tree("Product,Revenue,Profit\nProduct A,100,30\nProduct B,80,20\n", "Sales Report", "sales");
}

tree::HOTree payroll() { return csv_tree("Name,Salary\nAnn,5000\nBob,4000\n", "Payroll", "payroll"); }

std::string tag(const std::string& template_id, const std::string& arg) {
  return gateway::make_tag(template_id, {arg});
}

struct Fixture {
  MemoryCatalog catalog;
  MemorySessionStore store;
  EventLog log;
  gateway::MockScript script;

  Fixture() {
    catalog.put(sales());
    catalog.put(payroll());
  }

  Agent agent() {
    AgentOptions o;
    o.answer.decomposer = qa::DecomposerKind::Template;
    return Agent(gateway::Gateway::scripted(script), catalog, store, &log, o);
  }

  void near_sales(const std::string& text) { script.embed_with(text, {1, 0.1}); }
  void near_payroll(const std::string& text) { script.embed_with(text, {0.1, 1}); }
  void signatures() {
    near_sales(tree_signature(sales()));
    near_payroll(tree_signature(payroll()));
  }
};

}  // namespace

TEST(Session, JsonRoundTrip) {
  Session s;
  s.id = "s1";
  s.tree_ids = {"a", "b"};
  s.active_tree = "b";
  s.created_at = "2026-01-01T00:00:00Z";
  Turn t;
  t.raw_question = "q";
  t.resolved_question = "q";
  t.tree_id = "b";
  t.routing = {Route::Aggregation, "why"};
  t.answer = {{"text", "1"}};
  t.warnings = {"w"};
  s.turns.push_back(t);
  EXPECT_EQ(Session::from_json(s.to_json()).to_json(), s.to_json());
  auto bad = s.to_json();
  bad["active_tree"] = "zzz";
  EXPECT_EQ(code_of([&] { Session::from_json(bad); }), ErrorCode::SchemaViolation);
  bad = s.to_json();
  bad["turns"][0]["routing"]["route"] = "teleport";
  EXPECT_EQ(code_of([&] { Session::from_json(bad); }), ErrorCode::SchemaViolation);
}

TEST(Resolve, ReferringExpressions) {
  EXPECT_TRUE(has_referring_expression("What is the profit of this product?"));
  EXPECT_TRUE(has_referring_expression("its price?"));
  EXPECT_TRUE(has_referring_expression("show the table from yesterday"));
  EXPECT_FALSE(has_referring_expression("Total revenue in March?"));
  EXPECT_FALSE(has_referring_expression("What is the profit of Product A?"));
  EXPECT_FALSE(has_referring_expression("Is Smith in the list?"));
}

TEST(Resolve, FallbacksAndIdempotence) {
  Session s;
  std::vector<std::string> w;
  EXPECT_EQ(resolve_references("Total revenue in March?", s, nullptr, w), "Total revenue in March?");
  EXPECT_TRUE(w.empty());
  EXPECT_EQ(resolve_references("its price?", s, nullptr, w), "its price?");
  EXPECT_EQ(w.size(), 1u);

  s.turns.push_back(Turn{});
  s.turns.back().resolved_question = "What is the revenue of Product A?";
  gateway::MockScript script;
  script.complete_with(tag("resolve", "What is the profit of this product?"), "What is the profit of Product A?");
  auto gw = gateway::Gateway::scripted(script);
  w.clear();
  const auto once = resolve_references("What is the profit of this product?", s, gw.get(), w);
  EXPECT_EQ(once, "What is the profit of Product A?");
  EXPECT_EQ(resolve_references(once, s, gw.get(), w), once);
  EXPECT_TRUE(w.empty());

  script.fail_with(tag("resolve", "and its cost?"), "ModelError");
  gw = gateway::Gateway::scripted(script);
  EXPECT_EQ(resolve_references("and its cost?", s, gw.get(), w), "and its cost?");
  EXPECT_EQ(w.size(), 1u);
}

TEST(Localize, NearestMarginAndNoTrees) {
  MemoryCatalog c;
  auto kpi = fixtures::kpi();
  kpi.id = "kpi";
  c.put(kpi);
  c.put(payroll());
  gateway::MockScript script;
  script.embed_with(tree_signature(kpi), {1, 0});
  script.embed_with(tree_signature(payroll()), {0, 1});
  script.embed_with("How did the KPI targets do?", {0.9, 0.1});
  script.embed_with("Show me the numbers", {1, 1});
  auto gw = gateway::Gateway::scripted(script);
  Session s;
  s.tree_ids = {"payroll", "kpi"};
  auto loc = localize_table("How did the KPI targets do?", s, c, gw.get());
  EXPECT_EQ(loc.tree_id, "kpi");
  EXPECT_EQ(loc.method, "embedding");

  s.active_tree = "payroll";
  loc = localize_table("Show me the numbers", s, c, gw.get());
  EXPECT_EQ(loc.tree_id, "payroll");
  EXPECT_TRUE(loc.kept_active);
  s.active_tree = "kpi";
  EXPECT_EQ(localize_table("Show me the numbers", s, c, gw.get()).tree_id, "kpi");

  EXPECT_EQ(localize_table("what is the salary of Ann", s, c, nullptr).tree_id, "payroll");
  Session empty;
  EXPECT_EQ(code_of([&] { localize_table("x", empty, c, gw.get()); }), ErrorCode::NoTrees);
}

TEST(Agent, ProductATwoTurns) {
  Fixture f;
  f.signatures();
  const std::string q1 = "What is the revenue of Product A?";
  const std::string q2 = "What is the profit of this product?";
  const std::string r2 = "What is the profit of Product A?";
  f.near_sales(q1);
  f.near_sales(r2);
  f.script.complete_with(tag("resolve", q2), r2);
  auto agent = f.agent();
  const auto s = agent.create_session({"payroll", "sales"});

  const auto t1 = agent.handle_turn(s.id, q1);
  EXPECT_EQ(t1.tree_id, "sales");
  EXPECT_EQ(t1.answer["text"], "100");
  const auto t2 = agent.handle_turn(s.id, q2);
  EXPECT_NE(t2.resolved_question.find("Product A"), std::string::npos);
  EXPECT_EQ(t2.tree_id, "sales");
  EXPECT_EQ(t2.answer["text"], "30");
  EXPECT_EQ(t2.routing.route, Route::Retrieval);
  EXPECT_NE(t2.reply.find("30"), std::string::npos);

  const auto stored = *f.store.load(s.id);
  ASSERT_EQ(stored.turns.size(), 2u);
  EXPECT_EQ(stored.turns[0].to_json(), t1.to_json());
  EXPECT_EQ(stored.active_tree, "sales");
  EXPECT_GT(f.log.last_seq(), 4u);
}

TEST(Agent, RoutingAndFailures) {
  Fixture f;
  f.signatures();
  f.near_sales("sum of Revenue");
  auto agent = f.agent();
  const auto s = agent.create_session({"sales", "payroll"});
  const auto t = agent.handle_turn(s.id, "sum of Revenue");
  EXPECT_EQ(t.routing.route, Route::Aggregation);
  EXPECT_EQ(t.answer["text"], "180");

  const auto empty = agent.create_session();
  const auto none = agent.handle_turn(empty.id, "sum of Revenue");
  EXPECT_EQ(none.answer["error"], "NoTrees");
  EXPECT_EQ(none.answer["confidence"], 0.0);
  EXPECT_FALSE(none.reply.empty());
  EXPECT_EQ(code_of([&] { agent.handle_turn("nope", "x"); }), ErrorCode::SessionNotFound);
  EXPECT_EQ(code_of([&] { agent.create_session({"missing"}); }), ErrorCode::TreeNotFound);
}

TEST(Agent, ImageExtraction) {
  Fixture f;
  f.script.complete_with(tag("extract_table", "receipt.png"), "| Item | Cost |\n|---|---|\n| Tea | 4 |\n");
  auto agent = f.agent();
  const auto s = agent.create_session({"sales"});
  const auto t = agent.handle_turn(s.id, "", {{"uploads/receipt.png", "receipt.png"}});
  EXPECT_EQ(t.routing.route, Route::ImageExtraction);
  ASSERT_FALSE(t.tree_id.empty());
  const auto stored = *f.store.load(s.id);
  EXPECT_EQ(stored.tree_ids.size(), 2u);
  EXPECT_EQ(stored.tree_ids.back(), t.tree_id);
  EXPECT_EQ(stored.active_tree, t.tree_id);
  EXPECT_TRUE(f.catalog.find(t.tree_id));
  EXPECT_EQ(t.answer["text"], "HO-Tree generated successfully");

  const auto asked = agent.handle_turn(s.id, "What is the Cost of Tea?", {{"uploads/receipt.png", "receipt.png"}});
  EXPECT_EQ(asked.answer["text"], "4");

  const auto broken = agent.handle_turn(s.id, "", {{"uploads/blank.png", "blank.png"}});
  EXPECT_EQ(broken.answer["confidence"], 0.0);
  EXPECT_EQ(broken.warnings.size(), 1u);
}

TEST(Agent, EditedTreeIsNotCached) {
  Fixture f;
  auto agent = f.agent();
  const auto s = agent.create_session({"sales"});
  const std::string q = "What is the Profit of Product A?";
  EXPECT_EQ(agent.handle_turn(s.id, q).answer["text"], "30");
  auto edited = sales();
  for (auto& [id, n] : edited.nodes)
    if (n.label == "30") n.label = "45";
  f.catalog.put(edited, 2);
  const auto t = agent.handle_turn(s.id, q);
  EXPECT_EQ(t.answer["text"], "45");
  EXPECT_EQ(t.tree_version, 2u);
  EXPECT_EQ(f.store.load(s.id)->turns[0].answer["text"], "30");
}

TEST(Agent, SessionsAreIndependent) {
  Fixture f;
  f.signatures();
  f.near_payroll("sum of Salary");
  f.near_sales("sum of Profit");
  auto agent = f.agent();
  const auto s1 = agent.create_session({"sales", "payroll"});
  const auto s2 = agent.create_session({"sales", "payroll"});
  agent.handle_turn(s1.id, "sum of Profit");
  std::thread a([&] { agent.handle_turn(s2.id, "sum of Salary"); });
  std::thread b([&] { agent.handle_turn(s1.id, "sum of Profit"); });
  a.join();
  b.join();
  EXPECT_EQ(f.store.load(s1.id)->active_tree, "sales");
  EXPECT_EQ(f.store.load(s2.id)->active_tree, "payroll");
  EXPECT_EQ(f.store.load(s1.id)->turns.size(), 2u);
  EXPECT_EQ(f.store.load(s1.id)->turns[1].index, 1u);
}
