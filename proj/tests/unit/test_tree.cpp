#include <gtest/gtest.h>

#include <random>

#include "support/tree_fixtures.hpp"
#include "tree/edits.hpp"
#include "tree/numeric.hpp"
#include "tree/operations.hpp"
#include "tree/serialize.hpp"

using namespace straptor;
using namespace straptor::tree;
using fixtures::code_of;

namespace {

std::vector<std::string> texts(const std::vector<Value>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v.text);
  return out;
}

std::vector<Value> numbers(std::initializer_list<const char*> xs) {
  std::vector<Value> out;
  for (const auto* x : xs) out.push_back(Value::literal(x));
  return out;
}

}  // namespace

TEST(Numeric, FormattedNumbers) {
  EXPECT_EQ(parse_number("3"), 3.0);
  EXPECT_EQ(parse_number(" -2.5 "), -2.5);
  EXPECT_EQ(parse_number("1,234.5"), 1234.5);
  EXPECT_EQ(parse_number("$1,200"), 1200.0);
  EXPECT_EQ(parse_number("70%"), 0.7);
  EXPECT_EQ(parse_number("\xE2\x82\xAC" "5"), 5.0);
  EXPECT_EQ(parse_number("12 USD"), 12.0);
  EXPECT_EQ(parse_number("1e3"), 1000.0);
  EXPECT_FALSE(parse_number("abc"));
  EXPECT_FALSE(parse_number("12,34"));
  EXPECT_FALSE(parse_number(""));
  EXPECT_FALSE(parse_number("3 apples"));
}

TEST(Numeric, StyleRestoration) {
  EXPECT_EQ(number_style_of("80%").render(0.7), "70%");
  EXPECT_EQ(number_style_of("$1,200").render(1500), "$1500");
  EXPECT_EQ(number_style_of("3").render(4.25), "4.25");
}

TEST(TreeModel, ValidateCatchesBrokenShapes) {
  auto t = fixtures::name_price();
  EXPECT_NO_THROW(validate(t));
  auto cyc = t;
  cyc.nodes.at("n1").children.push_back("n1");
  EXPECT_EQ(code_of([&] { validate(cyc); }), ErrorCode::StructureViolation);
  auto two_parents = t;
  two_parents.nodes.at("n2").children.push_back("n3");
  EXPECT_EQ(code_of([&] { validate(two_parents); }), ErrorCode::StructureViolation);
  auto dangling = t;
  dangling.nodes.at("n2").children.push_back("n99");
  EXPECT_EQ(code_of([&] { validate(dangling); }), ErrorCode::StructureViolation);
  auto typed_body = t;
  typed_body.nodes.at("n3").field_type = FieldType::Numerical;
  EXPECT_EQ(code_of([&] { validate(typed_body); }), ErrorCode::StructureViolation);
  EXPECT_TRUE(unlinked_body_nodes(t).empty());
}

TEST(TreeView, OrderAndAncestry) {
  const auto t = fixtures::name_price();
  TreeView v(t);
  EXPECT_EQ(v.preorder(), (std::vector<std::string>{"n0", "n1", "n3", "n5", "n2", "n4", "n6"}));
  EXPECT_EQ(v.ancestors("n4"), (std::vector<std::string>{"n2", "n0"}));
  EXPECT_TRUE(v.is_ancestor("n2", "n6"));
  EXPECT_FALSE(v.is_ancestor("n1", "n6"));
  std::vector<std::string> ids{"n6", "n3", "n4", "n5"};
  v.sort_document_order(ids);
  EXPECT_EQ(ids, (std::vector<std::string>{"n3", "n4", "n5", "n6"}));
  EXPECT_EQ(v.header_of("n6"), "n2");
}

TEST(Operations, LocateAndProjectOnNamePrice) {
  const auto t = fixtures::name_price();
  const auto before = serialize(t);
  auto loc = execute_tree_op(t, LocateOp{"Price", Direction::TopDown});
  EXPECT_EQ(loc.nodes, (std::vector<std::string>{"n2"}));
  EXPECT_EQ(loc.visited, (std::vector<std::string>{"n0", "n2"}));
  auto proj = execute_tree_op(t, ProjectOp{{"n0"}, "Price"});
  EXPECT_EQ(proj.kind, OpResult::Kind::ValueList);
  EXPECT_EQ(texts(proj.values), (std::vector<std::string>{"3", "5"}));
  EXPECT_EQ(proj.values[0].source, "n4");
  EXPECT_EQ(serialize(t), before);
}

TEST(Operations, LocateMatchingLayers) {
  const auto t = fixtures::name_price();
  EXPECT_EQ(execute_tree_op(t, LocateOp{"price", Direction::TopDown}).nodes, (std::vector<std::string>{"n2"}));
  EXPECT_EQ(execute_tree_op(t, LocateOp{"ric", Direction::TopDown}).nodes, (std::vector<std::string>{"n2"}));
  EXPECT_EQ(execute_tree_op(t, LocateOp{"a", Direction::TopDown}).nodes, (std::vector<std::string>{"n1"}));
  EXPECT_TRUE(execute_tree_op(t, LocateOp{"Cost", Direction::TopDown}).nodes.empty());
  const auto bottom = execute_tree_op(t, LocateOp{"B", Direction::BottomUp});
  EXPECT_EQ(bottom.nodes, (std::vector<std::string>{"n5"}));
  EXPECT_EQ(bottom.visited, (std::vector<std::string>{"n5", "n1", "n0"}));
}

TEST(Operations, LookupThroughRecordMates) {
  const auto t = fixtures::name_price();
  auto a = execute_tree_op(t, LocateOp{"A", Direction::BottomUp});
  auto chain = execute_tree_op(t, ParentChainOp{a.nodes});
  EXPECT_EQ(chain.nodes, (std::vector<std::string>{"n1", "n0"}));
  auto price = execute_tree_op(t, ProjectOp{a.nodes, "Price"});
  EXPECT_EQ(texts(price.values), (std::vector<std::string>{"3"}));
  auto name = execute_tree_op(t, ProjectOp{{"n2"}, "Name"});
  EXPECT_EQ(texts(name.values), (std::vector<std::string>{"A", "B"}));
}

TEST(Operations, ChildrenSubtreeFilter) {
  const auto t = fixtures::name_price();
  EXPECT_EQ(execute_tree_op(t, ChildrenOp{{"n1"}}).nodes, (std::vector<std::string>{"n3", "n5"}));
  EXPECT_EQ(execute_tree_op(t, SubtreeOp{{"n2"}}).nodes, (std::vector<std::string>{"n2", "n4", "n6"}));
  auto f = execute_tree_op(t, FilterOp{{"n3", "n5"}, Predicate{"Price", Relation::Gt, Value::literal("4")}});
  EXPECT_EQ(f.nodes, (std::vector<std::string>{"n5"}));
  auto eq = execute_tree_op(t, FilterOp{{"n4", "n6"}, Predicate{"Name", Relation::Eq, Value::literal("a")}});
  EXPECT_EQ(eq.nodes, (std::vector<std::string>{"n4"}));
  EXPECT_EQ(code_of([&] { execute_tree_op(t, ChildrenOp{{"nope"}}); }), ErrorCode::NodeNotFound);
  EXPECT_EQ(code_of([&] { execute_tree_op(t, ProjectOp{{}, "Price"}); }), ErrorCode::EmptyInput);
}

TEST(Operations, KpiSubtreeProjection) {
  // Root -> KPI(meta rows 1..2) {Sales, Quality}; columns Target, Completion rate
  fixtures::TreeBuilder b("kpi");
  auto kpi = b.meta("n0", "KPI", 0, 0);
  auto target = b.meta("n0", "Target", 0, 1);
  auto rate = b.meta("n0", "Completion rate", 0, 2);
  b.meta(kpi, "Sales", 1, 0);
  b.body(target, "100", 1, 1);
  b.body(rate, "80%", 1, 2);
  b.meta(kpi, "Quality", 2, 0);
  b.body(target, "50", 2, 1);
  b.body(rate, "60%", 2, 2);
  auto& t = b.tree();
  auto loc = execute_tree_op(t, LocateOp{"KPI", Direction::TopDown});
  auto rates = execute_tree_op(t, ProjectOp{loc.nodes, "completion rate"});
  EXPECT_EQ(texts(rates.values), (std::vector<std::string>{"80%", "60%"}));
  auto avg = execute_tree_op(t, AggregateOp{rates.values, AggregateFn::Avg});
  EXPECT_NEAR(*avg.scalar.number, 0.7, 1e-12);
  auto sales = execute_tree_op(t, LocateOp{"Sales", Direction::TopDown});
  EXPECT_EQ(texts(execute_tree_op(t, ProjectOp{sales.nodes, "Target"}).values), (std::vector<std::string>{"100"}));
}

TEST(Operations, AggregateCompareTopK) {
  const auto t = fixtures::name_price();
  EXPECT_EQ(*execute_tree_op(t, AggregateOp{numbers({"3", "5"}), AggregateFn::Sum}).scalar.number, 8.0);
  EXPECT_EQ(*execute_tree_op(t, AggregateOp{numbers({"3", "5"}), AggregateFn::Min}).scalar.number, 3.0);
  EXPECT_EQ(*execute_tree_op(t, AggregateOp{numbers({"3", "5"}), AggregateFn::Max}).scalar.number, 5.0);
  EXPECT_EQ(execute_tree_op(t, AggregateOp{numbers({"x", "y", "z"}), AggregateFn::Count}).scalar.text, "3");
  EXPECT_EQ(execute_tree_op(t, AggregateOp{{}, AggregateFn::Count}).scalar.text, "0");
  EXPECT_EQ(code_of([&] { execute_tree_op(t, AggregateOp{numbers({"3", "x"}), AggregateFn::Sum}); }),
            ErrorCode::TypeMismatch);
  EXPECT_EQ(code_of([&] { execute_tree_op(t, AggregateOp{{}, AggregateFn::Avg}); }), ErrorCode::EmptyInput);

  EXPECT_TRUE(execute_tree_op(t, CompareOp{Value::literal("5"), Value::literal("3"), Relation::Gt}).boolean);
  EXPECT_FALSE(execute_tree_op(t, CompareOp{Value::literal("5"), Value::literal("3"), Relation::Le}).boolean);
  EXPECT_TRUE(execute_tree_op(t, CompareOp{Value::literal("1,000"), Value::literal("1000"), Relation::Eq}).boolean);
  EXPECT_TRUE(execute_tree_op(t, CompareOp{Value::literal("Open"), Value::literal(" open"), Relation::Eq}).boolean);
  EXPECT_TRUE(execute_tree_op(t, CompareOp{Value::literal("10"), Value::literal("9"), Relation::Gt}).boolean);

  auto top = execute_tree_op(t, TopKOp{numbers({"3", "9", "5", "9"}), 2, SortOrder::Desc});
  EXPECT_EQ(texts(top.values), (std::vector<std::string>{"9", "9"}));
  auto low = execute_tree_op(t, TopKOp{numbers({"3", "9", "5"}), 5, SortOrder::Asc});
  EXPECT_EQ(texts(low.values), (std::vector<std::string>{"3", "5", "9"}));
}

TEST(Operations, AverageEqualsSumOverCount) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1e4, 1e4);
  const auto t = fixtures::name_price();
  for (int i = 0; i < 200; ++i) {
    std::vector<Value> vs;
    for (int k = 0, n = 1 + static_cast<int>(rng() % 20); k < n; ++k) vs.push_back(Value::computed(d(rng)));
    const double avg = *execute_tree_op(t, AggregateOp{vs, AggregateFn::Avg}).scalar.number;
    const double sum = *execute_tree_op(t, AggregateOp{vs, AggregateFn::Sum}).scalar.number;
    const double cnt = *parse_number(execute_tree_op(t, AggregateOp{vs, AggregateFn::Count}).scalar.text);
    EXPECT_NEAR(avg, sum / cnt, 1e-9 * std::max(1.0, std::fabs(avg)));
  }
}

TEST(Serialization, CanonicalBytes) {
  fixtures::TreeBuilder b("T");
  b.meta("n0", "Price", 0, 1);
  auto& t = b.tree();
  t.nodes.at("n1").field_type = FieldType::Numerical;
  EXPECT_EQ(serialize(t),
            R"({"created_at":"2026-01-01T00:00:00Z","id":"fixture","nodes":{"n0":{"children":["n1"],"field_type":null,)"
            R"("id":"n0","kind":"root","label":"T","origin":null},"n1":{"children":[],"field_type":"numerical","id":"n1",)"
            R"("kind":"meta","label":"Price","origin":{"col":1,"col_span":1,"row":0,"row_span":1}}},"root":"n0",)"
            R"("schema_version":1,"source":{"file":"","sheet":""},"title":"T"})");
}

TEST(Serialization, SingleRoot) {
  fixtures::TreeBuilder b;
  const auto j = nlohmann::json::parse(serialize(b.tree()));
  EXPECT_EQ(j["nodes"].size(), 1u);
}

TEST(Serialization, RoundTripRandomTrees) {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto t = fixtures::random_tree(rng);
    const auto bytes = serialize(t);
    const auto back = deserialize(bytes);
    EXPECT_EQ(back, t);
    EXPECT_EQ(serialize(back), bytes);
  }
}

TEST(Serialization, InsertionOrderIrrelevant) {
  auto a = fixtures::name_price();
  HOTree b;
  b.id = a.id;
  b.title = a.title;
  b.root = a.root;
  b.created_at = a.created_at;
  for (auto it = a.nodes.rbegin(); it != a.nodes.rend(); ++it) b.nodes.emplace(it->first, it->second);
  EXPECT_EQ(serialize(a), serialize(b));
}

TEST(Serialization, Rejections) {
  const auto good = nlohmann::json::parse(serialize(fixtures::name_price()));
  EXPECT_EQ(code_of([] { deserialize("{not json"); }), ErrorCode::SyntaxError);
  auto self_child = good;
  self_child["nodes"]["n1"]["children"].push_back("n1");
  EXPECT_EQ(code_of([&] { deserialize(self_child.dump()); }), ErrorCode::StructureViolation);
  auto no_root = good;
  no_root.erase("root");
  EXPECT_EQ(code_of([&] { deserialize(no_root.dump()); }), ErrorCode::SchemaViolation);
  auto bad_kind = good;
  bad_kind["nodes"]["n1"]["kind"] = "header";
  EXPECT_EQ(code_of([&] { deserialize(bad_kind.dump()); }), ErrorCode::SchemaViolation);
  auto extra = good;
  extra["colour"] = "red";
  EXPECT_EQ(code_of([&] { deserialize(extra.dump()); }), ErrorCode::SchemaViolation);
  auto version = good;
  version["schema_version"] = 2;
  EXPECT_EQ(code_of([&] { deserialize(version.dump()); }), ErrorCode::SchemaViolation);
  auto orphan = good;
  orphan["nodes"]["n2"]["children"] = nlohmann::json::array();
  EXPECT_EQ(code_of([&] { deserialize(orphan.dump()); }), ErrorCode::StructureViolation);
  auto mismatch = good;
  mismatch["nodes"]["n1"]["id"] = "n7";
  EXPECT_EQ(code_of([&] { deserialize(mismatch.dump()); }), ErrorCode::SchemaViolation);
}

TEST(Edits, RenameDeleteMove) {
  const auto t = fixtures::name_price();
  auto renamed = apply_edits(t, {RenameEdit{"n2", "Q1"}});
  EXPECT_EQ(renamed.node("n2").label, "Q1");
  EXPECT_EQ(t.node("n2").label, "Price");

  fixtures::TreeBuilder b;
  auto m = b.meta("n0", "M", 0, 0);
  b.body(m, "1", 1, 0);
  b.body(m, "2", 2, 0);
  b.body(m, "3", 3, 0);
  b.meta("n0", "Other", 0, 1);
  auto deleted = apply_edits(b.tree(), {DeleteEdit{m}});
  EXPECT_EQ(deleted.nodes.size() + 4, b.tree().nodes.size());

  EXPECT_EQ(code_of([&] { apply_edits(t, {MoveEdit{"n1", "n3", 0}}); }), ErrorCode::CycleCreated);
  EXPECT_EQ(code_of([&] { apply_edits(t, {MoveEdit{"n1", "n1", 0}}); }), ErrorCode::CycleCreated);
  EXPECT_EQ(code_of([&] { apply_edits(t, {DeleteEdit{"n0"}}); }), ErrorCode::RootDeletion);
  EXPECT_EQ(code_of([&] { apply_edits(t, {RenameEdit{"n42", "x"}}); }), ErrorCode::NodeNotFound);
}

TEST(Edits, MovePositionsAreClamped) {
  const auto t = fixtures::name_price();
  auto moved = apply_edits(t, {MoveEdit{"n2", "n0", 0}});
  EXPECT_EQ(moved.node("n0").children, (std::vector<std::string>{"n2", "n1"}));
  auto to_end = apply_edits(t, {MoveEdit{"n3", "n1", 99}});
  EXPECT_EQ(to_end.node("n1").children, (std::vector<std::string>{"n5", "n3"}));
}

TEST(Edits, CreateChildAndFieldType) {
  const auto t = fixtures::name_price();
  auto out = apply_edits(t, {CreateChildEdit{"n0", "Stock", NodeKind::Meta, "stock"},
                             CreateChildEdit{"stock", "7", NodeKind::Body, {}},
                             SetFieldTypeEdit{"stock", FieldType::Numerical}});
  EXPECT_EQ(out.node("stock").children.size(), 1u);
  EXPECT_EQ(out.node(out.node("stock").children[0]).label, "7");
  EXPECT_EQ(out.node("stock").field_type, FieldType::Numerical);
  EXPECT_EQ(code_of([&] { apply_edits(t, {CreateChildEdit{"n0", "x", NodeKind::Meta, "n1"}}); }), ErrorCode::InvalidEdit);
  EXPECT_EQ(code_of([&] { apply_edits(t, {SetFieldTypeEdit{"n3", FieldType::Categorical}}); }), ErrorCode::InvalidEdit);
  EXPECT_EQ(code_of([&] { apply_edits(t, {CreateChildEdit{"n0", "orphan", NodeKind::Body, {}}}); }),
            ErrorCode::InvalidEdit);
  EXPECT_EQ(code_of([&] { apply_edits(t, {CreateChildEdit{"n0", "r", NodeKind::Root, {}}}); }), ErrorCode::InvalidEdit);
}

TEST(Edits, BatchIsAtomic) {
  const auto t = fixtures::name_price();
  const auto before = serialize(t);
  EXPECT_EQ(code_of([&] { apply_edits(t, {RenameEdit{"n1", "Who"}, DeleteEdit{"n0"}}); }), ErrorCode::RootDeletion);
  EXPECT_EQ(serialize(t), before);
}

TEST(Edits, PromoteProductsAboveMonths) {
  // Months head the columns; products are promoted into the header tree and
  // each month moves under its product.
  fixtures::TreeBuilder b("sales");
  auto jan = b.meta("n0", "Jan", 0, 1);
  auto feb = b.meta("n0", "Feb", 0, 2);
  b.body(jan, "10", 1, 1);
  b.body(feb, "20", 1, 2);
  auto t = b.tree();
  auto out = apply_edits(t, {CreateChildEdit{"n0", "Product A", NodeKind::Meta, "pa"}, MoveEdit{jan, "pa", 0},
                             MoveEdit{feb, "pa", 1}});
  EXPECT_EQ(out.node("n0").children, (std::vector<std::string>{"pa"}));
  EXPECT_EQ(out.node("pa").children, (std::vector<std::string>{jan, feb}));
  EXPECT_EQ(out.node(jan).label, "Jan");
}

TEST(Edits, JsonWireFormat) {
  const auto edits = edits_from_json(nlohmann::json::parse(R"([
    {"op": "rename", "node": "n1", "new_label": "Who"},
    {"op": "move", "node": "n2", "new_parent": "n0", "position": 0},
    {"op": "create_child", "parent": "n0", "label": "X", "kind": "meta"},
    {"op": "set_field_type", "node": "n2", "field_type": "categorical"},
    {"op": "delete", "node": "n6"}])"));
  ASSERT_EQ(edits.size(), 5u);
  for (const auto& e : edits) EXPECT_EQ(edit_from_json(edit_to_json(e)).index(), e.index());
  auto out = apply_edits(fixtures::name_price(), edits);
  EXPECT_EQ(out.node("n1").label, "Who");
  EXPECT_FALSE(out.contains("n6"));
  EXPECT_EQ(code_of([] { edit_from_json({{"op", "explode"}}); }), ErrorCode::InvalidEdit);
  EXPECT_EQ(code_of([] { edit_from_json({{"op", "rename"}, {"node", 3}}); }), ErrorCode::InvalidEdit);
}
