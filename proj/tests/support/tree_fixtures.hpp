#pragma once

#include <functional>
#include <random>
#include <string>

#include "common/error.hpp"
#include "tree/hotree.hpp"

namespace fixtures {

using straptor::tree::FieldType;
using straptor::tree::HONode;
using straptor::tree::HOTree;
using straptor::tree::NodeKind;
using straptor::tree::Origin;

inline straptor::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const straptor::Error& e) {
    return e.code();
  }
  return straptor::ErrorCode::Internal;
}

class TreeBuilder {
 public:
  explicit TreeBuilder(std::string title = "t") {
    tree_.id = "fixture";
    tree_.title = title;
    tree_.root = "n0";
    tree_.created_at = "2026-01-01T00:00:00Z";
    tree_.nodes["n0"] = HONode{"n0", NodeKind::Root, std::move(title), std::nullopt, {}, std::nullopt};
  }

  std::string add(const std::string& parent, NodeKind kind, std::string label, std::optional<Origin> origin = {}) {
    const auto id = "n" + std::to_string(tree_.nodes.size());
    tree_.nodes[id] = HONode{id, kind, std::move(label), std::nullopt, {}, origin};
    tree_.nodes.at(parent).children.push_back(id);
    return id;
  }
  std::string meta(const std::string& parent, std::string label, std::size_t row, std::size_t col,
                   std::size_t rs = 1, std::size_t cs = 1) {
    return add(parent, NodeKind::Meta, std::move(label), Origin{row, col, rs, cs});
  }
  std::string body(const std::string& parent, std::string label, std::size_t row, std::size_t col) {
    return add(parent, NodeKind::Body, std::move(label), Origin{row, col, 1, 1});
  }

  HOTree& tree() { return tree_; }

 private:
  HOTree tree_;
};

// Root -> Name {A, B}, Price {3, 5}
inline HOTree name_price() {
  TreeBuilder b("prices");
  auto name = b.meta("n0", "Name", 0, 0);
  auto price = b.meta("n0", "Price", 0, 1);
  b.body(name, "A", 1, 0);
  b.body(price, "3", 1, 1);
  b.body(name, "B", 2, 0);
  b.body(price, "5", 2, 1);
  return b.tree();
}

// Root -> KPI {Sales, Quality}, Target {100, 50}, Completion rate {80%, 60%}
inline HOTree kpi() {
  TreeBuilder b("KPI Report");
  auto kpi = b.meta("n0", "KPI", 0, 0);
  auto target = b.meta("n0", "Target", 0, 1);
  auto rate = b.meta("n0", "Completion rate", 0, 2);
  b.meta(kpi, "Sales", 1, 0);
  b.body(target, "100", 1, 1);
  b.body(rate, "80%", 1, 2);
  b.meta(kpi, "Quality", 2, 0);
  b.body(target, "50", 2, 1);
  b.body(rate, "60%", 2, 2);
  return b.tree();
}

inline std::string random_label(std::mt19937& rng) {
  static const char* kPieces[] = {"Q1", "Price", "caf\xC3\xA9", "a \"quoted\" word", "tab\there", "3.5", "",
                                  "line\nbreak", "\xE6\x95\xB0\xE6\x8D\xAE", "x\\y", "70%", "$1,200"};
  std::uniform_int_distribution<int> pick(0, 11);
  return std::string(kPieces[pick(rng)]) + (pick(rng) < 4 ? std::to_string(pick(rng)) : "");
}

// Valid tree with up to `max_nodes` nodes; every Body node has a Meta
// ancestor. Ids are scattered so map order differs from creation order.
inline HOTree random_tree(std::mt19937& rng, std::size_t max_nodes = 200) {
  std::uniform_int_distribution<std::size_t> size_dist(1, max_nodes);
  const auto n = size_dist(rng);
  HOTree t;
  t.id = "t" + std::to_string(rng() % 100000);
  t.title = random_label(rng);
  t.root = "r" + std::to_string(rng() % 1000);
  t.created_at = "2026-0" + std::to_string(1 + rng() % 9) + "-01T00:00:00Z";
  t.source = {rng() % 2 ? "book.xlsx" : "", rng() % 2 ? "Sheet1" : ""};
  t.nodes[t.root] = HONode{t.root, NodeKind::Root, t.title, std::nullopt, {}, std::nullopt};
  std::vector<std::string> ids{t.root};
  while (t.nodes.size() < n) {
    const auto parent = ids[rng() % ids.size()];
    auto id = "k" + std::to_string(rng() % 1000000);
    if (t.nodes.count(id)) continue;
    const auto& p = t.nodes.at(parent);
    HONode node;
    node.id = id;
    node.kind = p.kind == NodeKind::Root || rng() % 3 == 0 ? NodeKind::Meta : NodeKind::Body;
    node.label = random_label(rng);
    if (node.kind == NodeKind::Meta && rng() % 2) node.field_type = static_cast<FieldType>(rng() % 3);
    if (rng() % 4) node.origin = Origin{rng() % 50, rng() % 20, 1 + rng() % 3, 1 + rng() % 3};
    t.nodes.at(parent).children.push_back(id);
    t.nodes.emplace(id, std::move(node));
    ids.push_back(id);
  }
  return t;
}

}  // namespace fixtures
