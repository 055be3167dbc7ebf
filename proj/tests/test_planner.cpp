#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "test_util.hpp"

using namespace oqp;
using testutil::int_schema;
using nlohmann::json;

namespace {

std::map<std::string, Schema> schema_map(std::vector<Schema> ss) {
  std::map<std::string, Schema> out;
  for (auto& s : ss) out[s.name] = std::move(s);
  return out;
}

QueryTemplate tmpl_of(const char* text) { return parse_template(json::parse(text)); }

}  // namespace

TEST_CASE("template parsing") {
  QueryTemplate t = tmpl_of(R"({
    "relations": ["R", "S"],
    "predicates": {"R": [{"attr": "A", "op": "<", "const": 5},
                         {"attr": "B", "op": "=", "const": "?1"},
                         {"attr": "C", "op": ">=", "const": "x"}]},
    "group_by": ["G"],
    "agg": {"fn": "SUM", "rel": "S", "attr": "X"}
  })");
  CHECK(t.relations == std::vector<std::string>{"R", "S"});
  REQUIRE(t.predicates.at("R").size() == 3);
  CHECK(t.predicates.at("R")[0].op == CmpOp::Lt);
  CHECK(t.predicates.at("R")[0].constant == Value(std::int64_t(5)));
  CHECK(t.predicates.at("R")[1].placeholder == "?1");
  CHECK(t.predicates.at("R")[2].constant == Value("x"));
  CHECK(t.group_by == std::vector<std::string>{"G"});
  REQUIRE(t.agg);
  CHECK(t.agg->fn == AggFn::Sum);
  CHECK(t.agg->rel == "S");
  CHECK(t.agg->attr == "X");

  CHECK_THROWS_AS(tmpl_of(R"({"relations": []})"), ParseError);
  CHECK_THROWS_AS(tmpl_of(R"({"predicates": {}})"), ParseError);
  CHECK_THROWS_AS(tmpl_of(R"({"relations": ["R"],
    "predicates": {"R": [{"attr": "A", "op": "~", "const": 1}]}})"),
                  ParseError);
  CHECK_THROWS_AS(tmpl_of(R"({"relations": ["R"],
    "predicates": {"R": [{"attr": "A", "op": "=", "const": 1.5}]}})"),
                  ParseError);
  CHECK_THROWS_AS(tmpl_of(R"({"relations": ["R"], "agg": {"fn": "MEDIAN"}})"),
                  ParseError);
}

TEST_CASE("planning a chain query") {
  auto schemas = schema_map({int_schema("R", {"A", "B"}), int_schema("S", {"B", "C"}),
                             int_schema("T", {"C", "D"})});
  Plan p = plan(tmpl_of(R"({"relations": ["R", "S", "T"]})"), schemas);
  CHECK(p.fk_steps.empty());
  REQUIRE(p.tree.size() == 3);
  // Chain shape: each non-root hangs off the previous relation.
  CHECK(p.tree.nodes[0].rel == "R");
  CHECK(p.tree.nodes[1].rel == "S");
  CHECK(*p.tree.nodes[1].parent == 0);
  CHECK(p.tree.nodes[2].rel == "T");
  CHECK(*p.tree.nodes[2].parent == 1);
}

TEST_CASE("cyclic and disconnected queries are rejected") {
  auto tri = schema_map({int_schema("R", {"A", "B"}), int_schema("S", {"B", "C"}),
                         int_schema("T", {"C", "A"})});
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R", "S", "T"]})"), tri),
                  CyclicJoinError);

  auto split = schema_map({int_schema("R", {"A"}), int_schema("S", {"B"})});
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R", "S"]})"), split),
                  CyclicJoinError);
}

TEST_CASE("single-relation plan") {
  auto schemas = schema_map({int_schema("R", {"A", "B"})});
  Plan p = plan(tmpl_of(R"({"relations": ["R"], "project": ["A"]})"), schemas);
  CHECK(p.tree.size() == 1);
  CHECK(p.project == std::vector<std::string>{"A"});
}

TEST_CASE("key/foreign-key pairs collapse before tree construction") {
  Schema o = int_schema("O", {"OId", "CId", "Amt"});
  o.key = {"OId"};
  o.foreign_keys = {{{"CId"}, "C"}};
  Schema c = int_schema("C", {"CId", "Region"});
  c.key = {"CId"};
  auto schemas = schema_map({o, c});
  Plan p = plan(tmpl_of(R"({"relations": ["O", "C"],
    "group_by": ["Region"], "agg": {"fn": "SUM", "rel": "O", "attr": "Amt"}})"),
                schemas);
  REQUIRE(p.fk_steps.size() == 1);
  CHECK(p.fk_steps[0].fk_rel == "O");
  CHECK(p.fk_steps[0].key_rel == "C");
  CHECK(p.tree.size() == 1);
  const Schema& merged = p.schemas.at(p.fk_steps[0].merged);
  CHECK(merged.attr_names() ==
        std::vector<std::string>{"OId", "CId", "Amt", "Region"});
  REQUIRE(p.agg);
  CHECK(p.agg->rel == p.fk_steps[0].merged);
  CHECK(p.agg->group_by == std::vector<std::string>{"Region"});
}

TEST_CASE("chained foreign keys collapse transitively") {
  Schema o = int_schema("O", {"OId", "CId"});
  o.key = {"OId"};
  o.foreign_keys = {{{"CId"}, "C"}};
  Schema c = int_schema("C", {"CId", "NId"});
  c.key = {"CId"};
  c.foreign_keys = {{{"NId"}, "N"}};
  Schema n = int_schema("N", {"NId", "NName"});
  n.key = {"NId"};
  Plan p = plan(tmpl_of(R"({"relations": ["O", "C", "N"]})"), schema_map({o, c, n}));
  CHECK(p.fk_steps.size() == 2);
  CHECK(p.tree.size() == 1);
}

TEST_CASE("grouping must land in one post-collapse relation") {
  // G lives on R, H on T; R and T only meet through S, with no foreign keys.
  auto schemas = schema_map({int_schema("R", {"A", "G"}), int_schema("S", {"A", "B"}),
                             int_schema("T", {"B", "H"})});
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R", "S", "T"],
    "group_by": ["G", "H"], "agg": {"fn": "COUNT"}})"),
                       schemas),
                  UnsupportedGrouping);

  // Grouping on one relation's attributes roots the tree there.
  Plan p = plan(tmpl_of(R"({"relations": ["R", "S", "T"],
    "group_by": ["H"], "agg": {"fn": "COUNT"}})"),
                schemas);
  CHECK(p.tree.nodes[0].rel == "T");
}

TEST_CASE("template validation errors") {
  auto schemas = schema_map({int_schema("R", {"A", "B"}), int_schema("S", {"B", "C"})});
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R", "R"]})"), schemas), ParseError);
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R", "Z"]})"), schemas),
                  UnknownAttribute);
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R"], "group_by": ["A"]})"), schemas),
                  ParseError);  // group_by without an aggregate
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R"], "project": ["A"],
    "agg": {"fn": "COUNT"}})"),
                       schemas),
                  ParseError);  // projection and aggregation together
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R"], "project": ["Z"]})"), schemas),
                  UnknownAttribute);
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["R"],
    "predicates": {"Z": [{"attr": "A", "op": "=", "const": 1}]}})"),
                       schemas),
                  UnknownAttribute);

  Schema bad = int_schema("B", {"#X"});
  CHECK_THROWS_AS(plan(tmpl_of(R"({"relations": ["B"]})"), schema_map({bad})),
                  ParseError);
}

TEST_CASE("predicate binding") {
  Schema s;
  s.name = "R";
  s.attrs = {int_attr("A"), Attribute{"B", Domain::Str, 8}};
  std::vector<TemplateAtom> atoms = {
      {"A", CmpOp::Lt, Value(), "?1"},
      {"B", CmpOp::Eq, Value("x"), ""},
  };
  Bindings b{{"?1", Value(std::int64_t(5))}};
  Predicate p = bind_predicate(atoms, b, s);
  REQUIRE(p.conjuncts.size() == 2);
  CHECK(p.eval(s, {Value(std::int64_t(4)), Value("x")}));
  CHECK_FALSE(p.eval(s, {Value(std::int64_t(5)), Value("x")}));
  CHECK_FALSE(p.eval(s, {Value(std::int64_t(4)), Value("y")}));
  // Null never satisfies a comparison.
  CHECK_FALSE(p.eval(s, {Value::null(), Value("x")}));

  CHECK_THROWS_AS(bind_predicate(atoms, {}, s), ParseError);  // ?1 unbound
  Bindings wrong{{"?1", Value("five")}};
  CHECK_THROWS_AS(bind_predicate(atoms, wrong, s), DomainMismatch);
}

TEST_CASE("planning is a pure function of schemas and template") {
  auto schemas = schema_map({int_schema("R", {"A", "B"}), int_schema("S", {"B", "C"})});
  QueryTemplate t = tmpl_of(R"({"relations": ["R", "S"],
    "predicates": {"S": [{"attr": "C", "op": ">", "const": "?1"}]},
    "agg": {"fn": "COUNT"}})");
  Plan p1 = plan(t, schemas);
  Plan p2 = plan(t, schemas);
  REQUIRE(p1.tree.size() == p2.tree.size());
  for (std::size_t i = 0; i < p1.tree.size(); ++i) {
    CHECK(p1.tree.nodes[i].rel == p2.tree.nodes[i].rel);
    CHECK(p1.tree.nodes[i].parent == p2.tree.nodes[i].parent);
  }
  CHECK(p1.predicates.at("S")[0].placeholder == "?1");
}
