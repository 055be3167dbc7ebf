#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>

#include "test_util.hpp"

using namespace oqp;
using testutil::int_column;
using testutil::int_schema;
using testutil::ints;

namespace {

RelHandle make_ints(Engine& eng, const std::string& attr,
                    const std::vector<std::int64_t>& vals,
                    const std::string& name = "R") {
  std::vector<Tuple> rows;
  for (auto v : vals) rows.push_back({Value(v)});
  return materialize(eng, int_schema(name, {attr}), rows);
}

}  // namespace

TEST_CASE("obl_sort sorts and matches an in-memory oracle") {
  Engine eng;
  RelHandle r = make_ints(eng, "A", {2, 1});
  RelHandle s = obl_sort(eng, r, {{"A", true}});
  CHECK(int_column(eng, s, "A") == std::vector<std::int64_t>{1, 2});

  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    std::vector<Tuple> rows;
    std::size_t n = 1 + rng() % 100;
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back(ints({std::int64_t(rng() % 10), std::int64_t(rng() % 10)}));
    Schema sc = int_schema("T", {"A", "B"});
    RelHandle t = materialize(eng, sc, rows);
    RelHandle ts = obl_sort(eng, t, {{"A", true}, {"B", false}});
    std::sort(rows.begin(), rows.end(), [&](const Tuple& a, const Tuple& b) {
      if (auto c = tuple_compare(sc, a, b, {{"A", true}, {"B", false}}); c != 0)
        return c < 0;
      return full_tuple_compare(a, b) < 0;  // the engine-wide tie-break
    });
    CHECK(peek_tuples(eng, ts) == rows);
  }
}

TEST_CASE("obl_sort trace depends only on input size") {
  auto run = [](std::vector<std::int64_t> vals) {
    return testutil::run_digest([&](Engine& eng) {
      RelHandle r = make_ints(eng, "A", vals);
      obl_sort(eng, r, {{"A", true}});
    });
  };
  CHECK(run({5, 1, 4, 4, 2}) == run({1, 2, 3, 4, 5}));  // sorted vs unsorted
  CHECK(run({0, 0, 0}) != run({0, 0, 0, 0}));           // size is allowed to show
}

TEST_CASE("obl_filter copies exactly out_len satisfying rows") {
  Engine eng;
  RelHandle r = make_ints(eng, "A", {1, 2, 1});
  Predicate p;
  p.conjuncts = {{"A", CmpOp::Eq, Value(std::int64_t(1))}};
  RelHandle f = obl_filter(eng, r, p, 2);
  CHECK(int_column(eng, f, "A") == std::vector<std::int64_t>{1, 1});

  // Always-true predicate with out_len = |R| is a permutation of R.
  Predicate always;
  RelHandle id = obl_filter(eng, r, always, 3);
  CHECK(testutil::sorted_rows(eng, id) == testutil::sorted_rows(eng, r));

  // Asking for more rows than satisfy the predicate trips the runtime check.
  CHECK_THROWS_AS(obl_filter(eng, r, p, 3), SizeMismatch);
  CHECK_THROWS_AS(obl_filter(eng, r, p, 4), SizeMismatch);  // out_len > |R|
}

TEST_CASE("predicate comparisons against Null are false") {
  Schema s = int_schema("R", {"A"});
  Predicate p;
  p.conjuncts = {{"A", CmpOp::Eq, Value(std::int64_t(1))}};
  CHECK_FALSE(p.eval(s, {Value::null()}));
  Predicate q;
  q.conjuncts = {{"A", CmpOp::Ne, Value(std::int64_t(1))}};
  CHECK_FALSE(q.eval(s, {Value::null()}));
}

TEST_CASE("obl_project preserves duplicates") {
  Engine eng;
  Schema s = int_schema("R", {"A", "B"});
  RelHandle r = materialize(eng, s, {ints({1, 2}), ints({1, 3})});
  RelHandle p = obl_project(eng, r, {"A"});
  CHECK(int_column(eng, p, "A") == std::vector<std::int64_t>{1, 1});

  RelHandle all = obl_project(eng, r, {"A", "B"});
  CHECK(peek_tuples(eng, all) == peek_tuples(eng, r));
  CHECK_THROWS_AS(obl_project(eng, r, {"Z"}), UnknownAttribute);
}

TEST_CASE("augment adds a derived column") {
  Engine eng;
  RelHandle r = make_ints(eng, "A", {1, 2, 1});
  RelHandle b = augment(eng, r, int_attr("B"), [&](const Tuple& t) {
    return Value(2 * t[0].as_int());
  });
  CHECK(int_column(eng, b, "B") == std::vector<std::int64_t>{2, 4, 2});
  CHECK(int_column(eng, b, "A") == std::vector<std::int64_t>{1, 2, 1});

  RelHandle n = augment(eng, r, int_attr("N"), [](const Tuple&) { return Value(1); });
  CHECK(int_column(eng, n, "N") == std::vector<std::int64_t>{1, 1, 1});

  RelHandle dup = augment(eng, r, int_attr("A2"), [](const Tuple& t) { return t[0]; });
  CHECK(int_column(eng, dup, "A2") == int_column(eng, dup, "A"));

  CHECK_THROWS_AS(augment(eng, r, int_attr("A"), [](const Tuple&) { return Value(0); }),
                  AttributeCollision);
}

TEST_CASE("grouping_identity numbers rows within each group") {
  Engine eng;
  RelHandle r = make_ints(eng, "A", {1, 2, 1});
  RelHandle g = grouping_identity(eng, r, {"A"}, {}, "C");
  // Output is sorted by (A, tie-break); check the per-value id multiset.
  auto rows = peek_tuples(eng, g);
  std::map<std::int64_t, std::vector<std::int64_t>> ids;
  for (const auto& t : rows) ids[t[0].as_int()].push_back(t[1].as_int());
  CHECK(ids[1] == std::vector<std::int64_t>{1, 2});
  CHECK(ids[2] == std::vector<std::int64_t>{1});

  // Ungrouped, unordered: ids follow the arena sequence order.
  RelHandle seq = grouping_identity(eng, r, {}, {}, "Id");
  CHECK(int_column(eng, seq, "Id") == std::vector<std::int64_t>{1, 2, 3});
  CHECK(int_column(eng, seq, "A") == std::vector<std::int64_t>{1, 2, 1});

  RelHandle one = make_ints(eng, "A", {42});
  RelHandle g1 = grouping_identity(eng, one, {"A"}, {}, "Id");
  CHECK(int_column(eng, g1, "Id") == std::vector<std::int64_t>{1});
}

TEST_CASE("grouping ids within each group are exactly 1..group size") {
  Engine eng;
  std::mt19937_64 rng(3);
  std::vector<std::int64_t> vals;
  for (int i = 0; i < 60; ++i) vals.push_back(std::int64_t(rng() % 5));
  RelHandle r = make_ints(eng, "A", vals);
  RelHandle g = grouping_identity(eng, r, {"A"}, {}, "Id");
  std::map<std::int64_t, std::vector<std::int64_t>> ids;
  for (const auto& t : peek_tuples(eng, g)) ids[t[0].as_int()].push_back(t[1].as_int());
  for (auto& [a, v] : ids) {
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == std::int64_t(i + 1));
  }
}

TEST_CASE("grouping_running_sum accumulates within groups") {
  Engine eng;
  RelHandle r = make_ints(eng, "B", {2, 4, 2});
  // Ungrouped, unordered: prefix sums in sequence order.
  RelHandle d = grouping_running_sum(eng, r, {}, {}, "B", "D");
  CHECK(int_column(eng, d, "D") == std::vector<std::int64_t>{2, 6, 8});

  RelHandle z = make_ints(eng, "B", {0, 0, 0});
  RelHandle dz = grouping_running_sum(eng, z, {}, {}, "B", "D");
  CHECK(int_column(eng, dz, "D") == std::vector<std::int64_t>{0, 0, 0});

  // Grouped: the last row of each group carries the group total.
  Schema s = int_schema("R", {"G", "X"});
  RelHandle t = materialize(
      eng, s, {ints({1, 5}), ints({2, 7}), ints({1, 3}), ints({2, 1}), ints({1, 2})});
  RelHandle rs = grouping_running_sum(eng, t, {"G"}, {}, "X", "S");
  std::map<std::int64_t, std::int64_t> last, want{{1, 10}, {2, 8}};
  for (const auto& row : peek_tuples(eng, rs)) last[row[0].as_int()] = row[2].as_int();
  CHECK(last == want);
}

TEST_CASE("running min and max folds") {
  Engine eng;
  RelHandle r = make_ints(eng, "B", {4, 2, 7});
  RelHandle mn = grouping_running_fold(eng, r, {}, {}, "B", "Mn", RunningFold::Min);
  CHECK(int_column(eng, mn, "Mn") == std::vector<std::int64_t>{4, 2, 2});
  RelHandle mx = grouping_running_fold(eng, r, {}, {}, "B", "Mx", RunningFold::Max);
  CHECK(int_column(eng, mx, "Mx") == std::vector<std::int64_t>{4, 4, 7});
}

TEST_CASE("gen_union pads private attributes with Null") {
  Engine eng;
  Schema rs = int_schema("R", {"Id", "A", "Y"});
  Schema ss = int_schema("S", {"A", "Y"});
  RelHandle r = materialize(eng, rs, {ints({1, 10, 0}), ints({2, 20, 0})});
  RelHandle s = materialize(eng, ss, {ints({10, 2}), ints({20, 3}), ints({10, 4})});
  RelHandle u = gen_union(eng, r, s);
  REQUIRE(u.len == 5);
  auto rows = peek_tuples(eng, u);
  // R rows first, S rows after with Null Id.
  CHECK(rows[0] == ints({1, 10, 0}));
  CHECK(rows[2][0].is_null());
  CHECK(rows[2][1] == Value(std::int64_t(10)));

  RelHandle empty = materialize(eng, ss, {});
  RelHandle ue = gen_union(eng, r, empty);
  CHECK(peek_tuples(eng, ue) == peek_tuples(eng, r));

  Schema xs = int_schema("X", {"P"});
  Schema ys = int_schema("Y", {"Q"});
  RelHandle x = materialize(eng, xs, {ints({1})});
  RelHandle y = materialize(eng, ys, {ints({2})});
  RelHandle xy = gen_union(eng, x, y);
  REQUIRE(xy.len == 2);
  CHECK(peek_tuples(eng, xy)[0][1].is_null());
  CHECK(peek_tuples(eng, xy)[1][0].is_null());

  // Shared attribute with mismatched domain is rejected.
  Schema bad;
  bad.name = "B";
  bad.attrs = {Attribute{"P", Domain::Str, 8}};
  RelHandle b = materialize(eng, bad, {{Value("p")}});
  CHECK_THROWS_AS(gen_union(eng, x, b), DomainMismatch);
}

TEST_CASE("stitch concatenates positionally and checks shared attrs") {
  Engine eng;
  Schema xs = int_schema("X", {"P"});
  Schema ys = int_schema("Y", {"Q"});
  RelHandle x = materialize(eng, xs, {ints({1}), ints({2})});
  RelHandle y = materialize(eng, ys, {ints({10}), ints({20})});
  RelHandle z = stitch(eng, x, y);
  CHECK(peek_tuples(eng, z) == std::vector<Tuple>{ints({1, 10}), ints({2, 20})});

  RelHandle y1 = materialize(eng, ys, {ints({10})});
  CHECK_THROWS_AS(stitch(eng, x, y1), SizeMismatch);

  Schema js = int_schema("J", {"P", "R"});
  RelHandle j = materialize(eng, js, {ints({1, 5}), ints({9, 6})});
  CHECK_THROWS_AS(stitch(eng, x, j), StitchMismatch);  // P disagrees at row 2
}

TEST_CASE("stitch inverts a column split after sorting both sides") {
  Engine eng;
  Schema s = int_schema("R", {"K", "A", "B"});
  std::vector<Tuple> rows = {ints({3, 1, 9}), ints({1, 2, 8}), ints({2, 3, 7})};
  RelHandle r = materialize(eng, s, rows);
  RelHandle left = obl_sort(eng, obl_project(eng, r, {"K", "A"}), {{"K", true}});
  RelHandle right = obl_sort(eng, obl_project(eng, r, {"K", "B"}), {{"K", true}});
  RelHandle back = stitch(eng, left, right);
  CHECK(testutil::sorted_rows(eng, back) == testutil::sorted_rows(eng, r));
}

TEST_CASE("rename_attrs is metadata-only") {
  Engine eng;
  Schema s = int_schema("R", {"A", "B"});
  RelHandle r = materialize(eng, s, {ints({1, 2})});
  std::uint64_t before = eng.trace().size();
  RelHandle rn = rename_attrs(r, {{"A", "X"}});
  CHECK(eng.trace().size() == before);
  CHECK(rn.schema.has("X"));
  CHECK_FALSE(rn.schema.has("A"));
  CHECK(int_column(eng, rn, "X") == std::vector<std::int64_t>{1});
  CHECK_THROWS_AS(rename_attrs(r, {{"A", "B"}}), AttributeCollision);
}

TEST_CASE("tm folds read every slot and write nothing") {
  Engine eng;
  RelHandle w = make_ints(eng, "W", {1, 2});
  std::uint64_t before = eng.trace().size();
  CHECK(tm_sum(eng, w, "W") == 3);
  CHECK(eng.trace().size() == before + 2);  // reads only
  for (std::uint64_t i = before; i < eng.trace().size(); ++i)
    CHECK(eng.trace().at(i).op == AccessEvent::Op::Read);

  RelHandle e = make_ints(eng, "W", {});
  CHECK(tm_count(eng, e) == 0);

  RelHandle h = make_ints(eng, "W", {4, 1, 2});
  std::map<std::int64_t, std::int64_t> want{{1, 1}, {2, 1}, {4, 1}};
  CHECK(tm_histogram(eng, h, "W") == want);

  CHECK(tm_count_if(eng, h, [](const Tuple& t) { return t[0].as_int() > 1; }) == 2);
}

TEST_CASE("histogram bins are charged against the TM budget") {
  Engine eng;
  eng.tm().set_budget_words(8);
  std::vector<std::int64_t> vals;
  for (std::int64_t i = 0; i < 10; ++i) vals.push_back(i);  // 10 distinct bins
  RelHandle r = make_ints(eng, "W", vals);
  CHECK_THROWS_AS(tm_histogram(eng, r, "W"), TmBudgetExceeded);
}

TEST_CASE("primitive traces are functions of size parameters") {
  std::mt19937_64 rng(23);
  auto vals = [&](std::size_t n) {
    std::vector<std::int64_t> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(std::int64_t(rng() % 9));
    return v;
  };
  for (int round = 0; round < 10; ++round) {
    std::size_t n = 1 + rng() % 50;
    auto a = vals(n), b = vals(n);
    auto pipeline = [&](const std::vector<std::int64_t>& v) {
      return testutil::run_digest([&](Engine& eng) {
        RelHandle r = make_ints(eng, "A", v);
        RelHandle s = obl_sort(eng, r, {{"A", false}});
        RelHandle g = grouping_identity(eng, s, {"A"}, {}, "Id");
        RelHandle rs = grouping_running_sum(eng, g, {"A"}, {}, "A", "D");
        RelHandle p = obl_project(eng, rs, {"A", "D"});
        RelHandle u = gen_union(eng, p, r);
        (void)u;
      });
    };
    CHECK(pipeline(a) == pipeline(b));
  }
}
