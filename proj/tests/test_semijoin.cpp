#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>

#include "test_util.hpp"

using namespace oqp;
using testutil::int_column;
using testutil::int_schema;
using testutil::ints;

namespace {

// Brute-force per-row semi-join sum for oracle checks.
std::vector<std::int64_t> oracle_sums(const Schema& rs, const std::vector<Tuple>& r,
                                      const Schema& ss, const std::vector<Tuple>& s,
                                      const std::string& y) {
  auto join_attrs = shared_attrs(rs, ss);
  std::size_t yi = ss.index_of(y);
  std::vector<std::int64_t> out;
  for (const auto& rt : r) {
    std::int64_t sum = 0;
    for (const auto& st : s) {
      bool match = true;
      for (const auto& a : join_attrs)
        if (!(rt[rs.index_of(a)] == st[ss.index_of(a)])) {
          match = false;
          break;
        }
      if (match && !st[yi].is_null()) sum += st[yi].as_int();
    }
    out.push_back(sum);
  }
  return out;
}

}  // namespace

TEST_CASE("semi-join aggregation on the two-row / three-row instance") {
  Engine eng;
  Schema rs;
  rs.name = "R";
  rs.attrs = {int_attr("Id"), Attribute{"A", Domain::Str, 8}};
  Schema ss;
  ss.name = "S";
  ss.attrs = {Attribute{"A", Domain::Str, 8}, int_attr("Y")};
  RelHandle r = materialize(eng, rs,
                            {{Value(std::int64_t(1)), Value("a")},
                             {Value(std::int64_t(2)), Value("b")}});
  RelHandle s = materialize(eng, ss,
                            {{Value("a"), Value(std::int64_t(2))},
                             {Value("b"), Value(std::int64_t(3))},
                             {Value("a"), Value(std::int64_t(4))}});
  SemiJoinDebug dbg;
  RelHandle out = semijoin_agg(eng, r, s, "X", "Y", &dbg);
  REQUIRE(out.len == 2);
  std::map<std::int64_t, std::int64_t> got;
  for (const auto& t : peek_tuples(eng, out))
    got[t[0].as_int()] = t[out.schema.index_of("X")].as_int();
  CHECK(got[1] == 6);
  CHECK(got[2] == 3);

  // The running-sum column over the lineage union, in its (A, lineage) sort
  // order: S rows of group a give 2 then 6, the R row inherits 6; group b
  // gives 3 then 3.
  REQUIRE(dbg.captured);
  CHECK(int_column(eng, dbg.summed_union, "X") ==
        std::vector<std::int64_t>{2, 6, 6, 3, 3});
  CHECK(dbg.summed_union.len == 5);
}

TEST_CASE("semi-join sum against a second relation, per-row") {
  // A=[1,2,1] against S{(1,1),(2,1),(2,1)}: sums keyed by A are 1 and 2.
  Engine eng;
  Schema rs = int_schema("R", {"Id", "A"});
  Schema ss = int_schema("S", {"A", "B"});
  RelHandle r =
      materialize(eng, rs, {ints({1, 1}), ints({2, 2}), ints({3, 1})});
  RelHandle s =
      materialize(eng, ss, {ints({1, 1}), ints({2, 1}), ints({2, 1})});
  RelHandle out = semijoin_agg(eng, r, s, "E", "B");
  std::map<std::int64_t, std::int64_t> by_id;
  for (const auto& t : peek_tuples(eng, out)) by_id[t[0].as_int()] = t[2].as_int();
  CHECK(by_id[1] == 1);
  CHECK(by_id[2] == 2);
  CHECK(by_id[3] == 1);
}

TEST_CASE("empty S gives the empty sum") {
  Engine eng;
  Schema rs = int_schema("R", {"A"});
  Schema ss = int_schema("S", {"A", "Y"});
  RelHandle r = materialize(eng, rs, {ints({1}), ints({2})});
  RelHandle s = materialize(eng, ss, {});
  RelHandle out = semijoin_agg(eng, r, s, "X", "Y");
  CHECK(int_column(eng, out, "X") == std::vector<std::int64_t>{0, 0});
}

TEST_CASE("output schema and size") {
  Engine eng;
  Schema rs = int_schema("R", {"A", "B"});
  Schema ss = int_schema("S", {"A", "Y"});
  RelHandle r = materialize(eng, rs, {ints({1, 7}), ints({1, 8})});
  RelHandle s = materialize(eng, ss, {ints({1, 5})});
  RelHandle out = semijoin_agg(eng, r, s, "X", "Y");
  CHECK(out.schema.attr_names() == std::vector<std::string>{"A", "B", "X"});
  CHECK(out.len == r.len);
  // Duplicate R rows each receive the full sum.
  CHECK(int_column(eng, out, "X") == std::vector<std::int64_t>{5, 5});
}

TEST_CASE("collision and precondition checks") {
  Engine eng;
  Schema rs = int_schema("R", {"A", "X"});
  Schema ss = int_schema("S", {"A", "Y"});
  RelHandle r = materialize(eng, rs, {ints({1, 0})});
  RelHandle s = materialize(eng, ss, {ints({1, 5})});
  CHECK_THROWS_AS(semijoin_agg(eng, r, s, "X", "Y"), AttributeCollision);

  Schema ds = int_schema("D", {"Z", "Y"});
  RelHandle d = materialize(eng, ds, {ints({1, 5})});
  CHECK_THROWS_AS(semijoin_agg(eng, r, d, "W", "Y"), Error);  // no shared attrs

  Schema strs;
  strs.name = "T";
  strs.attrs = {int_attr("A"), Attribute{"Y", Domain::Str, 8}};
  RelHandle t = materialize(eng, strs, {{Value(std::int64_t(1)), Value("y")}});
  CHECK_THROWS_AS(semijoin_agg(eng, r, t, "W", "Y"), DomainMismatch);
}

TEST_CASE("degrees on the three-row / four-row join instance") {
  // R carries A values [a,b,a] and S carries [a,b,a,a]; per-row ids recover
  // the input order after the degree pipeline's sorts.
  Engine eng;
  Schema rs;
  rs.name = "R";
  rs.attrs = {int_attr("RId"), Attribute{"A", Domain::Str, 8}};
  Schema ss;
  ss.name = "S";
  ss.attrs = {int_attr("SId"), Attribute{"A", Domain::Str, 8}};
  RelHandle r = materialize(eng, rs,
                            {{Value(std::int64_t(1)), Value("a")},
                             {Value(std::int64_t(2)), Value("b")},
                             {Value(std::int64_t(3)), Value("a")}});
  RelHandle s = materialize(eng, ss,
                            {{Value(std::int64_t(1)), Value("a")},
                             {Value(std::int64_t(2)), Value("b")},
                             {Value(std::int64_t(3)), Value("a")},
                             {Value(std::int64_t(4)), Value("a")}});
  auto by_id = [&](const RelHandle& rel, const std::string& deg) {
    std::map<std::int64_t, std::int64_t> out;
    std::size_t di = rel.schema.index_of(deg);
    for (const auto& t : peek_tuples(eng, rel)) out[t[0].as_int()] = t[di].as_int();
    return out;
  };
  RelHandle rd = degree(eng, r, s, "N_S");
  std::map<std::int64_t, std::int64_t> want_r{{1, 3}, {2, 1}, {3, 3}};
  CHECK(by_id(rd, "N_S") == want_r);
  RelHandle sd = degree(eng, s, r, "N_R");
  std::map<std::int64_t, std::int64_t> want_s{{1, 2}, {2, 1}, {3, 2}, {4, 2}};
  CHECK(by_id(sd, "N_R") == want_s);
}

TEST_CASE("degree sums equal the join size; oracle equivalence") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 40; ++round) {
    Engine eng;
    Schema rs = int_schema("R", {"A", "B"});
    Schema ss = int_schema("S", {"A", "Y"});
    std::vector<Tuple> r, s;
    std::size_t nr = 1 + rng() % 30, ns = rng() % 30;
    for (std::size_t i = 0; i < nr; ++i)
      r.push_back(ints({std::int64_t(rng() % 6), std::int64_t(rng() % 100)}));
    for (std::size_t i = 0; i < ns; ++i)
      s.push_back(ints({std::int64_t(rng() % 6), std::int64_t(rng() % 100)}));
    RelHandle rh = materialize(eng, rs, r);
    RelHandle sh = materialize(eng, ss, s);

    RelHandle sums = semijoin_agg(eng, rh, sh, "X", "Y");
    // The engine sorts its output; compare against the oracle as pairs.
    auto want_sums = oracle_sums(rs, r, ss, s, "Y");
    std::multiset<std::pair<std::int64_t, std::int64_t>> got, want;
    for (const auto& t : peek_tuples(eng, sums))
      got.emplace(t[1].as_int(), t[2].as_int());  // (B identifies the row, X)
    for (std::size_t i = 0; i < r.size(); ++i)
      want.emplace(r[i][1].as_int(), want_sums[i]);
    CHECK(got == want);

    RelHandle degs = degree(eng, rh, sh, "D");
    std::int64_t total = tm_sum(eng, degs, "D");
    std::int64_t join_size = 0;
    for (const auto& rt : r)
      for (const auto& st : s)
        if (rt[0] == st[0]) ++join_size;
    CHECK(total == join_size);
  }
}

TEST_CASE("semi-join trace is a function of the two input sizes") {
  std::mt19937_64 rng(29);
  for (int round = 0; round < 8; ++round) {
    std::size_t nr = 1 + rng() % 20, ns = rng() % 20;
    auto make = [&] {
      std::vector<Tuple> r, s;
      for (std::size_t i = 0; i < nr; ++i)
        r.push_back(ints({std::int64_t(rng() % 5), std::int64_t(rng() % 9)}));
      for (std::size_t i = 0; i < ns; ++i)
        s.push_back(ints({std::int64_t(rng() % 5), std::int64_t(rng() % 9)}));
      return std::make_pair(r, s);
    };
    auto run = [&](const std::pair<std::vector<Tuple>, std::vector<Tuple>>& in) {
      return testutil::run_digest([&](Engine& eng) {
        RelHandle rh = materialize(eng, int_schema("R", {"A", "B"}), in.first);
        RelHandle sh = materialize(eng, int_schema("S", {"A", "Y"}), in.second);
        semijoin_agg(eng, rh, sh, "X", "Y");
      });
    };
    CHECK(run(make()) == run(make()));
  }
}

TEST_CASE("min and max semi-join folds") {
  Engine eng;
  Schema rs = int_schema("R", {"A"});
  Schema ss = int_schema("S", {"A", "Y"});
  RelHandle r = materialize(eng, rs, {ints({1}), ints({2})});
  RelHandle s = materialize(
      eng, ss, {ints({1, 4}), ints({1, 9}), ints({2, -3}), ints({2, 5})});
  RelHandle mn = semijoin_fold(eng, r, s, "M", "Y", RunningFold::Min);
  std::map<std::int64_t, std::int64_t> by_a;
  for (const auto& t : peek_tuples(eng, mn)) by_a[t[0].as_int()] = t[1].as_int();
  // Min folds start from the R-side initializer (int64 max), so matched rows
  // carry the true minimum.
  CHECK(by_a[1] == 4);
  CHECK(by_a[2] == -3);
  RelHandle mx = semijoin_fold(eng, r, s, "M", "Y", RunningFold::Max);
  by_a.clear();
  for (const auto& t : peek_tuples(eng, mx)) by_a[t[0].as_int()] = t[1].as_int();
  CHECK(by_a[1] == 9);
  CHECK(by_a[2] == 5);
}
