#pragma once

// Verification harness: matched instance-pair generators, the trace-equality
// verifier, and a deliberately leaky join used to show the verifier can fail.
// Engine determinism reduces distribution equality to bit equality, so a
// verdict needs exactly two runs.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oqp/oracle.hpp"

namespace oqp {

struct Verdict {
  bool pass = false;
  std::int64_t divergence = -1;  // first differing event index when failing
  std::string detail;
  std::uint64_t trace_events = 0;
  std::size_t tm_peak_words = 0;
  std::size_t counter_hwm = 0;
};

// Runs both sides in fresh engines and compares layout logs and traces
// bit-exactly.
inline Verdict verify_oblivious(const std::function<void(Engine&)>& run1,
                                const std::function<void(Engine&)>& run2,
                                std::uint64_t engine_seed = 0x5eed) {
  Engine e1(engine_seed), e2(engine_seed);
  run1(e1);
  run2(e2);
  Verdict v;
  v.trace_events = e1.trace().size();
  v.tm_peak_words = std::max(e1.tm().peak_words(), e2.tm().peak_words());
  v.counter_hwm = std::max(e1.stats().counter_hwm, e2.stats().counter_hwm);
  if (e1.layout_log() != e2.layout_log()) {
    v.pass = false;
    v.divergence = 0;
    v.detail = "arena layouts differ";
    return v;
  }
  std::int64_t d = Trace::first_divergence(e1.trace(), e2.trace());
  if (d >= 0) {
    v.pass = false;
    v.divergence = d;
    v.detail = "traces diverge at event " + std::to_string(d);
    return v;
  }
  v.pass = true;
  return v;
}

// Two databases over the same schemas with pairwise equal relation sizes and
// equal query output sizes (checked via the oracle before verification).
struct InstancePair {
  Database d1, d2;
  QueryTemplate tmpl;
  Bindings b1, b2;
  std::string note;
};

// Confirms the pair matching conditions, checks both sides against the
// oracle, and compares the two execution traces.
inline Verdict verify_pair(const InstancePair& pair, std::uint64_t engine_seed = 0x5eed) {
  Plan p1 = plan(pair.tmpl, pair.d1.schemas);
  Plan p2 = plan(pair.tmpl, pair.d2.schemas);

  for (const auto& rn : pair.tmpl.relations)
    if (pair.d1.tables.at(rn).size() != pair.d2.tables.at(rn).size()) {
      Verdict v;
      v.detail = "pair sizes differ on relation " + rn;
      return v;
    }
  OracleResult o1 = oracle_eval(pair.d1, pair.tmpl, pair.b1);
  OracleResult o2 = oracle_eval(pair.d2, pair.tmpl, pair.b2);
  if (o1.rows.size() != o2.rows.size()) {
    Verdict v;
    v.detail = "pair output sizes differ";
    return v;
  }

  RunResult r1, r2;
  Verdict v = verify_oblivious(
      [&](Engine& e) { r1 = execute(e, p1, pair.d1, pair.b1); },
      [&](Engine& e) { r2 = execute(e, p2, pair.d2, pair.b2); }, engine_seed);
  if (!v.pass) return v;

  auto c1 = canonical_result(r1.schema.attr_names(), r1.rows);
  auto c2 = canonical_result(r2.schema.attr_names(), r2.rows);
  if (!results_equal(c1, canonical_result(o1.columns, o1.rows)) ||
      !results_equal(c2, canonical_result(o2.columns, o2.rows))) {
    v.pass = false;
    v.detail = "engine result disagrees with the oracle";
  }
  return v;
}

inline nlohmann::json verdict_json(const std::string& pair_id, std::uint64_t seed,
                                   const std::string& op, const Verdict& v) {
  return nlohmann::json{{"pair", pair_id},
                        {"seed", seed},
                        {"op", op},
                        {"verdict", v.pass ? "Pass" : "Fail"},
                        {"first_divergence", v.divergence},
                        {"detail", v.detail},
                        {"trace_events", v.trace_events},
                        {"counter_hwm", v.counter_hwm},
                        {"tm_peak_words", v.tm_peak_words}};
}

namespace detail {

inline Schema two_int_schema(const std::string& name, const std::string& a,
                             const std::string& b) {
  Schema s;
  s.name = name;
  s.attrs = {int_attr(a), int_attr(b)};
  return s;
}

// Deterministic shuffle of row order.
inline void shuffle_rows(std::vector<Tuple>& rows, std::mt19937_64& rng) {
  for (std::size_t i = rows.size(); i > 1; --i)
    std::swap(rows[i - 1], rows[rng() % i]);
}

}  // namespace detail

// Matched pair for the binary join R(J,A) ⋈ S(J,B). Both instances realize
// the same multiset of per-join-value degree pairs, so input and output sizes
// agree by construction; values, assignment order, and row order differ.
inline InstancePair gen_join_pair(std::uint64_t seed, std::size_t n_per_side) {
  std::mt19937_64 rng(seed);
  // Degree profile: (r-degree, s-degree) blocks, padded to exact sizes with
  // degenerate blocks.
  std::vector<std::pair<std::size_t, std::size_t>> profile;
  std::size_t used_r = 0, used_s = 0;
  while (used_r + 3 < n_per_side && used_s + 3 < n_per_side) {
    std::size_t dr = rng() % 4, ds = rng() % 4;
    if (dr == 0 && ds == 0) continue;
    profile.emplace_back(dr, ds);
    used_r += dr;
    used_s += ds;
  }
  while (used_r < n_per_side) {
    profile.emplace_back(1, 0);
    ++used_r;
  }
  while (used_s < n_per_side) {
    profile.emplace_back(0, 1);
    ++used_s;
  }

  InstancePair pair;
  pair.tmpl.relations = {"R", "S"};
  Schema rs = detail::two_int_schema("R", "J", "A");
  Schema ss = detail::two_int_schema("S", "J", "B");
  auto build = [&](Database& db, std::int64_t value_base, bool reverse) {
    db.schemas = {{"R", rs}, {"S", ss}};
    std::vector<Tuple> r, s;
    for (std::size_t g = 0; g < profile.size(); ++g) {
      auto [dr, ds] = profile[reverse ? profile.size() - 1 - g : g];
      std::int64_t j = value_base + std::int64_t(g);
      for (std::size_t k = 0; k < dr; ++k)
        r.push_back({Value(j), Value(std::int64_t(rng() % 1000))});
      for (std::size_t k = 0; k < ds; ++k)
        s.push_back({Value(j), Value(std::int64_t(rng() % 1000))});
    }
    detail::shuffle_rows(r, rng);
    detail::shuffle_rows(s, rng);
    db.tables = {{"R", std::move(r)}, {"S", std::move(s)}};
  };
  build(pair.d1, 1000, false);
  build(pair.d2, 5000, true);
  pair.note = "binary join, profile-matched";
  return pair;
}

// Matched pair for a 3-relation chain R1(A,B) ⋈ R2(B,C) ⋈ R3(C,D). The two
// instances share the B-degree profile of R1, the C-degree profile of R3,
// and the multiset of (B-class, C-class) pairs in R2.
inline InstancePair gen_chain_pair(std::uint64_t seed, std::size_t n_per_side) {
  std::mt19937_64 rng(seed);
  std::size_t k = std::max<std::size_t>(2, n_per_side / 3);
  std::vector<std::size_t> db(k), dc(k);  // degree of class i in R1 / R3
  std::vector<std::pair<std::size_t, std::size_t>> mid;  // R2 rows as class pairs
  for (std::size_t i = 0; i < k; ++i) {
    db[i] = rng() % 3;
    dc[i] = rng() % 3;
  }
  for (std::size_t i = 0; i < n_per_side; ++i)
    mid.emplace_back(rng() % k, rng() % k);
  auto pad = [&](std::vector<std::size_t>& d) {
    std::size_t total = 0;
    for (auto x : d) total += x;
    while (total < n_per_side) {
      ++d[rng() % k];
      ++total;
    }
    while (total > n_per_side) {
      std::size_t i = rng() % k;
      if (d[i] > 0) {
        --d[i];
        --total;
      }
    }
  };
  pad(db);
  pad(dc);

  InstancePair pair;
  pair.tmpl.relations = {"R1", "R2", "R3"};
  Schema s1 = detail::two_int_schema("R1", "A", "B");
  Schema s2 = detail::two_int_schema("R2", "B", "C");
  Schema s3 = detail::two_int_schema("R3", "C", "D");
  auto build = [&](Database& dbx, std::int64_t base, bool reverse) {
    dbx.schemas = {{"R1", s1}, {"R2", s2}, {"R3", s3}};
    auto bval = [&](std::size_t cls) {
      return Value(base + std::int64_t(reverse ? k - 1 - cls : cls));
    };
    auto cval = [&](std::size_t cls) {
      return Value(base + 100000 + std::int64_t(reverse ? k - 1 - cls : cls));
    };
    std::vector<Tuple> r1, r2, r3;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t x = 0; x < db[i]; ++x)
        r1.push_back({Value(std::int64_t(rng() % 100)), bval(i)});
      for (std::size_t x = 0; x < dc[i]; ++x)
        r3.push_back({cval(i), Value(std::int64_t(rng() % 100))});
    }
    for (auto [bc, cc] : mid) r2.push_back({bval(bc), cval(cc)});
    detail::shuffle_rows(r1, rng);
    detail::shuffle_rows(r2, rng);
    detail::shuffle_rows(r3, rng);
    dbx.tables = {{"R1", std::move(r1)}, {"R2", std::move(r2)}, {"R3", std::move(r3)}};
  };
  build(pair.d1, 1000, false);
  build(pair.d2, 7000, true);
  pair.note = "3-chain join, profile-matched";
  return pair;
}

// Matched pair for grouped aggregation over a chain R1(G,J) ⋈ R2(J,X),
// optionally with a selection on R2. Group survival profile is shared, so
// the output group count matches by construction.
inline InstancePair gen_agg_pair(std::uint64_t seed, std::size_t n_per_side, AggFn fn,
                                 bool with_selection = false) {
  std::mt19937_64 rng(seed);
  std::size_t k = std::max<std::size_t>(2, n_per_side / 4);  // groups, one R1 row each
  std::vector<std::size_t> deg(k), pass(k);
  for (std::size_t i = 0; i < k; ++i) deg[i] = rng() % 3;
  std::size_t total = 0;
  for (auto d : deg) total += d;
  while (total < n_per_side) {
    ++deg[rng() % k];
    ++total;
  }
  while (total > n_per_side) {
    std::size_t i = rng() % k;
    if (deg[i] > 0) {
      --deg[i];
      --total;
    }
  }
  // Per group, how many of its R2 rows pass the selection.
  for (std::size_t i = 0; i < k; ++i)
    pass[i] = with_selection ? rng() % (deg[i] + 1) : deg[i];

  InstancePair pair;
  pair.tmpl.relations = {"R1", "R2"};
  AggSpec spec;
  spec.fn = fn;
  spec.rel = "R2";
  spec.attr = "X";
  pair.tmpl.agg = spec;
  pair.tmpl.group_by = {"G"};
  if (with_selection) {
    TemplateAtom atom;
    atom.attr = "X";
    atom.op = CmpOp::Le;
    atom.placeholder = "?1";
    pair.tmpl.predicates["R2"].push_back(atom);
  }

  Schema s1 = detail::two_int_schema("R1", "G", "J");
  Schema s2 = detail::two_int_schema("R2", "J", "X");
  // Passing rows get X below the threshold, failing rows above; thresholds
  // differ per side.
  auto build = [&](Database& db, std::int64_t base, std::int64_t threshold,
                   bool reverse) {
    db.schemas = {{"R1", s1}, {"R2", s2}};
    std::vector<Tuple> r1, r2;
    // R1 needs n rows too: one per group plus filler rows in dead groups.
    std::size_t filler = n_per_side - k;
    for (std::size_t g = 0; g < k; ++g) {
      std::size_t i = reverse ? k - 1 - g : g;
      std::int64_t j = base + std::int64_t(g);
      r1.push_back({Value(base + 500000 + std::int64_t(g)), Value(j)});
      for (std::size_t x = 0; x < deg[i]; ++x) {
        bool ok = x < pass[i];
        std::int64_t xv = ok ? std::int64_t(rng() % 50) + (threshold - 50)
                             : threshold + 1 + std::int64_t(rng() % 50);
        r2.push_back({Value(j), Value(xv)});
      }
    }
    for (std::size_t f = 0; f < filler; ++f)
      r1.push_back({Value(base + 600000 + std::int64_t(f)),
                    Value(base - 1 - std::int64_t(f))});  // joins nothing
    detail::shuffle_rows(r1, rng);
    detail::shuffle_rows(r2, rng);
    db.tables = {{"R1", std::move(r1)}, {"R2", std::move(r2)}};
  };
  build(pair.d1, 1000, 100, false);
  build(pair.d2, 9000, 220, true);
  if (with_selection) {
    pair.b1["?1"] = Value(std::int64_t(100));
    pair.b2["?1"] = Value(std::int64_t(220));
  }
  pair.note = std::string("grouped ") + agg_fn_name(fn) +
              (with_selection ? " with selection" : "");
  return pair;
}

// Matched pair exercising selection + projection without aggregation:
// sigma_{A <= ?1}(R(A,B)) with equal pass counts on both sides.
inline InstancePair gen_filter_pair(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::size_t passing = rng() % (n + 1);
  InstancePair pair;
  pair.tmpl.relations = {"R"};
  TemplateAtom atom;
  atom.attr = "A";
  atom.op = CmpOp::Le;
  atom.placeholder = "?1";
  pair.tmpl.predicates["R"].push_back(atom);
  pair.tmpl.project = {"B"};
  Schema s = detail::two_int_schema("R", "A", "B");
  auto build = [&](Database& db, std::int64_t threshold) {
    db.schemas = {{"R", s}};
    std::vector<Tuple> rows;
    for (std::size_t i = 0; i < n; ++i) {
      std::int64_t a = i < passing ? threshold - std::int64_t(rng() % 100)
                                   : threshold + 1 + std::int64_t(rng() % 100);
      rows.push_back({Value(a), Value(std::int64_t(rng() % 1000))});
    }
    detail::shuffle_rows(rows, rng);
    db.tables = {{"R", std::move(rows)}};
  };
  build(pair.d1, 1000);
  pair.b1["?1"] = Value(std::int64_t(1000));
  build(pair.d2, -3000);
  pair.b2["?1"] = Value(std::int64_t(-3000));
  pair.note = "selection with matched pass counts";
  return pair;
}

// Handcrafted pair modeled on two join instances with equal input and output
// sizes but very different join graphs: a perfect matching (16 pairs with
// degree 1) versus one 4x4 complete bipartite block plus 12 unmatched rows
// per side. Both give |R| = |S| = 16 and |R join S| = 16.
inline InstancePair bundled_pair() {
  InstancePair pair;
  pair.tmpl.relations = {"R", "S"};
  Schema rs = detail::two_int_schema("R", "J", "A");
  Schema ss = detail::two_int_schema("S", "J", "B");
  pair.d1.schemas = {{"R", rs}, {"S", ss}};
  pair.d2.schemas = {{"R", rs}, {"S", ss}};
  std::vector<Tuple> r1, s1, r2, s2;
  for (std::int64_t i = 0; i < 16; ++i) {
    r1.push_back({Value(100 + i), Value(i)});
    s1.push_back({Value(100 + i), Value(50 + i)});
  }
  for (std::int64_t i = 0; i < 4; ++i) {
    r2.push_back({Value(7), Value(i)});
    s2.push_back({Value(7), Value(50 + i)});
  }
  for (std::int64_t i = 0; i < 12; ++i) {
    r2.push_back({Value(200 + i), Value(4 + i)});
    s2.push_back({Value(300 + i), Value(54 + i)});
  }
  pair.d1.tables = {{"R", std::move(r1)}, {"S", std::move(s1)}};
  pair.d2.tables = {{"R", std::move(r2)}, {"S", std::move(s2)}};
  pair.note = "matching vs clique, |R|=|S|=16, m=16";
  return pair;
}

// General generator: random instances resized until the oracle confirms the
// matching conditions; deterministic in the seed. Throws GenerationTimeout
// when the retry budget runs out.
inline InstancePair gen_matched_pair(const QueryTemplate& tmpl,
                                     const std::map<std::string, Schema>& schemas,
                                     std::size_t n_per_relation, std::uint64_t seed,
                                     const Bindings& bindings = {},
                                     std::size_t max_attempts = 500) {
  std::mt19937_64 rng(seed);
  auto gen_db = [&]() {
    Database db;
    for (const auto& rn : tmpl.relations) {
      const Schema& s = schemas.at(rn);
      db.schemas[rn] = s;
      std::vector<Tuple> rows;
      for (std::size_t i = 0; i < n_per_relation; ++i) {
        Tuple t;
        for (const auto& a : s.attrs) {
          if (a.domain == Domain::Int)
            t.push_back(Value(std::int64_t(rng() % 8)));
          else
            t.push_back(Value(std::string(1, char('a' + rng() % 8))));
        }
        rows.push_back(std::move(t));
      }
      db.tables[rn] = std::move(rows);
    }
    return db;
  };
  InstancePair pair;
  pair.tmpl = tmpl;
  pair.b1 = bindings;
  pair.b2 = bindings;
  pair.d1 = gen_db();
  std::size_t want = oracle_eval(pair.d1, tmpl, bindings).rows.size();
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    pair.d2 = gen_db();
    if (oracle_eval(pair.d2, tmpl, bindings).rows.size() == want) {
      pair.note = "random matched pair";
      return pair;
    }
  }
  throw GenerationTimeout("no matched instance after " +
                          std::to_string(max_attempts) + " attempts");
}

// Deliberately non-oblivious textbook join: output rows are written the
// moment a match is found, so the write pattern leaks the join structure.
// Shipped as a foil to demonstrate the verifier rejects it.
inline RelHandle nested_loop_join_foil(Engine& eng, const RelHandle& R,
                                       const RelHandle& S) {
  auto join_attrs = shared_attrs(R.schema, S.schema);
  Schema out_schema = R.schema;
  out_schema.name = R.schema.name + "x" + S.schema.name;
  for (const auto& a : S.schema.attrs)
    if (!R.schema.has(a.name)) out_schema.attrs.push_back(a);
  RelHandle out;
  out.schema = out_schema;
  out.arena = eng.alloc_arena(out_schema.row_width(), R.len * S.len);
  out.len = 0;
  for (std::size_t i = 0; i < R.len; ++i) {
    Tuple r = read_tuple(eng, R, i);
    for (std::size_t j = 0; j < S.len; ++j) {
      Tuple s = read_tuple(eng, S, j);
      bool match = true;
      for (const auto& a : join_attrs)
        if (!(r[R.schema.index_of(a)] == s[S.schema.index_of(a)])) {
          match = false;
          break;
        }
      if (!match) continue;
      Tuple t = r;
      for (std::size_t c = 0; c < S.schema.arity(); ++c)
        if (!R.schema.has(S.schema.attrs[c].name)) t.push_back(s[c]);
      write_tuple(eng, out, out.len++, t);
    }
  }
  return out;
}

}  // namespace oqp
