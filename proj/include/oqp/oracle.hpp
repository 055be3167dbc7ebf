#pragma once

// Ground-truth evaluator: nested-loop natural joins, direct filters, map
// based grouping. No trace, no TM accounting, no obliviousness; used to
// validate engine results and to size generated instances.

#include <map>
#include <string>
#include <vector>

#include "oqp/executor.hpp"

namespace oqp {

struct OracleResult {
  std::vector<std::string> columns;
  std::vector<Tuple> rows;
};

namespace detail {

struct OracleTable {
  std::vector<std::string> columns;
  std::vector<Tuple> rows;

  std::size_t col(const std::string& n) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == n) return i;
    throw UnknownAttribute(n);
  }
};

inline OracleTable oracle_natural_join(const OracleTable& a, const OracleTable& b) {
  std::vector<std::pair<std::size_t, std::size_t>> on;
  std::vector<std::size_t> b_private;
  for (std::size_t j = 0; j < b.columns.size(); ++j) {
    bool shared = false;
    for (std::size_t i = 0; i < a.columns.size(); ++i)
      if (a.columns[i] == b.columns[j]) {
        on.emplace_back(i, j);
        shared = true;
      }
    if (!shared) b_private.push_back(j);
  }
  OracleTable out;
  out.columns = a.columns;
  for (std::size_t j : b_private) out.columns.push_back(b.columns[j]);
  for (const auto& ra : a.rows)
    for (const auto& rb : b.rows) {
      bool match = true;
      for (auto [i, j] : on)
        if (!(ra[i] == rb[j])) {
          match = false;
          break;
        }
      if (!match) continue;
      Tuple t = ra;
      for (std::size_t j : b_private) t.push_back(rb[j]);
      out.rows.push_back(std::move(t));
    }
  return out;
}

}  // namespace detail

// Evaluates the query template directly over the database: per-relation
// filters, one natural join across all listed relations, then grouping
// aggregation or projection. Semantics mirror the engine: SUM/AVG treat Null
// as 0, MIN/MAX skip Null, empty groups are absent, AVG is a (sum, count)
// pair, and duplicates are preserved.
inline OracleResult oracle_eval(const Database& db, const QueryTemplate& tmpl,
                                const Bindings& bindings) {
  detail::OracleTable acc;
  bool first = true;
  for (const auto& rn : tmpl.relations) {
    auto s = db.schemas.find(rn);
    auto t = db.tables.find(rn);
    if (s == db.schemas.end() || t == db.tables.end())
      throw UnknownAttribute("relation " + rn);
    detail::OracleTable cur;
    cur.columns = s->second.attr_names();
    Predicate pred;
    if (auto it = tmpl.predicates.find(rn); it != tmpl.predicates.end())
      pred = bind_predicate(it->second, bindings, s->second);
    for (const auto& row : t->second)
      if (pred.eval(s->second, row)) cur.rows.push_back(row);
    if (first) {
      acc = std::move(cur);
      first = false;
    } else {
      acc = detail::oracle_natural_join(acc, cur);
    }
  }

  OracleResult res;
  if (!tmpl.agg) {
    if (!tmpl.project.empty()) {
      std::vector<std::size_t> idx;
      for (const auto& a : tmpl.project) idx.push_back(acc.col(a));
      res.columns = tmpl.project;
      for (const auto& r : acc.rows) {
        Tuple t;
        for (std::size_t i : idx) t.push_back(r[i]);
        res.rows.push_back(std::move(t));
      }
    } else {
      res.columns = acc.columns;
      res.rows = acc.rows;
    }
    return res;
  }

  const AggSpec spec{tmpl.agg->fn, tmpl.agg->rel, tmpl.agg->attr, tmpl.group_by};
  std::vector<std::size_t> gidx;
  for (const auto& g : spec.group_by) gidx.push_back(acc.col(g));
  std::size_t xidx = 0;
  if (spec.fn != AggFn::Count) xidx = acc.col(spec.attr);

  struct Acc {
    std::int64_t sum = 0;
    std::int64_t count = 0;
    std::int64_t mn = std::numeric_limits<std::int64_t>::max();
    std::int64_t mx = std::numeric_limits<std::int64_t>::min();
  };
  std::map<Tuple, Acc> groups;
  for (const auto& r : acc.rows) {
    Tuple key;
    for (std::size_t i : gidx) key.push_back(r[i]);
    Acc& a = groups[key];
    ++a.count;
    if (spec.fn != AggFn::Count) {
      const Value& x = r[xidx];
      if (!x.is_null()) {
        a.sum = checked_add(a.sum, x.as_int());
        a.mn = std::min(a.mn, x.as_int());
        a.mx = std::max(a.mx, x.as_int());
      }
    }
  }

  res.columns = spec.group_by;
  switch (spec.fn) {
    case AggFn::Sum: res.columns.push_back("sum"); break;
    case AggFn::Count: res.columns.push_back("count"); break;
    case AggFn::Min: res.columns.push_back("min"); break;
    case AggFn::Max: res.columns.push_back("max"); break;
    case AggFn::Avg:
      res.columns.push_back("sum");
      res.columns.push_back("count");
      break;
  }
  for (const auto& [key, a] : groups) {
    Tuple t = key;
    switch (spec.fn) {
      case AggFn::Sum: t.push_back(Value(a.sum)); break;
      case AggFn::Count: t.push_back(Value(a.count)); break;
      case AggFn::Min: t.push_back(Value(a.mn)); break;
      case AggFn::Max: t.push_back(Value(a.mx)); break;
      case AggFn::Avg:
        t.push_back(Value(a.sum));
        t.push_back(Value(a.count));
        break;
    }
    res.rows.push_back(std::move(t));
  }
  return res;
}

// Canonical form for multiset comparison: columns sorted by name, rows sorted
// by the full-tuple order.
inline OracleResult canonical_result(std::vector<std::string> columns,
                                     std::vector<Tuple> rows) {
  std::vector<std::size_t> order(columns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return columns[a] < columns[b]; });
  OracleResult out;
  for (std::size_t i : order) out.columns.push_back(columns[i]);
  for (const auto& r : rows) {
    Tuple t;
    for (std::size_t i : order) t.push_back(r[i]);
    out.rows.push_back(std::move(t));
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const Tuple& a, const Tuple& b) { return full_tuple_compare(a, b) < 0; });
  return out;
}

inline bool results_equal(const OracleResult& a, const OracleResult& b) {
  return a.columns == b.columns && a.rows == b.rows;
}

}  // namespace oqp
