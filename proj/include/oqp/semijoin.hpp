#pragma once

// Semi-join aggregation: R.(X <-|x| Sum(S.Y)). Lineage union + grouped
// running sum + oblivious filter; the workhorse behind join degrees and
// bottom-up counting.

#include <string>

#include "oqp/primitives.hpp"

namespace oqp {

struct SemiJoinDebug {
  bool captured = false;
  RelHandle summed_union;  // the U table after the running fold
};

namespace detail {

inline std::int64_t fold_init(RunningFold op) {
  switch (op) {
    case RunningFold::Sum: return 0;
    case RunningFold::Min: return std::numeric_limits<std::int64_t>::max();
    case RunningFold::Max: return std::numeric_limits<std::int64_t>::min();
  }
  return 0;
}

}  // namespace detail

// Generalized semi-join fold: for each R tuple, folds Y over all S tuples
// agreeing on Attr(R) ∩ Attr(S). Sum is the canonical fold; Min/Max reuse
// the same pipeline shape with a neutral initializer on the R side.
inline RelHandle semijoin_fold(Engine& eng, const RelHandle& R, const RelHandle& S,
                               const std::string& x_attr, const std::string& y_attr,
                               RunningFold op, SemiJoinDebug* debug = nullptr) {
  auto join_attrs = shared_attrs(R.schema, S.schema);
  if (join_attrs.empty())
    throw Error("semi-join requires at least one shared attribute");
  (void)S.schema.index_of(y_attr);
  if (S.schema.attrs[S.schema.index_of(y_attr)].domain != Domain::Int)
    throw DomainMismatch("semi-join fold source must be numeric: " + y_attr);
  if (R.schema.has(y_attr)) throw AttributeCollision(y_attr);
  if (R.schema.has(x_attr) || S.schema.has(x_attr)) throw AttributeCollision(x_attr);
  if (R.schema.has("#Src") || S.schema.has("#Src")) throw AttributeCollision("#Src");

  std::int64_t init = detail::fold_init(op);
  RelHandle r1 = augment(eng, R, int_attr("#Src"), [](const Tuple&) { return Value(1); });
  RelHandle r2 = augment(eng, r1, int_attr(y_attr),
                         [init](const Tuple&) { return Value(init); });
  RelHandle s1 = augment(eng, S, int_attr("#Src"), [](const Tuple&) { return Value(0); });
  RelHandle u = gen_union(eng, r2, s1);
  RelHandle summed =
      grouping_running_fold(eng, u, join_attrs, {{"#Src", true}}, y_attr, x_attr, op);
  eng.free_arena(r1.arena);
  eng.free_arena(r2.arena);
  eng.free_arena(s1.arena);
  eng.free_arena(u.arena);

  std::size_t src = summed.schema.index_of("#Src");
  RelHandle picked = obl_filter_fn(
      eng, summed,
      [src](const Tuple& t) { return !t[src].is_null() && t[src].as_int() == 1; },
      R.len);
  if (debug) {
    debug->captured = true;
    debug->summed_union = summed;
  } else {
    eng.free_arena(summed.arena);
  }
  auto keep = R.schema.attr_names();
  keep.push_back(x_attr);
  RelHandle out = obl_project(eng, picked, keep);
  eng.free_arena(picked.arena);
  return out;
}

// R.(X <-|x| Sum(S.Y)): output schema Attr(R) ∪ {X}; |out| = |R|. R tuples
// with no joining partner get the empty-sum value 0 from the zero-initialized
// Y column.
inline RelHandle semijoin_agg(Engine& eng, const RelHandle& R, const RelHandle& S,
                              const std::string& x_attr, const std::string& y_attr,
                              SemiJoinDebug* debug = nullptr) {
  return semijoin_fold(eng, R, S, x_attr, y_attr, RunningFold::Sum, debug);
}

// Join degree of each R tuple in R ⋈ S over the given join attributes:
// semi-join sum against the S side augmented with a constant 1.
inline RelHandle degree_on(Engine& eng, const RelHandle& R, const RelHandle& S,
                           const std::vector<std::string>& join_attrs,
                           const std::string& new_attr) {
  if (join_attrs.empty()) throw Error("degree requires join attributes");
  RelHandle sj = obl_project(eng, S, join_attrs);
  RelHandle sc = augment(eng, sj, int_attr("#cnt"), [](const Tuple&) { return Value(1); });
  eng.free_arena(sj.arena);
  RelHandle out = semijoin_agg(eng, R, sc, new_attr, "#cnt");
  eng.free_arena(sc.arena);
  return out;
}

// Degree over all shared attributes of R and S.
inline RelHandle degree(Engine& eng, const RelHandle& R, const RelHandle& S,
                        const std::string& new_attr) {
  return degree_on(eng, R, S, shared_attrs(R.schema, S.schema), new_attr);
}

}  // namespace oqp
