#pragma once

// Grouping aggregation over acyclic joins: a bottom-up pass carries per-tuple
// match counts and partial aggregates to the root, where a grouped running
// fold in descending id order lands each group's total on its first row.
// Selections mask counts to zero; key/foreign-key pairs collapse through an
// asserted-size binary join.

#include <cstdint>
#include <string>
#include <vector>

#include "oqp/join.hpp"

namespace oqp {

enum class AggFn { Sum, Count, Min, Max, Avg };

inline const char* agg_fn_name(AggFn f) {
  switch (f) {
    case AggFn::Sum: return "SUM";
    case AggFn::Count: return "COUNT";
    case AggFn::Min: return "MIN";
    case AggFn::Max: return "MAX";
    case AggFn::Avg: return "AVG";
  }
  return "?";
}

inline AggFn agg_fn_from_name(const std::string& s) {
  if (s == "SUM") return AggFn::Sum;
  if (s == "COUNT") return AggFn::Count;
  if (s == "MIN") return AggFn::Min;
  if (s == "MAX") return AggFn::Max;
  if (s == "AVG") return AggFn::Avg;
  throw ParseError("unknown aggregate function: " + s);
}

struct AggSpec {
  AggFn fn = AggFn::Count;
  std::string rel;                    // relation holding the target attribute
  std::string attr;                   // target attribute (ignored for COUNT)
  std::vector<std::string> group_by;  // must lie within the tree root
};

namespace detail {

inline std::int64_t agg_sentinel(AggFn f) {
  return f == AggFn::Min ? std::numeric_limits<std::int64_t>::max()
                         : std::numeric_limits<std::int64_t>::min();
}

}  // namespace detail

// One output row per group with the aggregate over the full join result;
// groups with no surviving join rows are excluded. Empty group_by collapses
// everything into a single group (zero output rows when nothing survives).
// COUNT needs no aggregate propagation (the root count is the row count);
// SUM and AVG propagate a partial-sum column, scaled by sibling-branch
// counts at each ancestor; MIN/MAX propagate through the identical pipeline
// with running minima/maxima and a sentinel on dead tuples. AVG is returned
// as a (sum, count) column pair.
inline RelHandle group_aggregate(Engine& eng, const JoinTree& tree,
                                 const std::vector<RelHandle>& rels,
                                 const std::vector<Predicate>& masks,
                                 const AggSpec& spec) {
  const std::size_t q = tree.size();
  if (rels.size() != q || masks.size() != q)
    throw SizeMismatch("relation or mask list does not match tree");
  for (const auto& g : spec.group_by)
    if (!rels[0].schema.has(g))
      throw UnsupportedGrouping("grouping attribute " + g +
                                " is not available on the tree root");

  bool need_partial = spec.fn != AggFn::Count;
  std::size_t target = q;
  if (need_partial) {
    for (std::size_t i = 0; i < q; ++i)
      if (tree.nodes[i].rel == spec.rel) target = i;
    if (target == q) throw UnknownAttribute(spec.rel + "." + spec.attr);
    std::size_t xi = rels[target].schema.index_of(spec.attr);
    if (rels[target].schema.attrs[xi].domain != Domain::Int)
      throw DomainMismatch("aggregate target must be numeric: " + spec.attr);
  }
  std::vector<bool> on_path(q, false);
  if (need_partial)
    for (std::optional<std::size_t> k = target; k; k = tree.nodes[*k].parent)
      on_path[*k] = true;

  bool minmax = spec.fn == AggFn::Min || spec.fn == AggFn::Max;
  std::int64_t sentinel = minmax ? detail::agg_sentinel(spec.fn) : 0;
  RunningFold fold = spec.fn == AggFn::Min   ? RunningFold::Min
                     : spec.fn == AggFn::Max ? RunningFold::Max
                                             : RunningFold::Sum;

  // Bottom-up counting pass, carrying the partial aggregate #SX along the
  // path from the target relation to the root.
  std::vector<RelHandle> counted(q);
  for (std::size_t idx = q; idx-- > 0;) {
    RelHandle x = rels[idx];
    masks[idx].check_attrs(x.schema);
    bool owned = false;
    std::size_t path_child = q;
    for (std::size_t c : tree.nodes[idx].children) {
      auto join_attrs = shared_attrs(rels[idx].schema, rels[c].schema);
      if (join_attrs.empty()) throw Error("join tree edge without shared attributes");
      auto keep = join_attrs;
      keep.push_back(detail::n_col(c));
      RelHandle proj = obl_project(eng, counted[c], keep);
      RelHandle next = semijoin_agg(eng, x, proj, detail::nc_col(idx, c), detail::n_col(c));
      eng.free_arena(proj.arena);
      if (owned) eng.free_arena(x.arena);
      x = next;
      owned = true;
      if (on_path[c]) path_child = c;
    }
    {
      Schema xs = x.schema;
      Predicate mask = masks[idx];
      std::vector<std::size_t> ncs;
      for (std::size_t c : tree.nodes[idx].children)
        ncs.push_back(xs.index_of(detail::nc_col(idx, c)));
      RelHandle next = augment(eng, x, int_attr(detail::n_col(idx)),
                               [xs, mask, ncs](const Tuple& t) {
                                 if (!mask.eval(xs, t)) return Value(std::int64_t(0));
                                 std::int64_t p = 1;
                                 for (std::size_t i : ncs)
                                   p = checked_mul(p, t[i].as_int());
                                 return Value(p);
                               });
      if (owned) eng.free_arena(x.arena);
      x = next;
      owned = true;
    }
    if (need_partial && idx == target) {
      std::size_t xi = x.schema.index_of(spec.attr);
      std::size_t ni = x.schema.index_of(detail::n_col(idx));
      std::int64_t sent = sentinel;
      RelHandle next = augment(
          eng, x, int_attr("#SX"), [xi, ni, sent, minmax](const Tuple& t) {
            std::int64_t n = t[ni].as_int();
            if (minmax)
              return Value(n > 0 && !t[xi].is_null() ? t[xi].as_int() : sent);
            std::int64_t v = t[xi].is_null() ? 0 : t[xi].as_int();
            return Value(checked_mul(v, n));
          });
      eng.free_arena(x.arena);
      x = next;
    } else if (need_partial && on_path[idx]) {
      auto join_attrs = shared_attrs(rels[idx].schema, rels[path_child].schema);
      auto keep = join_attrs;
      keep.push_back("#SX");
      RelHandle proj = obl_project(eng, counted[path_child], keep);
      RelHandle withsj = semijoin_fold(eng, x, proj, "#SJ", "#SX", fold);
      eng.free_arena(proj.arena);
      eng.free_arena(x.arena);
      Schema xs = withsj.schema;
      Predicate mask = masks[idx];
      std::size_t sj = xs.index_of("#SJ");
      std::size_t ni = xs.index_of(detail::n_col(idx));
      std::vector<std::size_t> sibs;
      for (std::size_t c : tree.nodes[idx].children)
        if (c != path_child) sibs.push_back(xs.index_of(detail::nc_col(idx, c)));
      std::int64_t sent = sentinel;
      RelHandle next = augment(
          eng, withsj, int_attr("#SX"),
          [xs, mask, sj, ni, sibs, sent, minmax](const Tuple& t) {
            if (minmax)
              return Value(t[ni].as_int() > 0 ? t[sj].as_int() : sent);
            if (!mask.eval(xs, t)) return Value(std::int64_t(0));
            std::int64_t v = t[sj].as_int();
            for (std::size_t k : sibs) v = checked_mul(v, t[k].as_int());
            return Value(v);
          });
      eng.free_arena(withsj.arena);
      x = next;
    }
    counted[idx] = x;
  }
  for (std::size_t i = 1; i < q; ++i) eng.free_arena(counted[i].arena);

  // Grouping stage on the root: in descending id order the group total lands
  // on id 1; groups whose rows all died are filtered out with the count.
  RelHandle g1 = grouping_identity(eng, counted[0], spec.group_by, {}, "#IdG");
  eng.free_arena(counted[0].arena);
  RelHandle g2 = g1;
  if (need_partial) {
    g2 = grouping_running_fold(eng, g1, spec.group_by, {{"#IdG", false}}, "#SX",
                               "#Tot", fold);
    eng.free_arena(g1.arena);
  }
  RelHandle g3 = grouping_running_sum(eng, g2, spec.group_by, {{"#IdG", false}},
                                      detail::n_col(0), "#Cnt");
  eng.free_arena(g2.arena);

  std::size_t idg = g3.schema.index_of("#IdG");
  std::size_t cnt = g3.schema.index_of("#Cnt");
  auto group_head = [idg, cnt](const Tuple& t) {
    return t[idg].as_int() == 1 && t[cnt].as_int() > 0;
  };
  std::size_t n_groups = std::size_t(tm_count_if(eng, g3, group_head));
  std::size_t n_total = 0;
  for (const auto& r : rels) n_total += r.len;
  eng.tm().ensure_budget(n_total + n_groups);
  RelHandle heads = obl_filter_fn(eng, g3, group_head, n_groups);
  eng.free_arena(g3.arena);

  auto keep = spec.group_by;
  std::vector<std::pair<std::string, std::string>> renames;
  switch (spec.fn) {
    case AggFn::Sum: keep.push_back("#Tot"); renames = {{"#Tot", "sum"}}; break;
    case AggFn::Min: keep.push_back("#Tot"); renames = {{"#Tot", "min"}}; break;
    case AggFn::Max: keep.push_back("#Tot"); renames = {{"#Tot", "max"}}; break;
    case AggFn::Count: keep.push_back("#Cnt"); renames = {{"#Cnt", "count"}}; break;
    case AggFn::Avg:
      keep.push_back("#Tot");
      keep.push_back("#Cnt");
      renames = {{"#Tot", "sum"}, {"#Cnt", "count"}};
      break;
  }
  RelHandle out = obl_project(eng, heads, keep);
  eng.free_arena(heads.arena);
  out = rename_attrs(out, renames);
  out.schema.name = "result";
  return out;
}

// Selection handling: the counting pass with failing tuples masked to count
// zero. Downstream expansion and aggregation then exclude them while the
// trace shape stays fixed by the public sizes.
inline std::vector<RelHandle> apply_selections(Engine& eng, const JoinTree& tree,
                                               const std::vector<RelHandle>& rels,
                                               const std::vector<Predicate>& preds) {
  return detail::bottom_up_counts(eng, tree, rels, preds, false);
}

// Key/foreign-key collapse step: joins the referencing relation with the
// referenced one. Declared constraints make every referencing row join
// exactly once, so the result size must equal the referencing side's size.
inline RelHandle fk_join(Engine& eng, const RelHandle& fk_side,
                         const RelHandle& key_side) {
  RelHandle out = binary_join(eng, fk_side, key_side);
  if (out.len != fk_side.len)
    throw FkViolation("join of " + fk_side.schema.name + " with " +
                      key_side.schema.name + " produced " + std::to_string(out.len) +
                      " rows, expected " + std::to_string(fk_side.len));
  return out;
}

}  // namespace oqp
