#pragma once

// Oblivious joins. Binary natural join follows the degree / expand / stitch
// pipeline; acyclic multiway joins grow a table of partial rows edge by edge
// along a join tree, pairing each partial row with child tuples through
// per-group copy slices.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oqp/expansion.hpp"
#include "oqp/semijoin.hpp"

namespace oqp {

struct JoinTreeNode {
  std::string rel;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
};

// Rooted join tree in pre-order: node 0 is the root and every node's parent
// precedes it.
struct JoinTree {
  std::vector<JoinTreeNode> nodes;

  static JoinTree from_parents(std::vector<std::string> rels,
                               const std::vector<std::optional<std::size_t>>& parents) {
    if (rels.size() != parents.size() || rels.empty())
      throw Error("malformed join tree");
    JoinTree t;
    t.nodes.resize(rels.size());
    for (std::size_t i = 0; i < rels.size(); ++i) {
      t.nodes[i].rel = std::move(rels[i]);
      t.nodes[i].parent = parents[i];
      if (i == 0) {
        if (parents[i]) throw Error("join tree root must not have a parent");
      } else {
        if (!parents[i] || *parents[i] >= i)
          throw Error("join tree nodes must be in pre-order");
        t.nodes[*parents[i]].children.push_back(i);
      }
    }
    return t;
  }

  std::size_t size() const { return nodes.size(); }
};

// Path between two nodes (inclusive), walking parent links to the lowest
// common ancestor.
inline std::vector<std::size_t> tree_path(const JoinTree& t, std::size_t a,
                                          std::size_t b) {
  std::vector<std::size_t> ups;
  for (std::optional<std::size_t> k = a; k; k = t.nodes[*k].parent) ups.push_back(*k);
  std::vector<std::size_t> downs;
  for (std::optional<std::size_t> k = b; k; k = t.nodes[*k].parent) {
    auto it = std::find(ups.begin(), ups.end(), *k);
    if (it != ups.end()) {
      ups.erase(it + 1, ups.end());
      std::reverse(downs.begin(), downs.end());
      ups.insert(ups.end(), downs.begin(), downs.end());
      return ups;
    }
    downs.push_back(*k);
  }
  throw Error("disconnected join tree");
}

// A join tree is valid when every attribute shared by two relations also
// appears in every relation on the path between them, and every tree edge
// shares at least one attribute.
inline bool verify_join_tree(const JoinTree& t, const std::vector<Schema>& schemas,
                             std::string* why = nullptr) {
  if (schemas.size() != t.size()) throw SizeMismatch("schema list does not match tree");
  for (std::size_t j = 1; j < t.size(); ++j)
    if (shared_attrs(schemas[*t.nodes[j].parent], schemas[j]).empty()) {
      if (why) *why = "edge " + t.nodes[*t.nodes[j].parent].rel + " - " +
                      t.nodes[j].rel + " shares no attributes";
      return false;
    }
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      auto shared = shared_attrs(schemas[i], schemas[j]);
      if (shared.empty()) continue;
      for (std::size_t k : tree_path(t, i, j))
        for (const auto& a : shared)
          if (!schemas[k].has(a)) {
            if (why) *why = "attribute " + a + " shared by " + t.nodes[i].rel +
                            " and " + t.nodes[j].rel + " is missing from " +
                            t.nodes[k].rel;
            return false;
          }
    }
  return true;
}

struct BinaryJoinDebug {
  bool captured = false;
  RelHandle r_deg, s_deg;        // inputs with ids and join degrees
  RelHandle r_sorted, s_sorted;  // expanded sides aligned for stitching
};

// Natural join of two relations. Output size m = |R join S| becomes public;
// the trace depends only on |R|, |S| and m.
inline RelHandle binary_join(Engine& eng, const RelHandle& R, const RelHandle& S,
                             BinaryJoinDebug* debug = nullptr) {
  auto join_attrs = shared_attrs(R.schema, S.schema);
  if (join_attrs.empty()) throw Error("binary join requires shared attributes");

  RelHandle r1 = augment(eng, R, int_attr("#N"), [](const Tuple&) { return Value(1); });
  RelHandle r2 = grouping_identity(eng, r1, {}, {}, "#Id");
  eng.free_arena(r1.arena);
  RelHandle s1 = augment(eng, S, int_attr("#N"), [](const Tuple&) { return Value(1); });
  RelHandle s2 = grouping_identity(eng, s1, {}, {}, "#Id");
  eng.free_arena(s1.arena);

  RelHandle r3 = degree_on(eng, r2, s2, join_attrs, "#NS");
  eng.free_arena(r2.arena);
  RelHandle s3 = degree_on(eng, s2, r3, join_attrs, "#NR");
  eng.free_arena(s2.arena);
  RelHandle s4 = grouping_identity(eng, s3, join_attrs, {}, "#JId");
  eng.free_arena(s3.arena);

  RelHandle rexp = expand(eng, r3, "#NS");
  RelHandle rexp2 = grouping_identity(eng, rexp, {"#Id"}, {}, "#JId");
  eng.free_arena(rexp.arena);
  RelHandle sexp = expand(eng, s4, "#NR");
  if (rexp2.len != sexp.len)
    throw SizeMismatch("join sides expanded to different sizes");
  eng.tm().ensure_budget(R.len + S.len + rexp2.len);

  SortKey key = asc_key(join_attrs);
  key.push_back({"#JId", true});
  RelHandle rsort = obl_sort(eng, rexp2, key);
  eng.free_arena(rexp2.arena);
  RelHandle ssort = obl_sort(eng, sexp, key);
  eng.free_arena(sexp.arena);

  auto r_keep = R.schema.attr_names();
  r_keep.push_back("#JId");
  auto s_keep = S.schema.attr_names();
  s_keep.push_back("#JId");
  RelHandle rside = obl_project(eng, rsort, r_keep);
  RelHandle sside = obl_project(eng, ssort, s_keep);
  if (debug) {
    debug->captured = true;
    debug->r_deg = r3;
    debug->s_deg = s4;
    debug->r_sorted = rsort;
    debug->s_sorted = ssort;
  } else {
    eng.free_arena(r3.arena);
    eng.free_arena(s4.arena);
    eng.free_arena(rsort.arena);
    eng.free_arena(ssort.arena);
  }

  RelHandle st = stitch(eng, rside, sside);
  eng.free_arena(rside.arena);
  eng.free_arena(sside.arena);
  auto out_attrs = R.schema.attr_names();
  for (const auto& a : S.schema.attrs)
    if (!R.schema.has(a.name)) out_attrs.push_back(a.name);
  RelHandle out = obl_project(eng, st, out_attrs);
  eng.free_arena(st.arena);
  out.schema.name = R.schema.name + "*" + S.schema.name;
  return out;
}

namespace detail {

inline std::string id_col(std::size_t i) { return "#Id" + std::to_string(i); }
inline std::string n_col(std::size_t i) { return "#N" + std::to_string(i); }
inline std::string nc_col(std::size_t i, std::size_t c) {
  return "#NC" + std::to_string(i) + "_" + std::to_string(c);
}

// Bottom-up per-tuple counting: after the pass, relation i carries, for each
// child c, the number of subtree matches #NC<i>_<c>, and the total subtree
// count #N<i> (zero when the node's selection rejects the tuple). Optionally
// tags every tuple with a sequence id first.
inline std::vector<RelHandle> bottom_up_counts(Engine& eng, const JoinTree& tree,
                                               const std::vector<RelHandle>& rels,
                                               const std::vector<Predicate>& masks,
                                               bool with_id) {
  const std::size_t q = tree.size();
  if (rels.size() != q || masks.size() != q)
    throw SizeMismatch("relation or mask list does not match tree");
  std::vector<RelHandle> out(q);
  for (std::size_t idx = q; idx-- > 0;) {
    RelHandle x = rels[idx];
    masks[idx].check_attrs(x.schema);
    bool owned = false;
    if (with_id) {
      x = grouping_identity(eng, x, {}, {}, id_col(idx));
      owned = true;
    }
    for (std::size_t c : tree.nodes[idx].children) {
      auto join_attrs = shared_attrs(rels[idx].schema, rels[c].schema);
      if (join_attrs.empty()) throw Error("join tree edge without shared attributes");
      auto keep = join_attrs;
      keep.push_back(n_col(c));
      RelHandle proj = obl_project(eng, out[c], keep);
      RelHandle next = semijoin_agg(eng, x, proj, nc_col(idx, c), n_col(c));
      eng.free_arena(proj.arena);
      if (owned) eng.free_arena(x.arena);
      x = next;
      owned = true;
    }
    Schema xs = x.schema;
    Predicate mask = masks[idx];
    std::vector<std::size_t> ncs;
    for (std::size_t c : tree.nodes[idx].children)
      ncs.push_back(xs.index_of(nc_col(idx, c)));
    out[idx] = augment(eng, x, int_attr(n_col(idx)), [xs, mask, ncs](const Tuple& t) {
      if (!mask.eval(xs, t)) return Value(std::int64_t(0));
      std::int64_t p = 1;
      for (std::size_t i : ncs) p = checked_mul(p, t[i].as_int());
      return Value(p);
    });
    if (owned) eng.free_arena(x.arena);
  }
  return out;
}

}  // namespace detail

inline const char* kFullDegreeAttr = "#NFull";

// Per-tuple full join degrees: for every tuple of every relation, the number
// of join result rows it participates in, as attribute #NFull. The full
// degree combines the subtree count below the tuple with an inherited count
// from the rest of the tree; the latter flows top-down via one semi-join per
// edge (no division involved). Full degrees over any single relation sum to
// the join output size.
inline std::vector<RelHandle> multiway_full_degrees(Engine& eng, const JoinTree& tree,
                                                    const std::vector<RelHandle>& rels,
                                                    const std::vector<Predicate>& masks) {
  const std::size_t q = tree.size();
  auto counts = detail::bottom_up_counts(eng, tree, rels, masks, false);
  std::vector<RelHandle> ups(q);
  std::vector<std::string> up_col(q);
  up_col[0] = "#NU0";
  ups[0] = augment(eng, counts[0], int_attr(up_col[0]),
                   [](const Tuple&) { return Value(1); });
  for (std::size_t j = 1; j < q; ++j) {
    std::size_t i = *tree.nodes[j].parent;
    auto join_attrs = shared_attrs(rels[i].schema, rels[j].schema);
    Schema ps = ups[i].schema;
    Predicate mask = masks[i];
    std::size_t nu = ps.index_of(up_col[i]);
    std::vector<std::size_t> sib;
    for (std::size_t c : tree.nodes[i].children)
      if (c != j) sib.push_back(ps.index_of(detail::nc_col(i, c)));
    RelHandle u = augment(eng, ups[i], int_attr("#U"),
                          [ps, mask, nu, sib](const Tuple& t) {
                            if (!mask.eval(ps, t)) return Value(std::int64_t(0));
                            std::int64_t p = t[nu].as_int();
                            for (std::size_t k : sib) p = checked_mul(p, t[k].as_int());
                            return Value(p);
                          });
    auto keep = join_attrs;
    keep.push_back("#U");
    RelHandle proj = obl_project(eng, u, keep);
    eng.free_arena(u.arena);
    up_col[j] = "#NU" + std::to_string(j);
    ups[j] = semijoin_agg(eng, counts[j], proj, up_col[j], "#U");
    eng.free_arena(proj.arena);
  }
  std::vector<RelHandle> result(q);
  for (std::size_t i = 0; i < q; ++i) {
    Schema us = ups[i].schema;
    std::size_t nu = us.index_of(up_col[i]);
    std::size_t nd = us.index_of(detail::n_col(i));
    RelHandle full = augment(eng, ups[i], int_attr(kFullDegreeAttr),
                             [nu, nd](const Tuple& t) {
                               return Value(checked_mul(t[nu].as_int(), t[nd].as_int()));
                             });
    eng.free_arena(ups[i].arena);
    auto keep = rels[i].schema.attr_names();
    keep.push_back(kFullDegreeAttr);
    result[i] = obl_project(eng, full, keep);
    result[i].schema.name = rels[i].schema.name;
    eng.free_arena(full.arena);
    eng.free_arena(counts[i].arena);
  }
  return result;
}

// Multiway natural join over an acyclic join tree. Maintains a table E of
// partial rows, one per eventual output row: each partial combination e is
// held in exactly (product of its unattached-branch counts) copies. Relations
// attach in pre-order; every attachment keeps |E| = m. Within a join-value
// group, copies of e are numbered and cut into slices of equal height, and
// the child is expanded so that slice q holds exactly the child tuple whose
// cumulative-count interval covers q; stitching the sorted sides then pairs
// every copy with its child row.
inline RelHandle multiway_join(Engine& eng, const JoinTree& tree,
                               const std::vector<RelHandle>& rels,
                               const std::vector<Predicate>& masks) {
  const std::size_t q = tree.size();
  auto counts = detail::bottom_up_counts(eng, tree, rels, masks, true);
  std::int64_t m = tm_sum(eng, counts[0], detail::n_col(0));
  std::size_t n_total = 0;
  for (const auto& r : rels) n_total += r.len;
  eng.tm().ensure_budget(n_total + std::size_t(m));

  RelHandle e = expand(eng, counts[0], detail::n_col(0));
  std::vector<std::size_t> attached = {0};
  std::vector<bool> is_attached(q, false);
  is_attached[0] = true;

  for (std::size_t j = 1; j < q; ++j) {
    std::size_t i = *tree.nodes[j].parent;
    auto join_attrs = shared_attrs(rels[i].schema, rels[j].schema);

    // Copies of e per remaining branch other than j.
    Schema es = e.schema;
    std::vector<std::size_t> pend;
    for (std::size_t a : attached)
      for (std::size_t c : tree.nodes[a].children)
        if (!is_attached[c] && c != j) pend.push_back(es.index_of(detail::nc_col(a, c)));
    RelHandle e1 = augment(eng, e, int_attr("#Rest"), [pend](const Tuple& t) {
      std::int64_t p = 1;
      for (std::size_t k : pend) p = checked_mul(p, t[k].as_int());
      return Value(p);
    });
    eng.free_arena(e.arena);

    std::vector<std::string> comb;
    for (std::size_t a : attached) comb.push_back(detail::id_col(a));
    RelHandle e2 = grouping_identity(eng, e1, comb, {}, "#Copy");
    eng.free_arena(e1.arena);
    std::size_t rest_i = e2.schema.index_of("#Rest");
    std::size_t copy_i = e2.schema.index_of("#Copy");
    RelHandle e3 = augment(eng, e2, int_attr("#Q"), [rest_i, copy_i](const Tuple& t) {
      std::int64_t rest = t[rest_i].as_int();
      if (rest <= 0) throw InternalScheduleError("partial row with no pending copies");
      return Value((t[copy_i].as_int() + rest - 1) / rest);
    });
    eng.free_arena(e2.arena);
    RelHandle e4 = augment(eng, e3, int_attr("#R1"), [rest_i, copy_i](const Tuple& t) {
      return Value(t[copy_i].as_int() == 1 ? t[rest_i].as_int() : std::int64_t(0));
    });
    eng.free_arena(e3.arena);

    // Child side: cumulative counts within the join-value group, group copy
    // height from the e side, expansion to m rows, slice index.
    RelHandle c1 = grouping_identity(eng, counts[j], join_attrs, {}, "#JId");
    eng.free_arena(counts[j].arena);
    RelHandle c2 = grouping_running_sum(eng, c1, join_attrs, {{"#JId", true}},
                                        detail::n_col(j), "#Cum");
    eng.free_arena(c1.arena);
    std::size_t cum_i = c2.schema.index_of("#Cum");
    std::size_t cn_i = c2.schema.index_of(detail::n_col(j));
    RelHandle c3 = augment(eng, c2, int_attr("#ExB"), [cum_i, cn_i](const Tuple& t) {
      return Value(t[cum_i].as_int() - t[cn_i].as_int());
    });
    eng.free_arena(c2.arena);

    auto ekeep = join_attrs;
    ekeep.push_back("#R1");
    RelHandle eproj = obl_project(eng, e4, ekeep);
    RelHandle c4 = semijoin_agg(eng, c3, eproj, "#Rho", "#R1");
    eng.free_arena(eproj.arena);
    eng.free_arena(c3.arena);
    std::size_t rho_i = c4.schema.index_of("#Rho");
    std::size_t n4_i = c4.schema.index_of(detail::n_col(j));
    RelHandle c5 = augment(eng, c4, int_attr("#NF"), [rho_i, n4_i](const Tuple& t) {
      return Value(checked_mul(t[rho_i].as_int(), t[n4_i].as_int()));
    });
    eng.free_arena(c4.arena);
    RelHandle cexp = expand(eng, c5, "#NF");
    eng.free_arena(c5.arena);
    if (cexp.len != std::size_t(m))
      throw SizeMismatch("child expansion does not match the output size");

    RelHandle c6 = grouping_identity(eng, cexp, {detail::id_col(j)}, {}, "#CCopy");
    eng.free_arena(cexp.arena);
    std::size_t exb_i = c6.schema.index_of("#ExB");
    std::size_t crho_i = c6.schema.index_of("#Rho");
    std::size_t cc_i = c6.schema.index_of("#CCopy");
    RelHandle c7 = augment(eng, c6, int_attr("#Q"), [exb_i, crho_i, cc_i](const Tuple& t) {
      std::int64_t rho = t[crho_i].as_int();
      if (rho <= 0) throw InternalScheduleError("expanded child row with zero height");
      return Value(t[exb_i].as_int() + (t[cc_i].as_int() + rho - 1) / rho);
    });
    eng.free_arena(c6.arena);

    SortKey key = asc_key(join_attrs);
    key.push_back({"#Q", true});
    RelHandle esort = obl_sort(eng, e4, key);
    eng.free_arena(e4.arena);
    RelHandle csort = obl_sort(eng, c7, key);
    eng.free_arena(c7.arena);

    std::vector<std::string> e_keep;
    std::string used_nc = detail::nc_col(i, j);  // branch consumed by this step
    for (const auto& a : esort.schema.attrs)
      if (a.name != "#Rest" && a.name != "#Copy" && a.name != "#R1" &&
          a.name != used_nc)
        e_keep.push_back(a.name);
    RelHandle eside = obl_project(eng, esort, e_keep);
    eng.free_arena(esort.arena);
    std::vector<std::string> c_keep = rels[j].schema.attr_names();
    c_keep.push_back(detail::id_col(j));
    for (std::size_t c : tree.nodes[j].children) c_keep.push_back(detail::nc_col(j, c));
    c_keep.push_back("#Q");
    RelHandle cside = obl_project(eng, csort, c_keep);
    eng.free_arena(csort.arena);

    RelHandle st = stitch(eng, eside, cside);
    eng.free_arena(eside.arena);
    eng.free_arena(cside.arena);
    std::vector<std::string> next_attrs;
    for (const auto& a : st.schema.attrs)
      if (a.name != "#Q") next_attrs.push_back(a.name);
    e = obl_project(eng, st, next_attrs);
    eng.free_arena(st.arena);
    if (e.len != std::size_t(m))
      throw SizeMismatch("partial-row table size drifted from the output size");

    attached.push_back(j);
    is_attached[j] = true;
  }
  eng.free_arena(counts[0].arena);

  std::vector<std::string> user_attrs;
  Schema seen;
  for (std::size_t i : attached)
    for (const auto& a : rels[i].schema.attrs)
      if (!seen.has(a.name)) {
        seen.attrs.push_back(a);
        user_attrs.push_back(a.name);
      }
  RelHandle out = obl_project(eng, e, user_attrs);
  eng.free_arena(e.arena);
  return out;
}

}  // namespace oqp
