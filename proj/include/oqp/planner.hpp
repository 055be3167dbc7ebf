#pragma once

// Query planning: parse JSON query templates, collapse key/foreign-key joins,
// build and re-verify an acyclic join tree, and emit a Plan. Planning is a
// pure function of schemas and template; it never looks at relation data.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "oqp/groupagg.hpp"

namespace oqp {

struct TemplateAtom {
  std::string attr;
  CmpOp op = CmpOp::Eq;
  Value constant;           // bound at plan time when given literally
  std::string placeholder;  // "?k": bound at execution time, TM-resident
};

struct QueryTemplate {
  std::vector<std::string> relations;
  std::map<std::string, std::vector<TemplateAtom>> predicates;
  std::vector<std::string> group_by;
  std::optional<AggSpec> agg;  // group_by folded in during planning
  std::vector<std::string> project;
};

using Bindings = std::map<std::string, Value>;

inline CmpOp cmp_op_from_name(const std::string& s) {
  if (s == "=" || s == "==") return CmpOp::Eq;
  if (s == "!=" || s == "<>") return CmpOp::Ne;
  if (s == "<") return CmpOp::Lt;
  if (s == "<=") return CmpOp::Le;
  if (s == ">") return CmpOp::Gt;
  if (s == ">=") return CmpOp::Ge;
  throw ParseError("unknown comparison operator: " + s);
}

inline QueryTemplate parse_template(const nlohmann::json& j) {
  QueryTemplate t;
  try {
    for (const auto& r : j.at("relations")) t.relations.push_back(r.get<std::string>());
    if (j.contains("predicates"))
      for (const auto& [rel, atoms] : j.at("predicates").items())
        for (const auto& a : atoms) {
          TemplateAtom atom;
          atom.attr = a.at("attr").get<std::string>();
          atom.op = cmp_op_from_name(a.at("op").get<std::string>());
          const auto& c = a.at("const");
          if (c.is_string()) {
            std::string s = c.get<std::string>();
            if (!s.empty() && s[0] == '?')
              atom.placeholder = s;
            else
              atom.constant = Value(s);
          } else if (c.is_number_integer()) {
            atom.constant = Value(c.get<std::int64_t>());
          } else {
            throw ParseError("predicate constant must be an integer, string, or placeholder");
          }
          t.predicates[rel].push_back(std::move(atom));
        }
    if (j.contains("group_by"))
      for (const auto& g : j.at("group_by")) t.group_by.push_back(g.get<std::string>());
    if (j.contains("agg") && !j.at("agg").is_null()) {
      AggSpec s;
      s.fn = agg_fn_from_name(j.at("agg").at("fn").get<std::string>());
      if (s.fn != AggFn::Count || j.at("agg").contains("rel")) {
        s.rel = j.at("agg").value("rel", std::string());
        s.attr = j.at("agg").value("attr", std::string());
      }
      t.agg = s;
    }
    if (j.contains("project"))
      for (const auto& p : j.at("project")) t.project.push_back(p.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad query template: ") + e.what());
  }
  if (t.relations.empty()) throw ParseError("query template lists no relations");
  return t;
}

// One key/foreign-key collapse: the referencing relation absorbs the
// referenced one.
struct FkStep {
  std::string fk_rel;
  std::string key_rel;
  std::string merged;
};

struct Plan {
  std::vector<FkStep> fk_steps;
  std::map<std::string, Schema> schemas;  // post-rewrite, keyed by name
  JoinTree tree;
  std::map<std::string, std::vector<TemplateAtom>> predicates;  // post-rewrite keys
  std::optional<AggSpec> agg;
  std::vector<std::string> project;
};

// GYO-style ear removal: repeatedly detach a relation whose attributes shared
// with the remaining set are covered by a single witness relation. Succeeds
// exactly on acyclic, connected join hypergraphs; the result is independently
// re-verified against the path-containment property. `root` picks the tree
// root (path containment is root-independent, so any rooting is valid).
inline JoinTree build_join_tree(const std::vector<Schema>& schemas,
                                std::size_t root = 0) {
  const std::size_t q = schemas.size();
  if (q == 0) throw Error("join tree over zero relations");
  if (root >= q) throw OutOfBounds("join tree root index");
  std::vector<std::optional<std::size_t>> parent(q);
  std::vector<bool> removed(q, false);
  for (std::size_t round = 0; round + 1 < q; ++round) {
    bool found = false;
    for (std::size_t i = 0; i < q && !found; ++i) {
      if (removed[i]) continue;
      // Attributes of i shared with any other remaining relation.
      std::set<std::string> boundary;
      bool alone = true;
      for (std::size_t k = 0; k < q; ++k) {
        if (k == i || removed[k]) continue;
        alone = false;
        for (const auto& a : shared_attrs(schemas[i], schemas[k])) boundary.insert(a);
      }
      if (alone) break;
      if (boundary.empty())
        throw CyclicJoinError("relation " + schemas[i].name +
                              " shares no attributes with the rest of the query");
      for (std::size_t w = 0; w < q && !found; ++w) {
        if (w == i || removed[w]) continue;
        bool covered = true;
        for (const auto& a : boundary)
          if (!schemas[w].has(a)) {
            covered = false;
            break;
          }
        if (covered) {
          parent[i] = w;
          removed[i] = true;
          found = true;
        }
      }
    }
    if (!found)
      throw CyclicJoinError("join hypergraph is cyclic: no relation can be detached");
  }

  // Re-root at the requested node by flipping parent links along its path,
  // then renumber in pre-order.
  {
    std::optional<std::size_t> prev;
    std::size_t cur = root;
    std::size_t hops = 0;
    while (true) {
      std::optional<std::size_t> up = parent[cur];
      parent[cur] = prev;
      if (!up) break;
      prev = cur;
      cur = *up;
      if (++hops > q) throw InternalScheduleError("join tree parent cycle");
    }
  }

  std::vector<std::vector<std::size_t>> kids(q);
  for (std::size_t i = 0; i < q; ++i)
    if (parent[i]) kids[*parent[i]].push_back(i);
  std::vector<std::string> names;
  std::vector<std::optional<std::size_t>> pre_parent;
  std::vector<Schema> pre_schemas;
  std::vector<std::size_t> stack = {root};
  std::map<std::size_t, std::size_t> new_index;
  while (!stack.empty()) {
    std::size_t cur = stack.back();
    stack.pop_back();
    new_index[cur] = names.size();
    names.push_back(schemas[cur].name);
    pre_parent.push_back(parent[cur] ? std::optional<std::size_t>(new_index[*parent[cur]])
                                     : std::nullopt);
    pre_schemas.push_back(schemas[cur]);
    for (auto it = kids[cur].rbegin(); it != kids[cur].rend(); ++it) stack.push_back(*it);
  }
  JoinTree tree = JoinTree::from_parents(std::move(names), pre_parent);
  std::string why;
  if (!verify_join_tree(tree, pre_schemas, &why))
    throw CyclicJoinError("join tree construction failed verification: " + why);
  return tree;
}

namespace detail {

// Finds a collapsible key/foreign-key pair among the given relations: X
// declares a foreign key into Y, the referenced attributes are Y's declared
// key, and the natural-join attributes of X and Y are exactly those.
inline std::optional<std::pair<std::string, std::string>> find_fk_pair(
    const std::map<std::string, Schema>& schemas,
    const std::vector<std::string>& active) {
  for (const auto& xn : active) {
    const Schema& x = schemas.at(xn);
    for (const auto& fk : x.foreign_keys) {
      if (std::find(active.begin(), active.end(), fk.references) == active.end())
        continue;
      const Schema& y = schemas.at(fk.references);
      if (y.key.empty() || y.key.size() != fk.attrs.size()) continue;
      std::set<std::string> ka(fk.attrs.begin(), fk.attrs.end());
      std::set<std::string> yk(y.key.begin(), y.key.end());
      if (ka != yk) continue;
      auto shared = shared_attrs(x, y);
      if (std::set<std::string>(shared.begin(), shared.end()) != ka) continue;
      return std::make_pair(xn, fk.references);
    }
  }
  return std::nullopt;
}

// Schema of the collapsed pair, mirroring the join output layout: X's
// attributes, then Y's private ones. Key and remaining foreign keys carry
// over from both sides.
inline Schema merge_fk_schemas(const Schema& x, const Schema& y) {
  Schema m;
  m.name = x.name + "*" + y.name;
  m.attrs = x.attrs;
  for (const auto& a : y.attrs)
    if (!x.has(a.name)) m.attrs.push_back(a);
  m.key = x.key;
  for (const auto& fk : x.foreign_keys)
    if (fk.references != y.name) m.foreign_keys.push_back(fk);
  for (const auto& fk : y.foreign_keys) m.foreign_keys.push_back(fk);
  return m;
}

}  // namespace detail

// Full planning pass: FK collapse schedule, acyclicity, grouping locality.
inline Plan plan(const QueryTemplate& tmpl, const std::map<std::string, Schema>& schemas) {
  Plan p;
  p.agg = tmpl.agg;
  p.project = tmpl.project;

  std::vector<std::string> active;
  for (const auto& r : tmpl.relations) {
    auto it = schemas.find(r);
    if (it == schemas.end()) throw UnknownAttribute("relation " + r);
    if (std::find(active.begin(), active.end(), r) != active.end())
      throw ParseError("relation listed twice: " + r);
    for (const auto& a : it->second.attrs)
      if (!a.name.empty() && a.name[0] == '#')
        throw ParseError("attribute names may not start with '#': " + a.name);
    active.push_back(r);
    p.schemas[r] = it->second;
  }
  // Track which post-rewrite relation each original one landed in.
  std::map<std::string, std::string> home;
  for (const auto& r : active) home[r] = r;

  while (auto pair = detail::find_fk_pair(p.schemas, active)) {
    auto [xn, yn] = *pair;
    Schema merged = detail::merge_fk_schemas(p.schemas.at(xn), p.schemas.at(yn));
    p.fk_steps.push_back({xn, yn, merged.name});
    p.schemas.erase(xn);
    p.schemas.erase(yn);
    // Retarget foreign keys of the survivors.
    for (auto& [n, s] : p.schemas)
      for (auto& fk : s.foreign_keys)
        if (fk.references == xn || fk.references == yn) fk.references = merged.name;
    for (auto& fk : merged.foreign_keys)
      if (fk.references == xn || fk.references == yn) fk.references = merged.name;
    p.schemas[merged.name] = merged;
    for (auto& [orig, h] : home)
      if (h == xn || h == yn) h = merged.name;
    active.erase(std::remove(active.begin(), active.end(), xn), active.end());
    active.erase(std::remove(active.begin(), active.end(), yn), active.end());
    active.push_back(merged.name);
  }

  // Predicates re-keyed to the relation that absorbed their target.
  for (const auto& [rel, atoms] : tmpl.predicates) {
    auto it = home.find(rel);
    if (it == home.end()) throw UnknownAttribute("predicate on unknown relation " + rel);
    for (const auto& a : atoms) {
      (void)p.schemas.at(it->second).index_of(a.attr);
      p.predicates[it->second].push_back(a);
    }
  }
  if (p.agg && !p.agg->rel.empty()) {
    auto it = home.find(p.agg->rel);
    if (it == home.end()) throw UnknownAttribute("aggregate over unknown relation " + p.agg->rel);
    p.agg->rel = it->second;
    if (p.agg->fn != AggFn::Count)
      (void)p.schemas.at(p.agg->rel).index_of(p.agg->attr);
  }
  if (p.agg) p.agg->group_by = tmpl.group_by;
  if (!tmpl.group_by.empty() && !p.agg)
    throw ParseError("group_by requires an aggregate");

  // Grouping locality: after FK collapse all grouping attrs must sit in one
  // relation, which becomes the tree root.
  std::size_t root = 0;
  if (p.agg && !p.agg->group_by.empty()) {
    bool found = false;
    for (std::size_t i = 0; i < active.size() && !found; ++i) {
      bool all = true;
      for (const auto& g : p.agg->group_by)
        if (!p.schemas.at(active[i]).has(g)) {
          all = false;
          break;
        }
      if (all) {
        root = i;
        found = true;
      }
    }
    if (!found)
      throw UnsupportedGrouping(
          "grouping attributes span relations not connected by foreign keys");
  } else if (p.agg && !p.agg->rel.empty()) {
    for (std::size_t i = 0; i < active.size(); ++i)
      if (active[i] == p.agg->rel) root = i;
  }

  std::vector<Schema> tree_schemas;
  for (const auto& n : active) tree_schemas.push_back(p.schemas.at(n));
  p.tree = build_join_tree(tree_schemas, root);

  if (!p.project.empty()) {
    for (const auto& a : p.project) {
      bool anywhere = false;
      for (const auto& n : active)
        if (p.schemas.at(n).has(a)) anywhere = true;
      if (!anywhere) throw UnknownAttribute(a);
    }
    if (p.agg) throw ParseError("projection and aggregation cannot be combined");
  }
  return p;
}

// Resolves template atoms into a concrete predicate using the bindings.
inline Predicate bind_predicate(const std::vector<TemplateAtom>& atoms,
                                const Bindings& bindings, const Schema& s) {
  Predicate out;
  for (const auto& a : atoms) {
    AtomicCmp c;
    c.attr = a.attr;
    c.op = a.op;
    if (a.placeholder.empty()) {
      c.constant = a.constant;
    } else {
      auto it = bindings.find(a.placeholder);
      if (it == bindings.end())
        throw ParseError("unbound constant placeholder " + a.placeholder);
      c.constant = it->second;
    }
    std::size_t i = s.index_of(a.attr);
    if (!c.constant.is_null()) {
      if (s.attrs[i].domain == Domain::Int && !c.constant.is_int())
        throw DomainMismatch("constant for " + a.attr + " must be an integer");
      if (s.attrs[i].domain == Domain::Str && !c.constant.is_str())
        throw DomainMismatch("constant for " + a.attr + " must be a string");
    }
    out.conjuncts.push_back(std::move(c));
  }
  return out;
}

}  // namespace oqp
