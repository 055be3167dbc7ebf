#pragma once

// Plan execution: materialize base relations, run the FK-collapse steps, then
// the join or aggregation pipeline, inside one engine whose trace is the
// security artifact of the run.

#include <map>
#include <string>
#include <vector>

#include "oqp/planner.hpp"

namespace oqp {

struct Database {
  std::map<std::string, Schema> schemas;
  std::map<std::string, std::vector<Tuple>> tables;
};

struct RunResult {
  Schema schema;
  std::vector<Tuple> rows;
  std::size_t output_size = 0;
  std::size_t input_size = 0;
};

inline RunResult execute(Engine& eng, const Plan& plan, const Database& db,
                         const Bindings& bindings) {
  std::map<std::string, RelHandle> live;
  std::size_t input_size = 0;
  auto get = [&](const std::string& n) -> RelHandle {
    auto it = live.find(n);
    if (it != live.end()) return it->second;
    auto s = db.schemas.find(n);
    auto t = db.tables.find(n);
    if (s == db.schemas.end() || t == db.tables.end())
      throw UnknownAttribute("relation " + n + " is missing from the database");
    RelHandle r = materialize(eng, s->second, t->second);
    input_size += r.len;
    live[n] = r;
    return r;
  };

  for (const auto& step : plan.fk_steps) {
    RelHandle a = get(step.fk_rel);
    RelHandle b = get(step.key_rel);
    RelHandle m = fk_join(eng, a, b);
    m.schema.name = step.merged;
    eng.free_arena(a.arena);
    eng.free_arena(b.arena);
    live.erase(step.fk_rel);
    live.erase(step.key_rel);
    live[step.merged] = m;
  }

  std::vector<RelHandle> rels;
  std::vector<Predicate> masks;
  for (const auto& node : plan.tree.nodes) {
    RelHandle r = get(node.rel);
    // The runtime schema must agree with what planning predicted.
    const Schema& predicted = plan.schemas.at(node.rel);
    if (r.schema.attr_names() != predicted.attr_names())
      throw SizeMismatch("runtime schema of " + node.rel +
                         " does not match the planned schema");
    rels.push_back(r);
    auto it = plan.predicates.find(node.rel);
    masks.push_back(it != plan.predicates.end()
                        ? bind_predicate(it->second, bindings, r.schema)
                        : Predicate{});
  }

  RelHandle out;
  if (plan.agg) {
    out = group_aggregate(eng, plan.tree, rels, masks, *plan.agg);
  } else {
    out = multiway_join(eng, plan.tree, rels, masks);
    if (!plan.project.empty()) {
      RelHandle proj = obl_project(eng, out, plan.project);
      eng.free_arena(out.arena);
      out = proj;
    }
  }
  for (auto& [n, r] : live) eng.free_arena(r.arena);

  RunResult res;
  res.schema = out.schema;
  res.rows = peek_tuples(eng, out);
  res.output_size = out.len;
  res.input_size = input_size;
  eng.free_arena(out.arena);
  return res;
}

}  // namespace oqp
