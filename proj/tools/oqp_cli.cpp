// Command-line front end: ingest CSVs, plan and run query templates, check
// results against the oracle, verify trace equality on matched instance
// pairs, and benchmark access-count growth.
//
// Exit codes: 0 success, 2 verification failure, 3 plan rejected, 4 data or
// input error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "oqp/oqp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 2;
constexpr int kExitPlanRejected = 3;
constexpr int kExitDataError = 4;

oqp::Bindings parse_bindings(const std::vector<std::string>& raw) {
  oqp::Bindings b;
  for (const auto& s : raw) {
    auto eq = s.find('=');
    if (eq == std::string::npos || s.empty() || s[0] != '?')
      throw oqp::ParseError("binding must look like ?1=value: " + s);
    std::string key = s.substr(0, eq);
    std::string val = s.substr(eq + 1);
    try {
      std::size_t pos = 0;
      std::int64_t v = std::stoll(val, &pos);
      if (pos == val.size()) {
        b[key] = oqp::Value(v);
        continue;
      }
    } catch (const std::exception&) {
    }
    b[key] = oqp::Value(val);
  }
  return b;
}

oqp::QueryTemplate load_template(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw oqp::ParseError("cannot open template file " + file);
  nlohmann::json j;
  in >> j;
  return oqp::parse_template(j);
}

nlohmann::json tree_json(const oqp::JoinTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    nlohmann::json jn{{"rel", n.rel}};
    if (n.parent)
      jn["parent"] = *n.parent;
    else
      jn["parent"] = nullptr;
    nodes.push_back(jn);
  }
  return nodes;
}

nlohmann::json plan_json(const oqp::Plan& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : p.fk_steps)
    steps.push_back({{"fk_rel", s.fk_rel}, {"key_rel", s.key_rel}, {"merged", s.merged}});
  nlohmann::json j{{"fk_steps", steps}, {"tree", tree_json(p.tree)}};
  if (p.agg) {
    j["agg"] = {{"fn", oqp::agg_fn_name(p.agg->fn)},
                {"rel", p.agg->rel},
                {"attr", p.agg->attr},
                {"group_by", p.agg->group_by}};
  }
  if (!p.project.empty()) j["project"] = p.project;
  return j;
}

int cmd_run(const std::string& db_dir, const std::string& tmpl_file,
            const std::vector<std::string>& raw_bindings, const std::string& out_file,
            const std::string& trace_file, std::size_t tm_const, bool oracle_check) {
  auto tmpl = load_template(tmpl_file);
  auto db = oqp::load_database(db_dir);
  auto bindings = parse_bindings(raw_bindings);

  oqp::Plan p;
  try {
    p = oqp::plan(tmpl, db.schemas);
  } catch (const oqp::Error& e) {
    std::cerr << "plan rejected: " << e.what() << "\n";
    return kExitPlanRejected;
  }

  std::size_t n_total = 0;
  for (const auto& rn : tmpl.relations) n_total += db.tables.at(rn).size();

  auto run_once = [&](oqp::Engine& eng) {
    eng.tm().set_budget_words(oqp::tm_budget_words(n_total, tm_const));
    return oqp::execute(eng, p, db, bindings);
  };

  oqp::Engine eng;
  oqp::RunResult res = run_once(eng);

  // Determinism check: a second run must reproduce the trace bit for bit.
  oqp::Engine eng2;
  oqp::RunResult res2 = run_once(eng2);
  if (oqp::trace_digest(eng.trace()) != oqp::trace_digest(eng2.trace()) ||
      eng.layout_log() != eng2.layout_log()) {
    std::cerr << "nondeterministic trace across identical runs\n";
    return kExitVerifyFail;
  }
  (void)res2;

  if (!out_file.empty()) {
    std::ofstream out(out_file);
    oqp::write_result_csv(out, res.schema.attr_names(), res.rows);
  } else {
    oqp::write_result_csv(std::cout, res.schema.attr_names(), res.rows);
  }
  if (!trace_file.empty()) {
    std::ofstream out(trace_file);
    oqp::export_trace_jsonl(out, eng.layout_log(), eng.trace());
  }

  nlohmann::json arenas = nlohmann::json::array();
  for (const auto& [id, cap] : eng.layout_log()) arenas.push_back({id, cap});
  nlohmann::json stats{
      {"input_rows", res.input_size},
      {"output_rows", res.output_size},
      {"um_accesses", eng.trace().size()},
      {"um_accesses_note", "function of (input sizes, output size) only"},
      {"trace_digest", oqp::trace_digest(eng.trace())},
      {"tm_peak_words", eng.tm().peak_words()},
      {"tm_budget_words", eng.tm().budget_words()},
      {"counter_hwm", eng.stats().counter_hwm},
      {"arenas", arenas}};
  std::cerr << stats.dump(2) << "\n";

  if (oracle_check) {
    auto o = oqp::oracle_eval(db, tmpl, bindings);
    auto ce = oqp::canonical_result(res.schema.attr_names(), res.rows);
    auto co = oqp::canonical_result(o.columns, o.rows);
    if (!oqp::results_equal(ce, co)) {
      std::cerr << "engine result disagrees with the oracle\n";
      return kExitVerifyFail;
    }
    std::cerr << "oracle check passed (" << res.rows.size() << " rows)\n";
  }
  return kExitOk;
}

oqp::InstancePair make_pair(const std::string& kind, std::uint64_t seed, std::size_t n) {
  if (kind == "bundled") return oqp::bundled_pair();
  if (kind == "join") return oqp::gen_join_pair(seed, n);
  if (kind == "chain") return oqp::gen_chain_pair(seed, n);
  if (kind == "agg") return oqp::gen_agg_pair(seed, n, oqp::AggFn::Sum);
  if (kind == "agg-select") return oqp::gen_agg_pair(seed, n, oqp::AggFn::Sum, true);
  if (kind == "filter") return oqp::gen_filter_pair(seed, n);
  throw oqp::ParseError("unknown pair kind: " + kind);
}

int cmd_verify(const std::string& kind, std::uint64_t seed, std::size_t n, bool foil) {
  oqp::InstancePair pair = make_pair(kind, seed, n);
  oqp::Verdict v;
  if (foil) {
    // Run the leaky nested-loop join on both sides; a Fail verdict shows the
    // verifier has power.
    auto side = [&](const oqp::Database& db) {
      return [&db](oqp::Engine& e) {
        oqp::RelHandle r =
            oqp::materialize(e, db.schemas.at("R"), db.tables.at("R"));
        oqp::RelHandle s =
            oqp::materialize(e, db.schemas.at("S"), db.tables.at("S"));
        oqp::nested_loop_join_foil(e, r, s);
      };
    };
    v = oqp::verify_oblivious(side(pair.d1), side(pair.d2));
  } else {
    v = oqp::verify_pair(pair);
  }
  std::cout << oqp::verdict_json(pair.note, seed, foil ? "nested-loop foil" : kind, v)
                   .dump(2)
            << "\n";
  return v.pass ? kExitOk : kExitVerifyFail;
}

int cmd_bench(int min_exp, int max_exp, double max_ratio) {
  std::uint64_t prev = 0;
  bool ok = true;
  std::cout << "n,m,um_accesses,ratio\n";
  for (int k = min_exp; k <= max_exp; ++k) {
    std::size_t n = std::size_t(1) << k;
    oqp::Engine eng;
    eng.trace().set_count_only(true);
    oqp::Schema rs("R", {oqp::int_attr("J"), oqp::int_attr("A")});
    oqp::Schema ss("S", {oqp::int_attr("J"), oqp::int_attr("B")});
    std::vector<oqp::Tuple> r, s;
    for (std::size_t i = 0; i < n; ++i) {
      r.push_back({oqp::Value(std::int64_t(i)), oqp::Value(std::int64_t(i % 97))});
      s.push_back({oqp::Value(std::int64_t(i)), oqp::Value(std::int64_t(i % 89))});
    }
    oqp::RelHandle rh = oqp::materialize(eng, rs, r);
    oqp::RelHandle sh = oqp::materialize(eng, ss, s);
    oqp::RelHandle out = oqp::binary_join(eng, rh, sh);
    std::uint64_t count = eng.trace().size();
    double ratio = prev ? double(count) / double(prev) : 0.0;
    std::cout << n << "," << out.len << "," << count << ","
              << (prev ? std::to_string(ratio) : "-") << "\n";
    if (prev && ratio > max_ratio) ok = false;
    prev = count;
  }
  if (!ok) {
    std::cerr << "access-count growth exceeded the expected bound\n";
    return kExitVerifyFail;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oblivious query engine"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "CSV directory -> binary database");
  std::string csv_dir, schema_file, out_dir;
  ingest->add_option("--csv", csv_dir, "directory with <relation>.csv files")->required();
  ingest->add_option("--schema", schema_file, "schema JSON file")->required();
  ingest->add_option("--out", out_dir, "output database directory")->required();

  auto* planc = app.add_subcommand("plan", "plan a template without touching data");
  std::string db_dir, tmpl_file;
  planc->add_option("--db", db_dir, "database directory")->required();
  planc->add_option("--template", tmpl_file, "query template JSON")->required();

  auto* runc = app.add_subcommand("run", "execute a template");
  auto* oraclec = app.add_subcommand("oracle-check", "execute and compare with the oracle");
  std::vector<std::string> raw_bindings;
  std::string out_file, trace_file;
  std::size_t tm_const = 64;
  for (CLI::App* c : {runc, oraclec}) {
    c->add_option("--db", db_dir, "database directory")->required();
    c->add_option("--template", tmpl_file, "query template JSON")->required();
    c->add_option("--bind", raw_bindings, "constant binding, e.g. ?1=5");
    c->add_option("--out", out_file, "result CSV path (default stdout)");
    c->add_option("--trace", trace_file, "trace JSONL output path");
    c->add_option("--tm-const", tm_const, "TM budget constant c in c*ceil(log2(n+m+2))");
  }

  auto* verifyc = app.add_subcommand("verify", "trace equality on a matched pair");
  std::string pair_kind = "bundled";
  std::uint64_t seed = 1;
  std::size_t pair_n = 32;
  bool foil = false;
  verifyc->add_option("--pair", pair_kind, "bundled|join|chain|agg|agg-select|filter");
  verifyc->add_option("--seed", seed, "generator seed");
  verifyc->add_option("--size", pair_n, "rows per relation");
  verifyc->add_flag("--foil", foil, "run the non-oblivious nested-loop foil instead");

  auto* benchc = app.add_subcommand("bench", "binary join access counts, doubling sizes");
  int min_exp = 10, max_exp = 16;
  double max_ratio = 2.6;
  benchc->add_option("--min-exp", min_exp, "smallest size exponent");
  benchc->add_option("--max-exp", max_exp, "largest size exponent");
  benchc->add_option("--max-ratio", max_ratio, "maximum allowed per-doubling growth");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      oqp::ingest(csv_dir, schema_file, out_dir);
      std::cout << "ingested into " << out_dir << "\n";
      return kExitOk;
    }
    if (*planc) {
      auto tmpl = load_template(tmpl_file);
      auto schemas = oqp::load_schemas(std::filesystem::path(db_dir) / "schema.json");
      try {
        oqp::Plan p = oqp::plan(tmpl, schemas);
        std::cout << plan_json(p).dump(2) << "\n";
        return kExitOk;
      } catch (const oqp::Error& e) {
        std::cerr << "plan rejected: " << e.what() << "\n";
        return kExitPlanRejected;
      }
    }
    if (*runc) return cmd_run(db_dir, tmpl_file, raw_bindings, out_file, trace_file,
                              tm_const, false);
    if (*oraclec) return cmd_run(db_dir, tmpl_file, raw_bindings, out_file, trace_file,
                                 tm_const, true);
    if (*verifyc) return cmd_verify(pair_kind, seed, pair_n, foil);
    if (*benchc) return cmd_bench(min_exp, max_exp, max_ratio);
  } catch (const oqp::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const oqp::FkViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const oqp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}
