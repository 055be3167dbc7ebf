#pragma once

// Flat-file database plumbing: schema files (JSON), CSV ingestion into
// fixed-width binary relation files plus a manifest, and result CSV output.
// Byte layouts are deterministic so repeated runs are comparable.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oqp/executor.hpp"

namespace oqp {

inline std::map<std::string, Schema> parse_schemas(const nlohmann::json& j) {
  std::map<std::string, Schema> out;
  try {
    for (const auto& r : j.at("relations")) {
      Schema s;
      s.name = r.at("name").get<std::string>();
      for (const auto& a : r.at("attrs")) {
        Attribute attr;
        attr.name = a.at("name").get<std::string>();
        std::string ty = a.at("type").get<std::string>();
        if (ty == "int") {
          attr.domain = Domain::Int;
        } else if (ty == "str") {
          attr.domain = Domain::Str;
          attr.width = a.value("width", kDefaultStrWidth);
        } else {
          throw ParseError("unknown attribute type: " + ty);
        }
        if (!attr.name.empty() && attr.name[0] == '#')
          throw ParseError("attribute names may not start with '#': " + attr.name);
        s.attrs.push_back(std::move(attr));
      }
      if (r.contains("key"))
        for (const auto& k : r.at("key")) s.key.push_back(k.get<std::string>());
      if (r.contains("foreign_keys"))
        for (const auto& fk : r.at("foreign_keys")) {
          ForeignKey f;
          for (const auto& a : fk.at("attrs")) f.attrs.push_back(a.get<std::string>());
          f.references = fk.at("references").get<std::string>();
          s.foreign_keys.push_back(std::move(f));
        }
      s.validate();
      out[s.name] = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad schema file: ") + e.what());
  }
  if (out.empty()) throw ParseError("schema file declares no relations");
  return out;
}

inline std::map<std::string, Schema> load_schemas(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open schema file " + file.string());
  nlohmann::json j;
  in >> j;
  return parse_schemas(j);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

// Parses one CSV file against a schema. Header must match the attribute
// names; the literal NULL denotes a missing value.
inline std::vector<Tuple> parse_csv(std::istream& in, const Schema& s,
                                    const std::string& where) {
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(where + ": empty file, expected a header row");
  auto header = detail::split_csv_line(line);
  if (header != s.attr_names())
    throw ParseError(where + ": header does not match schema of " + s.name);
  std::vector<Tuple> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != s.arity())
      throw ParseError(where + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(s.arity()) + " fields, got " +
                       std::to_string(fields.size()));
    Tuple t;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      std::string loc = where + ":" + std::to_string(lineno) + " column " +
                        s.attrs[c].name;
      if (f == "NULL") {
        t.push_back(Value::null());
      } else if (s.attrs[c].domain == Domain::Int) {
        try {
          std::size_t pos = 0;
          std::int64_t v = std::stoll(f, &pos);
          if (pos != f.size()) throw std::invalid_argument(f);
          t.push_back(Value(v));
        } catch (const std::exception&) {
          throw ParseError(loc + ": not an integer: " + f);
        }
      } else {
        if (f.size() > s.attrs[c].width)
          throw ParseError(loc + ": string exceeds declared width " +
                           std::to_string(s.attrs[c].width));
        t.push_back(Value(f));
      }
    }
    rows.push_back(std::move(t));
  }
  return rows;
}

// CSV directory + schema file -> binary relation files and a manifest.
inline void ingest(const std::filesystem::path& csv_dir,
                   const std::filesystem::path& schema_file,
                   const std::filesystem::path& out_dir) {
  auto schemas = load_schemas(schema_file);
  std::filesystem::create_directories(out_dir);
  nlohmann::json manifest;
  manifest["relations"] = nlohmann::json::array();
  for (const auto& [name, s] : schemas) {
    std::filesystem::path csv = csv_dir / (name + ".csv");
    std::ifstream in(csv);
    if (!in) throw ParseError("missing CSV file " + csv.string());
    auto rows = parse_csv(in, s, csv.string());
    std::string file = name + ".rel";
    std::ofstream out(out_dir / file, std::ios::binary);
    std::vector<std::uint8_t> buf(s.row_width());
    for (const auto& t : rows) {
      check_tuple(s, t);
      encode_tuple(s, t, buf.data());
      out.write(reinterpret_cast<const char*>(buf.data()),
                std::streamsize(buf.size()));
    }
    manifest["relations"].push_back(
        {{"name", name}, {"file", file}, {"rows", rows.size()}});
  }
  std::filesystem::copy_file(schema_file, out_dir / "schema.json",
                             std::filesystem::copy_options::overwrite_existing);
  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

inline Database load_database(const std::filesystem::path& dir) {
  Database db;
  db.schemas = load_schemas(dir / "schema.json");
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ParseError("missing manifest in " + dir.string());
  nlohmann::json manifest;
  mf >> manifest;
  for (const auto& r : manifest.at("relations")) {
    std::string name = r.at("name").get<std::string>();
    auto it = db.schemas.find(name);
    if (it == db.schemas.end()) throw ParseError("manifest names unknown relation " + name);
    const Schema& s = it->second;
    std::ifstream in(dir / r.at("file").get<std::string>(), std::ios::binary);
    if (!in) throw ParseError("missing relation file for " + name);
    std::size_t rows = r.at("rows").get<std::size_t>();
    std::vector<std::uint8_t> buf(s.row_width());
    std::vector<Tuple> table;
    for (std::size_t i = 0; i < rows; ++i) {
      if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size())))
        throw ParseError("relation file for " + name + " is truncated");
      table.push_back(decode_tuple(s, buf.data()));
    }
    db.tables[name] = std::move(table);
  }
  return db;
}

inline void write_result_csv(std::ostream& os, const std::vector<std::string>& columns,
                             const std::vector<Tuple>& rows) {
  for (std::size_t i = 0; i < columns.size(); ++i)
    os << (i ? "," : "") << detail::csv_quote(columns[i]);
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) os << ",";
      if (r[i].is_null())
        os << "NULL";
      else if (r[i].is_int())
        os << r[i].as_int();
      else
        os << detail::csv_quote(r[i].as_str());
    }
    os << "\n";
  }
}

}  // namespace oqp
