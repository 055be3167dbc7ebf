#pragma once

// Shared helpers for the test suite.

#include <cstdint>
#include <string>
#include <vector>

#include "oqp/oqp.hpp"

namespace testutil {

inline oqp::Schema int_schema(const std::string& name,
                              const std::vector<std::string>& attrs) {
  oqp::Schema s;
  s.name = name;
  for (const auto& a : attrs) s.attrs.push_back(oqp::int_attr(a));
  return s;
}

inline std::vector<oqp::Value> column(const oqp::Engine& eng, const oqp::RelHandle& r,
                                      const std::string& attr) {
  std::size_t i = r.schema.index_of(attr);
  std::vector<oqp::Value> out;
  for (const auto& t : oqp::peek_tuples(eng, r)) out.push_back(t[i]);
  return out;
}

inline std::vector<std::int64_t> int_column(const oqp::Engine& eng,
                                            const oqp::RelHandle& r,
                                            const std::string& attr) {
  std::vector<std::int64_t> out;
  for (const auto& v : column(eng, r, attr)) out.push_back(v.as_int());
  return out;
}

// Rows of a relation as a canonical multiset (sorted).
inline std::vector<oqp::Tuple> sorted_rows(const oqp::Engine& eng,
                                           const oqp::RelHandle& r) {
  auto rows = oqp::peek_tuples(eng, r);
  std::sort(rows.begin(), rows.end(), [](const oqp::Tuple& a, const oqp::Tuple& b) {
    return oqp::full_tuple_compare(a, b) < 0;
  });
  return rows;
}

// Digest of the trace produced by running `fn` in a fresh engine.
template <typename Fn>
std::string run_digest(Fn&& fn) {
  oqp::Engine eng;
  fn(eng);
  return oqp::trace_digest(eng.trace());
}

inline oqp::Tuple ints(std::initializer_list<std::int64_t> vs) {
  oqp::Tuple t;
  for (auto v : vs) t.push_back(oqp::Value(v));
  return t;
}

}  // namespace testutil
