#pragma once

// Relation instances materialized as fixed-width tuple sequences inside one
// UM arena. Every attribute serializes to a fixed byte width so slot indices
// are well defined.

#include <cstdint>
#include <cstring>
#include <vector>

#include "oqp/memsim.hpp"
#include "oqp/schema.hpp"

namespace oqp {

struct RelHandle {
  Schema schema;
  std::uint32_t arena = 0;
  std::size_t len = 0;
};

namespace detail {

inline void encode_value(const Attribute& a, const Value& v, std::uint8_t* out) {
  std::size_t payload = a.encoded_width() - 1;
  std::memset(out, 0, a.encoded_width());
  out[0] = std::uint8_t(v.kind());
  if (v.is_int()) {
    std::uint64_t u = std::uint64_t(v.as_int());
    for (int i = 0; i < 8; ++i) out[1 + i] = std::uint8_t(u >> (56 - 8 * i));
  } else if (v.is_str()) {
    const std::string& s = v.as_str();
    std::memcpy(out + 1, s.data(), std::min(s.size(), payload));
  }
}

inline Value decode_value(const Attribute& a, const std::uint8_t* in) {
  switch (static_cast<Value::Kind>(in[0])) {
    case Value::Kind::Null:
      return Value::null();
    case Value::Kind::Int: {
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) u = (u << 8) | in[1 + i];
      return Value(std::int64_t(u));
    }
    case Value::Kind::Str: {
      std::size_t payload = a.encoded_width() - 1;
      std::size_t n = payload;
      while (n > 0 && in[n] == 0) --n;
      return Value(std::string(reinterpret_cast<const char*>(in + 1), n));
    }
  }
  throw DomainMismatch("corrupt value tag in arena");
}

}  // namespace detail

inline void encode_tuple(const Schema& s, const Tuple& t, std::uint8_t* out) {
  std::size_t off = 0;
  for (std::size_t i = 0; i < s.arity(); ++i) {
    detail::encode_value(s.attrs[i], t[i], out + off);
    off += s.attrs[i].encoded_width();
  }
}

inline Tuple decode_tuple(const Schema& s, const std::uint8_t* in) {
  Tuple t;
  t.reserve(s.arity());
  std::size_t off = 0;
  for (std::size_t i = 0; i < s.arity(); ++i) {
    t.push_back(detail::decode_value(s.attrs[i], in + off));
    off += s.attrs[i].encoded_width();
  }
  return t;
}

// Traced slot access at tuple granularity.
inline Tuple read_tuple(Engine& eng, const RelHandle& r, std::size_t slot) {
  std::vector<std::uint8_t> buf(r.schema.row_width());
  eng.um_read(r.arena, slot, buf.data());
  return decode_tuple(r.schema, buf.data());
}

inline void write_tuple(Engine& eng, const RelHandle& r, std::size_t slot,
                        const Tuple& t) {
  std::vector<std::uint8_t> buf(r.schema.row_width());
  encode_tuple(r.schema, t, buf.data());
  eng.um_write(r.arena, slot, buf.data());
}

inline RelHandle alloc_relation(Engine& eng, Schema schema, std::size_t len) {
  RelHandle r;
  r.arena = eng.alloc_arena(schema.row_width(), len);
  r.schema = std::move(schema);
  r.len = len;
  return r;
}

// Load a client-side tuple sequence into a fresh arena. The write pattern is
// a function of the row count only.
inline RelHandle materialize(Engine& eng, const Schema& schema,
                             const std::vector<Tuple>& rows) {
  for (const auto& t : rows) check_tuple(schema, t);
  RelHandle r = alloc_relation(eng, schema, rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) write_tuple(eng, r, i, rows[i]);
  return r;
}

// Host-side inspection without trace events. For result export and tests;
// never used by engine operators.
inline std::vector<Tuple> peek_tuples(const Engine& eng, const RelHandle& r) {
  const UmArena& a = eng.arena(r.arena);
  std::vector<Tuple> out;
  out.reserve(r.len);
  for (std::size_t i = 0; i < r.len; ++i)
    out.push_back(decode_tuple(r.schema, a.data.data() + i * a.slot_width));
  return out;
}

}  // namespace oqp
