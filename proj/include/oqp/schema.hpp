#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "oqp/errors.hpp"
#include "oqp/value.hpp"

namespace oqp {

constexpr std::size_t kDefaultStrWidth = 32;

struct Attribute {
  std::string name;
  Domain domain = Domain::Int;
  std::size_t width = kDefaultStrWidth;  // byte width for Str values

  // Fixed byte width of the encoded value: 1 tag byte + payload.
  std::size_t encoded_width() const {
    return 1 + (domain == Domain::Int ? 8 : width);
  }
};

struct ForeignKey {
  std::vector<std::string> attrs;  // local attribute names
  std::string references;         // foreign relation name
};

struct Schema {
  std::string name;
  std::vector<Attribute> attrs;
  std::vector<std::string> key;  // optional declared key
  std::vector<ForeignKey> foreign_keys;

  Schema() = default;
  Schema(std::string n, std::vector<Attribute> a) : name(std::move(n)), attrs(std::move(a)) {
    validate();
  }

  void validate() const {
    for (std::size_t i = 0; i < attrs.size(); ++i)
      for (std::size_t j = i + 1; j < attrs.size(); ++j)
        if (attrs[i].name == attrs[j].name)
          throw AttributeCollision(attrs[i].name);
    for (const auto& k : key) (void)index_of(k);
    for (const auto& fk : foreign_keys)
      for (const auto& a : fk.attrs) (void)index_of(a);
  }

  std::size_t arity() const { return attrs.size(); }

  std::optional<std::size_t> find(const std::string& attr) const {
    for (std::size_t i = 0; i < attrs.size(); ++i)
      if (attrs[i].name == attr) return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string& attr) const {
    if (auto i = find(attr)) return *i;
    throw UnknownAttribute(attr);
  }

  bool has(const std::string& attr) const { return find(attr).has_value(); }

  std::vector<std::string> attr_names() const {
    std::vector<std::string> out;
    out.reserve(attrs.size());
    for (const auto& a : attrs) out.push_back(a.name);
    return out;
  }

  // Fixed slot width of an encoded row.
  std::size_t row_width() const {
    std::size_t w = 0;
    for (const auto& a : attrs) w += a.encoded_width();
    return w;
  }
};

// Attribute names shared by two schemas, in the order of `a`.
inline std::vector<std::string> shared_attrs(const Schema& a, const Schema& b) {
  std::vector<std::string> out;
  for (const auto& attr : a.attrs)
    if (b.has(attr.name)) out.push_back(attr.name);
  return out;
}

using Tuple = std::vector<Value>;

inline void check_tuple(const Schema& s, const Tuple& t) {
  if (t.size() != s.arity())
    throw DomainMismatch("tuple arity " + std::to_string(t.size()) +
                         " does not match schema " + s.name);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Value& v = t[i];
    if (v.is_null()) continue;
    if (s.attrs[i].domain == Domain::Int && !v.is_int())
      throw DomainMismatch("attribute " + s.attrs[i].name + " expects int");
    if (s.attrs[i].domain == Domain::Str) {
      if (!v.is_str())
        throw DomainMismatch("attribute " + s.attrs[i].name + " expects str");
      if (v.as_str().size() > s.attrs[i].width)
        throw DomainMismatch("string exceeds width of " + s.attrs[i].name);
    }
  }
}

// t restricted to `attrs`, values copied, in the schema order of `s`.
inline Tuple restrict(const Schema& s, const Tuple& t,
                      const std::vector<std::string>& attrs) {
  for (const auto& a : attrs) (void)s.index_of(a);
  Tuple out;
  out.reserve(attrs.size());
  for (std::size_t i = 0; i < s.arity(); ++i)
    if (std::find(attrs.begin(), attrs.end(), s.attrs[i].name) != attrs.end())
      out.push_back(t[i]);
  return out;
}

inline Schema restrict_schema(const Schema& s, const std::vector<std::string>& attrs,
                              std::string name = {}) {
  for (const auto& a : attrs) (void)s.index_of(a);
  Schema out;
  out.name = name.empty() ? s.name : std::move(name);
  for (const auto& a : s.attrs)
    if (std::find(attrs.begin(), attrs.end(), a.name) != attrs.end())
      out.attrs.push_back(a);
  return out;
}

struct SortAttr {
  std::string attr;
  bool ascending = true;
};

// Ordered comparison key; attrs must exist in the schema of both tuples.
using SortKey = std::vector<SortAttr>;

inline SortKey asc_key(const std::vector<std::string>& attrs) {
  SortKey k;
  for (const auto& a : attrs) k.push_back({a, true});
  return k;
}

// Lexicographic comparison under the Value total order, honoring per-attr
// direction flags. Both tuples must conform to their schemas.
inline std::strong_ordering tuple_compare(const Schema& s1, const Tuple& t1,
                                          const Schema& s2, const Tuple& t2,
                                          const SortKey& key) {
  for (const auto& k : key) {
    const Value& a = t1[s1.index_of(k.attr)];
    const Value& b = t2[s2.index_of(k.attr)];
    auto c = a <=> b;
    if (c != 0) return k.ascending ? c : (0 <=> c);
  }
  return std::strong_ordering::equal;
}

inline std::strong_ordering tuple_compare(const Schema& s, const Tuple& t1,
                                          const Tuple& t2, const SortKey& key) {
  return tuple_compare(s, t1, s, t2, key);
}

// Full-tuple ascending comparison in schema order; the tie-break rule used
// everywhere so sorted outputs are unique.
inline std::strong_ordering full_tuple_compare(const Tuple& t1, const Tuple& t2) {
  for (std::size_t i = 0; i < std::min(t1.size(), t2.size()); ++i) {
    auto c = t1[i] <=> t2[i];
    if (c != 0) return c;
  }
  return t1.size() <=> t2.size();
}

// TM accounting: words occupied by a value / tuple held in trusted memory.
inline std::size_t tm_words(const Value& v) {
  return v.is_str() ? (v.as_str().size() + 7) / 8 + 1 : 1;
}

inline std::size_t tm_words(const Tuple& t) {
  std::size_t w = 0;
  for (const auto& v : t) w += tm_words(v);
  return w;
}

}  // namespace oqp
