#pragma once

// Oblivious building blocks: sort, filter, projection, relation augmentation,
// grouping identity, grouping running folds, generalized union, stitching,
// and TM-scalar folds. Every operation's trace is a function of its input and
// output sizes only.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oqp/errors.hpp"
#include "oqp/predicate.hpp"
#include "oqp/relation.hpp"

namespace oqp {

// TM word cost of one decoded row, derived from the schema so the charge is
// content-independent.
inline std::size_t schema_tm_words(const Schema& s) {
  return s.row_width() / 8 + 1;
}

using RowOrdering =
    std::function<std::strong_ordering(const std::uint8_t*, const std::uint8_t*)>;

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct AttrOffset {
  std::size_t index;
  std::size_t offset;
  bool ascending;
};

inline std::vector<AttrOffset> key_offsets(const Schema& s, const SortKey& key) {
  std::vector<std::size_t> offs(s.arity());
  std::size_t off = 0;
  for (std::size_t i = 0; i < s.arity(); ++i) {
    offs[i] = off;
    off += s.attrs[i].encoded_width();
  }
  std::vector<AttrOffset> out;
  for (const auto& k : key) {
    std::size_t i = s.index_of(k.attr);
    out.push_back({i, offs[i], k.ascending});
  }
  return out;
}

}  // namespace detail

// Comparator over encoded rows: the given key first, then the full tuple
// ascending in schema order so sorted output is unique.
inline RowOrdering make_row_ordering(const Schema& s, const SortKey& key,
                                     bool full_tiebreak = true) {
  auto ks = detail::key_offsets(s, key);
  SortKey all;
  if (full_tiebreak)
    for (const auto& a : s.attrs) all.push_back({a.name, true});
  auto ts = detail::key_offsets(s, all);
  Schema schema = s;
  return [schema, ks, ts](const std::uint8_t* a,
                          const std::uint8_t* b) -> std::strong_ordering {
    for (const auto& k : ks) {
      Value va = detail::decode_value(schema.attrs[k.index], a + k.offset);
      Value vb = detail::decode_value(schema.attrs[k.index], b + k.offset);
      auto c = va <=> vb;
      if (c != 0) return k.ascending ? c : (0 <=> c);
    }
    for (const auto& k : ts) {
      Value va = detail::decode_value(schema.attrs[k.index], a + k.offset);
      Value vb = detail::decode_value(schema.attrs[k.index], b + k.offset);
      auto c = va <=> vb;
      if (c != 0) return c;
    }
    return std::strong_ordering::equal;
  };
}

// Bitonic sorting network over a padded scratch arena. Padding rows carry a
// sentinel flag byte and sort after every real row; compare-exchanges always
// write both slots back, so the trace is a fixed function of |R|.
inline RelHandle obl_sort_by(Engine& eng, const RelHandle& R, const RowOrdering& cmp) {
  const std::size_t n = R.len;
  const std::size_t w = R.schema.row_width();
  RelHandle out = alloc_relation(eng, R.schema, n);
  if (n == 0) return out;

  const std::size_t p = detail::next_pow2(n);
  const std::size_t sw = 1 + w;  // flag byte + row
  std::uint32_t scratch = eng.alloc_arena(sw, p);

  TmCharge regs(eng.tm(), 2 * schema_tm_words(R.schema) + 2);

  std::vector<std::uint8_t> row(w), a(sw), b(sw);
  for (std::size_t i = 0; i < n; ++i) {
    eng.um_read(R.arena, i, row.data());
    a[0] = 0;
    std::copy(row.begin(), row.end(), a.begin() + 1);
    eng.um_write(scratch, i, a.data());
  }
  std::fill(a.begin(), a.end(), 0);
  a[0] = 1;  // sentinel
  for (std::size_t i = n; i < p; ++i) eng.um_write(scratch, i, a.data());

  auto order = [&](const std::uint8_t* x, const std::uint8_t* y) {
    if (x[0] != y[0]) return x[0] <=> y[0];  // sentinels last
    if (x[0] == 1) return std::strong_ordering::equal;
    return cmp(x + 1, y + 1);
  };

  for (std::size_t k = 2; k <= p; k <<= 1) {
    for (std::size_t j = k >> 1; j > 0; j >>= 1) {
      for (std::size_t i = 0; i < p; ++i) {
        std::size_t l = i ^ j;
        if (l <= i) continue;
        bool up = (i & k) == 0;
        eng.um_read(scratch, i, a.data());
        eng.um_read(scratch, l, b.data());
        auto c = order(a.data(), b.data());
        bool swap = up ? (c > 0) : (c < 0);
        eng.um_write(scratch, i, swap ? b.data() : a.data());
        eng.um_write(scratch, l, swap ? a.data() : b.data());
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    eng.um_read(scratch, i, a.data());
    eng.um_write(out.arena, i, a.data() + 1);
  }
  eng.free_arena(scratch);
  return out;
}

// Sort by key, ties broken by full-tuple ascending comparison.
inline RelHandle obl_sort(Engine& eng, const RelHandle& R, const SortKey& key) {
  for (const auto& k : key) (void)R.schema.index_of(k.attr);
  return obl_sort_by(eng, R, make_row_ordering(R.schema, key));
}

using RowPredicate = std::function<bool(const Tuple&)>;

// Sorts satisfying rows first, then copies exactly out_len rows. The caller
// supplies out_len (from plan knowledge or a preceding tm_fold pass).
inline RelHandle obl_filter_fn(Engine& eng, const RelHandle& R,
                               const RowPredicate& pred, std::size_t out_len) {
  if (out_len > R.len) throw SizeMismatch("filter out_len exceeds input size");
  Schema schema = R.schema;
  auto tie = make_row_ordering(schema, {});
  RowOrdering cmp = [schema, pred, tie](const std::uint8_t* a,
                                        const std::uint8_t* b) {
    bool pa = pred(decode_tuple(schema, a));
    bool pb = pred(decode_tuple(schema, b));
    if (pa != pb) return pa ? std::strong_ordering::less : std::strong_ordering::greater;
    return tie(a, b);
  };
  RelHandle sorted = obl_sort_by(eng, R, cmp);
  RelHandle out = alloc_relation(eng, R.schema, out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    Tuple t = read_tuple(eng, sorted, i);
    if (!pred(t))
      throw SizeMismatch("filter met a non-satisfying tuple before out_len copies");
    write_tuple(eng, out, i, t);
  }
  eng.free_arena(sorted.arena);
  return out;
}

inline RelHandle obl_filter(Engine& eng, const RelHandle& R, const Predicate& p,
                            std::size_t out_len) {
  p.check_attrs(R.schema);
  Schema schema = R.schema;
  return obl_filter_fn(
      eng, R, [schema, p](const Tuple& t) { return p.eval(schema, t); }, out_len);
}

// Duplicate-preserving projection; one read and one write per tuple.
inline RelHandle obl_project(Engine& eng, const RelHandle& R,
                             const std::vector<std::string>& attrs) {
  Schema out_schema = restrict_schema(R.schema, attrs);
  RelHandle out = alloc_relation(eng, out_schema, R.len);
  for (std::size_t i = 0; i < R.len; ++i) {
    Tuple t = read_tuple(eng, R, i);
    write_tuple(eng, out, i, restrict(R.schema, t, attrs));
  }
  return out;
}

using AugmentFn = std::function<Value(const Tuple&)>;

// Adds a derived column computed in TM from existing attributes.
inline RelHandle augment(Engine& eng, const RelHandle& R, Attribute new_attr,
                         const AugmentFn& f) {
  if (R.schema.has(new_attr.name)) throw AttributeCollision(new_attr.name);
  Schema out_schema = R.schema;
  out_schema.attrs.push_back(new_attr);
  RelHandle out = alloc_relation(eng, out_schema, R.len);
  for (std::size_t i = 0; i < R.len; ++i) {
    Tuple t = read_tuple(eng, R, i);
    Tuple u = t;
    u.push_back(f(t));
    write_tuple(eng, out, i, u);
  }
  return out;
}

inline Attribute int_attr(std::string name) {
  return Attribute{std::move(name), Domain::Int, 0};
}

namespace detail {

// Shared scan machinery for grouping identity / running folds. Sorts by
// (G, O, full tiebreak) unless both are empty, in which case the current
// sequence order is kept (ids then reflect sequence position, matching the
// sequence semantics of the primitives).
inline RelHandle group_scan(Engine& eng, const RelHandle& R,
                            const std::vector<std::string>& G, const SortKey& O,
                            Attribute new_attr,
                            const std::function<Value(const Tuple&, std::int64_t pos_in_group)>& emit) {
  for (const auto& g : G) (void)R.schema.index_of(g);
  for (const auto& o : O) (void)R.schema.index_of(o.attr);
  RelHandle seq = R;
  bool sorted = false;
  if (!G.empty() || !O.empty()) {
    SortKey key = asc_key(G);
    key.insert(key.end(), O.begin(), O.end());
    seq = obl_sort(eng, R, key);
    sorted = true;
  }
  Schema out_schema = seq.schema;
  if (out_schema.has(new_attr.name)) throw AttributeCollision(new_attr.name);
  out_schema.attrs.push_back(new_attr);
  RelHandle out = alloc_relation(eng, out_schema, seq.len);

  TmCharge state(eng.tm(), schema_tm_words(seq.schema) + 2);  // group key + counter
  Tuple prev_key;
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < seq.len; ++i) {
    Tuple t = read_tuple(eng, seq, i);
    Tuple gkey = restrict(seq.schema, t, G);
    if (i == 0 || full_tuple_compare(gkey, prev_key) != 0) {
      pos = 0;
      prev_key = gkey;
    }
    ++pos;
    Tuple u = t;
    u.push_back(emit(t, pos));
    write_tuple(eng, out, i, u);
  }
  if (sorted) eng.free_arena(seq.arena);
  return out;
}

}  // namespace detail

// Within each G-group ordered by O, assigns ids 1, 2, ...
inline RelHandle grouping_identity(Engine& eng, const RelHandle& R,
                                   const std::vector<std::string>& G,
                                   const SortKey& O, const std::string& new_attr) {
  return detail::group_scan(eng, R, G, O, int_attr(new_attr),
                            [](const Tuple&, std::int64_t pos) { return Value(pos); });
}

enum class RunningFold { Sum, Min, Max };

// Prefix-inclusive running fold of src within each G-group ordered by O.
inline RelHandle grouping_running_fold(Engine& eng, const RelHandle& R,
                                       const std::vector<std::string>& G,
                                       const SortKey& O, const std::string& src_attr,
                                       const std::string& new_attr, RunningFold op) {
  std::size_t src = R.schema.index_of(src_attr);
  if (R.schema.attrs[src].domain != Domain::Int)
    throw DomainMismatch("running fold source must be numeric: " + src_attr);
  auto acc = std::make_shared<std::int64_t>(0);
  return detail::group_scan(
      eng, R, G, O, int_attr(new_attr),
      [src, op, acc](const Tuple& t, std::int64_t pos) {
        std::int64_t v = t[src].is_null() ? 0 : t[src].as_int();
        if (pos == 1) {
          *acc = v;
        } else {
          switch (op) {
            case RunningFold::Sum: *acc = checked_add(*acc, v); break;
            case RunningFold::Min: *acc = std::min(*acc, v); break;
            case RunningFold::Max: *acc = std::max(*acc, v); break;
          }
        }
        return Value(*acc);
      });
}

inline RelHandle grouping_running_sum(Engine& eng, const RelHandle& R,
                                      const std::vector<std::string>& G,
                                      const SortKey& O, const std::string& src_attr,
                                      const std::string& new_attr) {
  return grouping_running_fold(eng, R, G, O, src_attr, new_attr, RunningFold::Sum);
}

// Generalized union: schema Attr(R) ∪ Attr(S); rows of one side carry Null
// for the other side's private attributes. R rows first, then S rows.
inline RelHandle gen_union(Engine& eng, const RelHandle& R, const RelHandle& S) {
  Schema out_schema;
  out_schema.name = R.schema.name + "+" + S.schema.name;
  out_schema.attrs = R.schema.attrs;
  for (const auto& a : S.schema.attrs) {
    if (auto i = R.schema.find(a.name)) {
      const Attribute& ra = R.schema.attrs[*i];
      if (ra.domain != a.domain || ra.encoded_width() != a.encoded_width())
        throw DomainMismatch("shared attribute " + a.name + " has mismatched domain");
    } else {
      out_schema.attrs.push_back(a);
    }
  }
  RelHandle out = alloc_relation(eng, out_schema, R.len + S.len);
  auto emit = [&](const RelHandle& side, std::size_t i, std::size_t slot) {
    Tuple t = read_tuple(eng, side, i);
    Tuple u(out_schema.arity(), Value::null());
    for (std::size_t j = 0; j < side.schema.arity(); ++j)
      u[out_schema.index_of(side.schema.attrs[j].name)] = t[j];
    write_tuple(eng, out, slot, u);
  };
  for (std::size_t i = 0; i < R.len; ++i) emit(R, i, i);
  for (std::size_t i = 0; i < S.len; ++i) emit(S, i, R.len + i);
  return out;
}

// Positional concatenation of two equal-length sequences. Shared attributes
// must agree at every position; disagreement signals an upstream ordering bug.
inline RelHandle stitch(Engine& eng, const RelHandle& R, const RelHandle& S) {
  if (R.len != S.len) throw SizeMismatch("stitch inputs differ in length");
  Schema out_schema;
  out_schema.name = R.schema.name + "*" + S.schema.name;
  out_schema.attrs = R.schema.attrs;
  std::vector<std::pair<std::size_t, std::size_t>> shared;  // (R idx, S idx)
  for (std::size_t j = 0; j < S.schema.arity(); ++j) {
    if (auto i = R.schema.find(S.schema.attrs[j].name))
      shared.emplace_back(*i, j);
    else
      out_schema.attrs.push_back(S.schema.attrs[j]);
  }
  RelHandle out = alloc_relation(eng, out_schema, R.len);
  for (std::size_t i = 0; i < R.len; ++i) {
    Tuple r = read_tuple(eng, R, i);
    Tuple s = read_tuple(eng, S, i);
    for (auto [ri, si] : shared)
      if (!(r[ri] == s[si]))
        throw StitchMismatch("stitch disagreement on " +
                             R.schema.attrs[ri].name + " at position " +
                             std::to_string(i));
    Tuple u = r;
    for (std::size_t j = 0; j < S.schema.arity(); ++j)
      if (!R.schema.has(S.schema.attrs[j].name)) u.push_back(s[j]);
    write_tuple(eng, out, i, u);
  }
  return out;
}

// Schema-level attribute rename; no UM access, the arena is untouched.
inline RelHandle rename_attrs(const RelHandle& R,
                              const std::vector<std::pair<std::string, std::string>>& renames) {
  RelHandle out = R;
  for (const auto& [from, to] : renames) {
    std::size_t i = out.schema.index_of(from);
    if (out.schema.has(to)) throw AttributeCollision(to);
    out.schema.attrs[i].name = to;
  }
  return out;
}

// TM-scalar folds: read every slot once, write nothing to UM.
inline std::int64_t tm_sum(Engine& eng, const RelHandle& R, const std::string& attr) {
  std::size_t i = R.schema.index_of(attr);
  TmCharge acc(eng.tm(), 1);
  std::int64_t s = 0;
  for (std::size_t k = 0; k < R.len; ++k) {
    Tuple t = read_tuple(eng, R, k);
    if (!t[i].is_null()) s = checked_add(s, t[i].as_int());
  }
  return s;
}

inline std::int64_t tm_count(Engine& eng, const RelHandle& R) {
  TmCharge acc(eng.tm(), 1);
  std::int64_t c = 0;
  for (std::size_t k = 0; k < R.len; ++k) {
    (void)read_tuple(eng, R, k);
    ++c;
  }
  return c;
}

inline std::int64_t tm_count_if(Engine& eng, const RelHandle& R,
                                const RowPredicate& pred) {
  TmCharge acc(eng.tm(), 1);
  std::int64_t c = 0;
  for (std::size_t k = 0; k < R.len; ++k)
    if (pred(read_tuple(eng, R, k))) ++c;
  return c;
}

// Histogram of an integer attribute; bin count is charged against the TM
// budget, so wide distributions fail loudly.
inline std::map<std::int64_t, std::int64_t> tm_histogram(Engine& eng,
                                                         const RelHandle& R,
                                                         const std::string& attr) {
  std::size_t i = R.schema.index_of(attr);
  std::map<std::int64_t, std::int64_t> h;
  TmCharge bins(eng.tm(), 0);
  for (std::size_t k = 0; k < R.len; ++k) {
    Tuple t = read_tuple(eng, R, k);
    if (t[i].is_null()) throw DomainMismatch("histogram over Null value");
    ++h[t[i].as_int()];
    bins.resize(2 * h.size());
  }
  return h;
}

}  // namespace oqp
