#pragma once

// Conjunctions of atomic comparisons against constants. Constants live in
// TM-resident plan state; they are never written to UM.

#include <string>
#include <vector>

#include "oqp/schema.hpp"

namespace oqp {

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* cmp_op_name(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

struct AtomicCmp {
  std::string attr;
  CmpOp op = CmpOp::Eq;
  Value constant;

  // Comparisons involving Null yield false.
  bool eval(const Value& v) const {
    if (v.is_null() || constant.is_null()) return false;
    auto c = v <=> constant;
    switch (op) {
      case CmpOp::Eq: return c == 0;
      case CmpOp::Ne: return c != 0;
      case CmpOp::Lt: return c < 0;
      case CmpOp::Le: return c <= 0;
      case CmpOp::Gt: return c > 0;
      case CmpOp::Ge: return c >= 0;
    }
    return false;
  }
};

struct Predicate {
  std::vector<AtomicCmp> conjuncts;

  bool always_true() const { return conjuncts.empty(); }

  bool eval(const Schema& s, const Tuple& t) const {
    for (const auto& a : conjuncts)
      if (!a.eval(t[s.index_of(a.attr)])) return false;
    return true;
  }

  void check_attrs(const Schema& s) const {
    for (const auto& a : conjuncts) (void)s.index_of(a.attr);
  }
};

}  // namespace oqp
