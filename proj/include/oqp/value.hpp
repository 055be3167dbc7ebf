#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <variant>

#include "oqp/errors.hpp"

namespace oqp {

// Tagged scalar. Total order: Null < any Int < any Str; Ints numerically,
// Strs lexicographically by bytes. Null == Null.
class Value {
 public:
  enum class Kind : std::uint8_t { Null = 0, Int = 1, Str = 2 };

  Value() : v_(std::monostate{}) {}
  static Value null() { return Value(); }
  Value(std::int64_t i) : v_(i) {}  // NOLINT: implicit by design
  Value(int i) : v_(std::int64_t(i)) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  bool is_int() const { return kind() == Kind::Int; }
  bool is_str() const { return kind() == Kind::Str; }

  std::int64_t as_int() const {
    if (!is_int()) throw DomainMismatch("value is not an Int");
    return std::get<std::int64_t>(v_);
  }
  const std::string& as_str() const {
    if (!is_str()) throw DomainMismatch("value is not a Str");
    return std::get<std::string>(v_);
  }

  friend std::strong_ordering operator<=>(const Value& a, const Value& b) {
    if (auto c = a.kind() <=> b.kind(); c != 0) return c;
    switch (a.kind()) {
      case Kind::Null:
        return std::strong_ordering::equal;
      case Kind::Int:
        return std::get<std::int64_t>(a.v_) <=> std::get<std::int64_t>(b.v_);
      case Kind::Str:
        return std::get<std::string>(a.v_).compare(std::get<std::string>(b.v_)) <=> 0;
    }
    return std::strong_ordering::equal;
  }
  friend bool operator==(const Value& a, const Value& b) {
    return (a <=> b) == 0;
  }

  std::string to_string() const {
    switch (kind()) {
      case Kind::Null:
        return "NULL";
      case Kind::Int:
        return std::to_string(std::get<std::int64_t>(v_));
      case Kind::Str:
        return std::get<std::string>(v_);
    }
    return {};
  }

 private:
  std::variant<std::monostate, std::int64_t, std::string> v_;
};

enum class Domain : std::uint8_t { Int, Str };

inline const char* domain_name(Domain d) {
  return d == Domain::Int ? "int" : "str";
}

}  // namespace oqp
