#pragma once

#include <stdexcept>
#include <string>

namespace oqp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownAttribute : Error {
  explicit UnknownAttribute(const std::string& attr)
      : Error("unknown attribute: " + attr) {}
};

struct DomainMismatch : Error {
  using Error::Error;
};

struct OutOfBounds : Error {
  using Error::Error;
};

struct TmBudgetExceeded : Error {
  using Error::Error;
};

struct SizeMismatch : Error {
  using Error::Error;
};

struct StitchMismatch : Error {
  using Error::Error;
};

struct OverflowError : Error {
  using Error::Error;
};

struct NotPrefixHeavy : Error {
  using Error::Error;
};

// Raised when the reorder schedule fails its own prefix-heaviness check.
// Indicates a bug in the scheduler, not bad input.
struct InternalScheduleError : Error {
  using Error::Error;
};

struct CyclicJoinError : Error {
  using Error::Error;
};

struct UnsupportedGrouping : Error {
  using Error::Error;
};

struct FkViolation : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct GenerationTimeout : Error {
  using Error::Error;
};

struct AttributeCollision : Error {
  explicit AttributeCollision(const std::string& attr)
      : Error("attribute already present: " + attr) {}
};

// Checked 64-bit arithmetic. Degree products can overflow on adversarial
// inputs; we fail loudly instead of wrapping.
inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw OverflowError("int64 add overflow");
  return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("int64 mul overflow");
  return r;
}

}  // namespace oqp
