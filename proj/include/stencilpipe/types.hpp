#pragma once

#include <cstdint>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace stencilpipe {

enum class DType { Float32, Float64, Int32, Int64 };

bool is_float(DType t);
std::string dtype_name(DType t);
DType dtype_from_name(const std::string& name);
std::size_t dtype_bytes(DType t);

/// Raised for malformed programs (JSON schema, expression syntax, or
/// semantic validation). `what()` carries the position/context.
class ProgramError : public std::runtime_error {
public:
  explicit ProgramError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised during execution (interpreter or simulator), e.g. integer
/// division by zero or mismatched input arrays.
class ExecutionError : public std::runtime_error {
public:
  explicit ExecutionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A scalar tagged with its element type. Float32 values are kept rounded to
// float precision after every operation; Int32 wraps modulo 2^32.
struct Scalar {
  DType type = DType::Float32;
  union {
    double f;
    std::int64_t i;
  };

  Scalar() : f(0.0) {}
  static Scalar of_double(DType t, double v);
  static Scalar of_int(DType t, std::int64_t v);

  double as_double() const { return is_float(type) ? f : static_cast<double>(i); }
  std::int64_t as_int() const { return is_float(type) ? static_cast<std::int64_t>(f) : i; }

  /// Raw little-endian bytes in the dtype's storage width (for file I/O and
  /// bitwise comparison).
  void to_bytes(unsigned char* out) const;
  static Scalar from_bytes(DType t, const unsigned char* in);
};

Scalar scalar_add(Scalar a, Scalar b);
Scalar scalar_sub(Scalar a, Scalar b);
Scalar scalar_mul(Scalar a, Scalar b);
Scalar scalar_div(Scalar a, Scalar b);
Scalar scalar_neg(Scalar a);
Scalar scalar_min(Scalar a, Scalar b);
Scalar scalar_max(Scalar a, Scalar b);
Scalar scalar_abs(Scalar a);
Scalar scalar_pow(Scalar a, Scalar b);
Scalar scalar_sqrt(Scalar a);
Scalar scalar_exp(Scalar a);
Scalar scalar_log(Scalar a);
bool scalar_compare(int cmp, Scalar a, Scalar b);  // cmp: see CmpKind in expr.hpp

/// Sentinel stored in cells dropped by a shrink boundary: quiet NaN for
/// floats, 0 for integers.
Scalar invalid_sentinel(DType t);

// Row-major shapes, last-listed dimension fastest varying.
using Shape = std::vector<std::int64_t>;

std::int64_t volume(const Shape& s);
std::vector<std::int64_t> strides_of(const Shape& s);

/// Decompose a flat row-major index into per-dimension coordinates.
void unflatten(std::int64_t flat, const Shape& shape, std::int64_t* coords);

}  // namespace stencilpipe
