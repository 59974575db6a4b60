#include "stencilpipe/types.hpp"

#include <cstring>

namespace stencilpipe {

bool is_float(DType t) { return t == DType::Float32 || t == DType::Float64; }

std::string dtype_name(DType t) {
  switch (t) {
    case DType::Float32: return "float32";
    case DType::Float64: return "float64";
    case DType::Int32: return "int32";
    case DType::Int64: return "int64";
  }
  return "?";
}

DType dtype_from_name(const std::string& name) {
  if (name == "float32") return DType::Float32;
  if (name == "float64") return DType::Float64;
  if (name == "int32") return DType::Int32;
  if (name == "int64") return DType::Int64;
  throw ProgramError("unknown dtype \"" + name + "\"");
}

std::size_t dtype_bytes(DType t) {
  switch (t) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    case DType::Int32: return 4;
    case DType::Int64: return 8;
  }
  return 0;
}

Scalar Scalar::of_double(DType t, double v) {
  Scalar s;
  s.type = t;
  switch (t) {
    case DType::Float32: s.f = static_cast<double>(static_cast<float>(v)); break;
    case DType::Float64: s.f = v; break;
    case DType::Int32: s.i = static_cast<std::int32_t>(static_cast<std::int64_t>(v)); break;
    case DType::Int64: s.i = static_cast<std::int64_t>(v); break;
  }
  return s;
}

Scalar Scalar::of_int(DType t, std::int64_t v) {
  Scalar s;
  s.type = t;
  switch (t) {
    case DType::Float32: s.f = static_cast<double>(static_cast<float>(v)); break;
    case DType::Float64: s.f = static_cast<double>(v); break;
    case DType::Int32: s.i = static_cast<std::int32_t>(v); break;
    case DType::Int64: s.i = v; break;
  }
  return s;
}

void Scalar::to_bytes(unsigned char* out) const {
  switch (type) {
    case DType::Float32: {
      float v = static_cast<float>(f);
      std::memcpy(out, &v, 4);
      break;
    }
    case DType::Float64: std::memcpy(out, &f, 8); break;
    case DType::Int32: {
      std::int32_t v = static_cast<std::int32_t>(i);
      std::memcpy(out, &v, 4);
      break;
    }
    case DType::Int64: std::memcpy(out, &i, 8); break;
  }
}

Scalar Scalar::from_bytes(DType t, const unsigned char* in) {
  Scalar s;
  s.type = t;
  switch (t) {
    case DType::Float32: {
      float v;
      std::memcpy(&v, in, 4);
      s.f = static_cast<double>(v);
      break;
    }
    case DType::Float64: std::memcpy(&s.f, in, 8); break;
    case DType::Int32: {
      std::int32_t v;
      std::memcpy(&v, in, 4);
      s.i = v;
      break;
    }
    case DType::Int64: std::memcpy(&s.i, in, 8); break;
  }
  return s;
}

namespace {

// Int32 arithmetic wraps; doing it in uint64 avoids signed overflow.
std::int64_t wrap(DType t, std::int64_t v) {
  if (t == DType::Int32) return static_cast<std::int32_t>(static_cast<std::uint64_t>(v));
  return v;
}

template <typename FloatOp, typename IntOp>
Scalar binop(Scalar a, Scalar b, FloatOp fop, IntOp iop) {
  Scalar r;
  r.type = a.type;
  if (is_float(a.type)) {
    if (a.type == DType::Float32) {
      r.f = static_cast<double>(fop(static_cast<float>(a.f), static_cast<float>(b.f)));
    } else {
      r.f = fop(a.f, b.f);
    }
  } else {
    r.i = wrap(a.type, iop(a.i, b.i));
  }
  return r;
}

}  // namespace

Scalar scalar_add(Scalar a, Scalar b) {
  return binop(a, b, [](auto x, auto y) { return x + y; },
               [](std::int64_t x, std::int64_t y) {
                 return static_cast<std::int64_t>(static_cast<std::uint64_t>(x) + static_cast<std::uint64_t>(y));
               });
}

Scalar scalar_sub(Scalar a, Scalar b) {
  return binop(a, b, [](auto x, auto y) { return x - y; },
               [](std::int64_t x, std::int64_t y) {
                 return static_cast<std::int64_t>(static_cast<std::uint64_t>(x) - static_cast<std::uint64_t>(y));
               });
}

Scalar scalar_mul(Scalar a, Scalar b) {
  return binop(a, b, [](auto x, auto y) { return x * y; },
               [](std::int64_t x, std::int64_t y) {
                 return static_cast<std::int64_t>(static_cast<std::uint64_t>(x) * static_cast<std::uint64_t>(y));
               });
}

Scalar scalar_div(Scalar a, Scalar b) {
  if (!is_float(a.type) && b.i == 0) {
    throw ExecutionError("integer division by zero");
  }
  return binop(a, b, [](auto x, auto y) { return x / y; },
               [](std::int64_t x, std::int64_t y) { return x / y; });
}

Scalar scalar_neg(Scalar a) { return scalar_sub(Scalar::of_int(a.type, 0), a); }

Scalar scalar_min(Scalar a, Scalar b) {
  return binop(a, b, [](auto x, auto y) { return x < y ? x : y; },
               [](std::int64_t x, std::int64_t y) { return x < y ? x : y; });
}

Scalar scalar_max(Scalar a, Scalar b) {
  return binop(a, b, [](auto x, auto y) { return x > y ? x : y; },
               [](std::int64_t x, std::int64_t y) { return x > y ? x : y; });
}

Scalar scalar_abs(Scalar a) {
  Scalar r = a;
  if (is_float(a.type)) {
    r.f = a.type == DType::Float32
              ? static_cast<double>(std::fabs(static_cast<float>(a.f)))
              : std::fabs(a.f);
  } else {
    r.i = wrap(a.type, a.i < 0 ? -a.i : a.i);
  }
  return r;
}

Scalar scalar_pow(Scalar a, Scalar b) {
  if (!is_float(a.type)) throw ExecutionError("pow requires a floating dtype");
  Scalar r;
  r.type = a.type;
  r.f = a.type == DType::Float32
            ? static_cast<double>(std::pow(static_cast<float>(a.f), static_cast<float>(b.f)))
            : std::pow(a.f, b.f);
  return r;
}

namespace {
template <typename Op>
Scalar unary_float(Scalar a, const char* name, Op op) {
  if (!is_float(a.type)) throw ExecutionError(std::string(name) + " requires a floating dtype");
  Scalar r;
  r.type = a.type;
  r.f = a.type == DType::Float32 ? static_cast<double>(op(static_cast<float>(a.f))) : op(a.f);
  return r;
}
}  // namespace

Scalar scalar_sqrt(Scalar a) {
  return unary_float(a, "sqrt", [](auto x) { return std::sqrt(x); });
}
Scalar scalar_exp(Scalar a) {
  return unary_float(a, "exp", [](auto x) { return std::exp(x); });
}
Scalar scalar_log(Scalar a) {
  return unary_float(a, "log", [](auto x) { return std::log(x); });
}

bool scalar_compare(int cmp, Scalar a, Scalar b) {
  auto c = [&](auto x, auto y) {
    switch (cmp) {
      case 0: return x < y;
      case 1: return x <= y;
      case 2: return x > y;
      case 3: return x >= y;
      case 4: return x == y;
      default: return x != y;
    }
  };
  if (is_float(a.type)) {
    if (a.type == DType::Float32) return c(static_cast<float>(a.f), static_cast<float>(b.f));
    return c(a.f, b.f);
  }
  return c(a.i, b.i);
}

Scalar invalid_sentinel(DType t) {
  Scalar s;
  s.type = t;
  if (is_float(t)) {
    s.f = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.i = 0;
  }
  return s;
}

std::int64_t volume(const Shape& s) {
  std::int64_t v = 1;
  for (auto e : s) v *= e;
  return v;
}

std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int d = static_cast<int>(s.size()) - 2; d >= 0; --d) st[d] = st[d + 1] * s[d + 1];
  return st;
}

void unflatten(std::int64_t flat, const Shape& shape, std::int64_t* coords) {
  for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
    coords[d] = flat % shape[d];
    flat /= shape[d];
  }
}

}  // namespace stencilpipe
