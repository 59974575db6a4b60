#include "stencilpipe/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stencilpipe {

FieldArray FieldArray::make(std::string name, DType dtype, Shape shape) {
  FieldArray a;
  a.name = std::move(name);
  a.dtype = dtype;
  a.shape = std::move(shape);
  std::int64_t n = volume(a.shape);
  Scalar zero = Scalar::of_int(dtype, 0);
  a.values.assign(static_cast<std::size_t>(n), zero);
  a.valid.assign(static_cast<std::size_t>(n), 1);
  return a;
}

// splitmix64; fixed algorithm so streams are identical everywhere.
static std::uint64_t next_u64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Scalar deterministic_random_value(DType t, std::uint64_t& state) {
  std::uint64_t u = next_u64(state);
  if (is_float(t)) {
    double v = static_cast<double>(u >> 11) * 0x1.0p-53;
    return Scalar::of_double(t, v);
  }
  return Scalar::of_int(t, static_cast<std::int64_t>(u % 100));
}

FieldMap materialize_inputs(const StencilProgram& program, std::int64_t seed_override,
                            const std::string& base_dir) {
  FieldMap out;
  for (const auto& f : program.inputs) {
    Shape shape = program.field_shape(f.name);
    DataSource src = f.data;
    if (seed_override >= 0 &&
        (src.kind == DataSource::Kind::Random || src.kind == DataSource::Kind::None)) {
      src.kind = DataSource::Kind::Random;
      src.seed = static_cast<std::uint64_t>(seed_override);
    }
    switch (src.kind) {
      case DataSource::Kind::None:
        throw ExecutionError("input \"" + f.name + "\" has no data source (use \"data\" or --seed)");
      case DataSource::Kind::File: {
        std::string path = src.path;
        if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
        out.emplace(f.name, read_raw(path, f.name, f.dtype, shape));
        break;
      }
      case DataSource::Kind::Constant: {
        FieldArray a = FieldArray::make(f.name, f.dtype, shape);
        Scalar v = Scalar::of_double(f.dtype, src.value);
        for (auto& x : a.values) x = v;
        out.emplace(f.name, std::move(a));
        break;
      }
      case DataSource::Kind::Random: {
        FieldArray a = FieldArray::make(f.name, f.dtype, shape);
        // Mix the field name into the seed so distinct inputs differ.
        std::uint64_t state = src.seed * 0x9e3779b97f4a7c15ull + 0x243f6a8885a308d3ull;
        for (char c : f.name) state = state * 131 + static_cast<unsigned char>(c);
        for (auto& x : a.values) x = deterministic_random_value(f.dtype, state);
        out.emplace(f.name, std::move(a));
        break;
      }
    }
  }
  return out;
}

FieldArray read_raw(const std::string& path, std::string name, DType dtype, Shape shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExecutionError("cannot open input file \"" + path + "\"");
  FieldArray a = FieldArray::make(std::move(name), dtype, std::move(shape));
  std::size_t width = dtype_bytes(dtype);
  std::vector<unsigned char> buf(width);
  for (auto& v : a.values) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(width));
    if (!in) throw ExecutionError("input file \"" + path + "\" is shorter than its declared shape");
    v = Scalar::from_bytes(dtype, buf.data());
  }
  return a;
}

void write_raw(const FieldArray& a, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExecutionError("cannot open output file \"" + path + "\"");
  std::size_t width = dtype_bytes(a.dtype);
  std::vector<unsigned char> buf(width);
  for (const auto& v : a.values) {
    v.to_bytes(buf.data());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(width));
  }
}

namespace {

bool bits_equal(const Scalar& a, const Scalar& b) {
  unsigned char ba[8] = {0}, bb[8] = {0};
  a.to_bytes(ba);
  b.to_bytes(bb);
  return std::memcmp(ba, bb, dtype_bytes(a.type)) == 0;
}

std::string index_string(std::int64_t flat, const Shape& shape) {
  std::int64_t coords[3] = {0, 0, 0};
  unflatten(flat, shape, coords);
  std::ostringstream os;
  os << "(";
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (d) os << ",";
    os << coords[d];
  }
  os << ")";
  return os.str();
}

}  // namespace

CompareReport compare_fields(const FieldArray& a, const FieldArray& b, CompareMode mode,
                             double eps) {
  if (a.shape != b.shape || a.dtype != b.dtype) {
    throw ExecutionError("compare: shape/dtype mismatch for \"" + a.name + "\"");
  }
  CompareReport r;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    bool va = a.valid[i], vb = b.valid[i];
    if (va != vb) {
      ++r.mask_mismatches;
      ++r.mismatches;
      if (r.first_detail.empty()) {
        r.first_detail = "mask differs at " + index_string(i, a.shape);
      }
      continue;
    }
    if (!va) continue;
    ++r.compared;
    bool ok;
    if (mode == CompareMode::BitExact) {
      ok = bits_equal(a.values[i], b.values[i]);
    } else {
      double x = a.values[i].as_double(), y = b.values[i].as_double();
      ok = std::abs(x - y) <= eps * std::max(std::abs(x), std::abs(y)) || x == y;
    }
    if (!ok) {
      ++r.mismatches;
      if (r.first_detail.empty()) {
        std::ostringstream os;
        os << "value differs at " << index_string(i, a.shape) << ": " << a.values[i].as_double()
           << " vs " << b.values[i].as_double();
        r.first_detail = os.str();
      }
    }
  }
  r.pass = r.mismatches == 0;
  return r;
}

}  // namespace stencilpipe
