#pragma once

#include <map>
#include <string>
#include <vector>

#include "stencilpipe/program.hpp"
#include "stencilpipe/types.hpp"

namespace stencilpipe {

/// A materialized field with a per-cell validity mask. Values on invalid
/// cells hold the dtype's sentinel.
struct FieldArray {
  std::string name;
  DType dtype = DType::Float32;
  Shape shape;  // the field's own dims
  std::vector<Scalar> values;
  std::vector<std::uint8_t> valid;

  static FieldArray make(std::string name, DType dtype, Shape shape);
  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

using FieldMap = std::map<std::string, FieldArray>;

/// Instantiate every program input from its declared data source.
/// `seed_override`, when nonnegative, replaces the seed of every random
/// source (and turns sourceless inputs into random ones).
FieldMap materialize_inputs(const StencilProgram& program, std::int64_t seed_override = -1,
                            const std::string& base_dir = "");

/// Raw little-endian row-major file I/O (element width per dtype).
FieldArray read_raw(const std::string& path, std::string name, DType dtype, Shape shape);
void write_raw(const FieldArray& a, const std::string& path);

/// Deterministic value streams (fixed across platforms): floats uniform in
/// [0,1), integers uniform in [0,100).
Scalar deterministic_random_value(DType t, std::uint64_t& state);

struct CompareReport {
  bool pass = false;
  std::int64_t mismatches = 0;
  std::int64_t mask_mismatches = 0;
  std::int64_t compared = 0;
  std::string first_detail;  // human-readable description of the first mismatch
};

enum class CompareMode { BitExact, Relative };

/// BitExact requires identical masks and bitwise-equal values on valid
/// cells; Relative allows |a-b| <= eps*max(|a|,|b|) on mutually valid cells
/// (mask differences still count as mismatches).
CompareReport compare_fields(const FieldArray& a, const FieldArray& b, CompareMode mode,
                             double eps = 0.0);

}  // namespace stencilpipe
