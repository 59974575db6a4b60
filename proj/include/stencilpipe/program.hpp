#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stencilpipe/expr.hpp"
#include "stencilpipe/types.hpp"

namespace stencilpipe {

/// Where an input field's data comes from when the program is executed.
struct DataSource {
  enum class Kind { None, File, Constant, Random } kind = Kind::None;
  std::string path;       // File
  double value = 0.0;     // Constant
  std::uint64_t seed = 0; // Random
};

struct FieldSpec {
  std::string name;
  DType dtype = DType::Float32;
  std::vector<std::string> dims;  // ordered subsequence of the program dims
  DataSource data;
};

struct BoundaryCondition {
  enum class Kind { Constant, Copy } kind = Kind::Constant;
  double value = 0.0;  // Constant only
};

struct StencilNode {
  std::string name;  // also the name of the produced field
  std::string code;  // original source text (kept for serialization)
  ExprPtr expression;
  // Per-input conditions; empty when the node shrinks instead.
  std::map<std::string, BoundaryCondition> input_conditions;
  bool shrink = false;
};

struct RemoteChannelConfig {
  std::int64_t latency = 0;        // cycles
  double bandwidth = 1e30;         // elements/cycle per link
  int links = 1;
};

/// Optional multi-device request carried in the program file.
struct DeviceSpec {
  int count = 1;
  std::map<std::string, int> assignment;  // stencil name -> device
  RemoteChannelConfig remote;
};

struct StencilProgram {
  std::vector<std::string> dim_names;
  Shape shape;
  std::vector<FieldSpec> inputs;
  std::vector<std::string> outputs;
  std::vector<StencilNode> nodes;
  std::int64_t vectorization = 1;
  std::optional<DeviceSpec> devices;

  const FieldSpec* find_input(const std::string& name) const;
  const StencilNode* find_node(const std::string& name) const;
  /// Global dim indices of a field's declared dims (inputs and node outputs;
  /// node outputs are full rank).
  std::vector<int> field_dim_indices(const std::string& field) const;
  /// Extents of a field over its own dims.
  Shape field_shape(const std::string& field) const;
  DType field_dtype(const std::string& field) const;
  bool is_input(const std::string& field) const;
  std::int64_t iterations() const { return volume(shape) / vectorization; }
};

/// Parse the JSON program description. Throws ProgramError with a
/// position-annotated message on malformed documents.
StencilProgram parse_program(const std::string& json_text);

/// Structural and semantic checks: acyclicity, single producer per field,
/// dtype consistency, boundary-condition coverage, vectorization
/// divisibility. Returns its argument on success.
const StencilProgram& validate_program(const StencilProgram& program);

/// Canonical JSON form; parse_program(serialize_program(p)) round-trips.
std::string serialize_program(const StencilProgram& program);

/// Set the vectorization factor (errors unless it divides the innermost
/// extent). Downstream analysis picks the factor up from the program.
StencilProgram apply_vectorization(StencilProgram program, std::int64_t width);

}  // namespace stencilpipe
