#pragma once

#include "stencilpipe/field.hpp"
#include "stencilpipe/program.hpp"

namespace stencilpipe {

/// Sequential reference execution: stencils run one at a time in
/// topological order, each fully materializing its output before any
/// consumer reads it. Per-cell semantics are shared with the simulator.
/// Returns the program outputs (with validity masks).
FieldMap interpret(const StencilProgram& program, const FieldMap& inputs);

/// Like interpret, but returns every intermediate field as well.
FieldMap interpret_all(const StencilProgram& program, const FieldMap& inputs);

}  // namespace stencilpipe
