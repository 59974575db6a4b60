#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stencilpipe/expr.hpp"
#include "stencilpipe/graph.hpp"
#include "stencilpipe/program.hpp"

namespace stencilpipe {

/// Per-operation pipeline latencies in cycles; `fallback` covers anything
/// without an explicit entry.
struct LatencyConfig {
  std::map<std::string, std::int64_t> cycles;
  std::int64_t fallback = 40;

  std::int64_t get(const std::string& op) const;
  static LatencyConfig from_json_text(const std::string& text);
  static LatencyConfig zero();
};

/// One field's reuse window inside a stencil unit.
struct InternalBuffer {
  std::string field;
  std::int64_t size = 0;            // elements: (max - min flattened offset) + W
  std::vector<std::int64_t> taps;   // flattened offsets into the window, in [0, size)
  // Center-extended stream window (what timing analysis and the simulator
  // use): covers [span_lo, span_hi] around the current element, in flattened
  // iteration-space elements. Equal to the reported size whenever the
  // offsets touch or straddle zero.
  std::int64_t span_lo = 0;  // <= 0
  std::int64_t span_hi = 0;  // >= 0
  bool center_only = false;  // single access at offset zero: no buffer
  std::int64_t timing_size(std::int64_t w) const { return span_hi - span_lo + w; }
};

struct NodeAnalysis {
  std::map<std::string, InternalBuffer> buffers;
  std::int64_t init_iterations = 0;  // vector iterations before first output
  std::map<std::string, std::int64_t> fill_start;  // per field, vector iterations
  std::int64_t latency = 0;  // AST critical path, cycles
};

struct ChannelAnalysis {
  std::int64_t depth = 0;        // elements
  std::int64_t delay_cycles = 0; // path-delay metric value for this edge
};

struct BufferReport {
  std::map<std::string, NodeAnalysis> nodes;        // by unit id
  std::vector<ChannelAnalysis> channels;            // parallel to graph.channels
  std::int64_t total_fast_memory = 0;               // elements
  std::int64_t vector_width = 1;
};

/// Row-major flattening of a per-dimension offset vector; lower-rank fields
/// flatten over their own declared extents (last dim fastest).
std::int64_t flatten_offset(const std::vector<std::int64_t>& offsets, const Shape& shape,
                            const std::vector<int>& field_dim_indices);

/// Window needed to hold all live taps of one field:
/// size = max(flat) - min(flat) + W, taps relative to the lowest offset.
/// A single access degenerates to size W with tap 0.
InternalBuffer internal_buffer_size(const std::string& field,
                                    const std::vector<std::vector<std::int64_t>>& offsets,
                                    const StencilProgram& program, std::int64_t w);

/// Buffers + initialization phase + fill-start schedule for one stencil.
NodeAnalysis analyze_node(const StencilNode& node, const StencilProgram& program,
                          const LatencyConfig& latencies);

/// Vector iterations a node consumes before its first output (0 when every
/// field is read only at its center).
std::int64_t initialization_phase(const NodeAnalysis& node, std::int64_t w);

/// Longest weighted root-to-leaf path; accesses and literals weigh 0,
/// ternaries weigh compare + select + deepest child.
std::int64_t ast_latency(const ExprPtr& expression, const LatencyConfig& latencies);

/// Full analysis: per-node buffers/phases/latencies and per-channel depths.
/// Depth rule: for each node, every incoming edge's path delay is compared
/// against the slowest incoming path, and the difference (in vector
/// iterations, converted to elements) plus the minimum depth becomes the
/// channel capacity. Remote channels additionally absorb their own latency
/// so they can stream at full rate.
BufferReport analyze(const DataflowGraph& graph, const LatencyConfig& latencies);

/// Write the analyzed depths back onto the graph's channels.
void apply_depths(DataflowGraph& graph, const BufferReport& report);

std::string report_to_json(const DataflowGraph& graph, const BufferReport& report);

}  // namespace stencilpipe
