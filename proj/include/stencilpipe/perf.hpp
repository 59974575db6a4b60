#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "stencilpipe/analysis.hpp"
#include "stencilpipe/graph.hpp"

namespace stencilpipe {

/// C = L + I*N with I fixed at one vector per cycle. L excludes the
/// per-node handoff register (the simulator runs at most one extra cycle
/// per stencil above C).
struct CyclePrediction {
  std::int64_t pipeline_latency = 0;   // L, cycles
  std::int64_t iterations = 0;         // N = volume(shape) / W
  std::int64_t initiation_interval = 1;
  std::int64_t cycles = 0;             // C = L + N
  std::optional<double> seconds;       // C / f when a frequency is given
};

CyclePrediction predict_cycles(const DataflowGraph& graph, const BufferReport& report,
                               std::optional<double> frequency_hz = std::nullopt);

struct ProgramCounts {
  std::map<std::string, std::int64_t> ops;  // per iteration point, by kind
  std::int64_t branches = 0;                // ternaries
  // Unique memory traffic under perfect reuse: every input read once,
  // every output written once.
  std::map<int, std::int64_t> reads_by_rank;   // rank -> field count
  std::map<int, std::int64_t> writes_by_rank;
  std::int64_t read_elements = 0;
  std::int64_t write_elements = 0;

  /// Arithmetic ops per point (add/sub/mul/div/sqrt/exp/log/pow); min/max,
  /// abs, comparisons and selects are tallied but not counted here.
  std::int64_t arithmetic_per_point() const;
  std::int64_t total_arithmetic(std::int64_t points) const {
    return arithmetic_per_point() * points;
  }
};

ProgramCounts count_program(const StencilProgram& program);

struct RooflineResult {
  std::int64_t ops_num = 0, ops_den = 1;      // ops/operand, reduced fraction
  std::int64_t byte_num = 0, byte_den = 1;    // ops/byte, reduced fraction
  double ops_per_operand = 0.0;
  double ops_per_byte = 0.0;
  std::optional<double> bound_gops;           // ops_per_byte * bandwidth
  std::optional<double> required_bandwidth;   // rate / ops_per_byte
};

/// Arithmetic-intensity roofline from explicit totals.
RooflineResult roofline(std::int64_t total_ops, std::int64_t total_operands,
                        std::int64_t bytes_per_operand, std::optional<double> bandwidth_gbs,
                        std::optional<double> target_rate_gops);

std::string prediction_to_json(const CyclePrediction& p);
std::string counts_to_json(const ProgramCounts& c, const StencilProgram& program);
std::string roofline_to_json(const RooflineResult& r);

}  // namespace stencilpipe
