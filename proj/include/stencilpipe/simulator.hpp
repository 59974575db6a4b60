#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stencilpipe/analysis.hpp"
#include "stencilpipe/field.hpp"
#include "stencilpipe/graph.hpp"

namespace stencilpipe {

struct ChannelStats {
  std::int64_t max_occupancy = 0;  // elements, including in-flight on remote links
  std::int64_t push_stalls = 0;    // cycles the producer wanted to push and could not
  std::int64_t pop_stalls = 0;     // cycles the consumer wanted to pop and could not
  std::int64_t pushed = 0;         // elements
  std::int64_t popped = 0;         // elements
};

struct WaitFor {
  std::string node;
  std::string channel;   // "producer->consumer"
  bool waiting_not_empty = false;  // else waiting on space (not full)
};

enum class SimOutcome { Completed, Deadlock, LimitExceeded };

struct SimulationResult {
  SimOutcome outcome = SimOutcome::Completed;
  std::int64_t total_cycles = 0;  // cycle index of completion; first push is cycle 0
  std::vector<ChannelStats> channels;  // parallel to graph.channels
  std::vector<WaitFor> witness;        // deadlock only: a cycle in the wait-for relation
  FieldMap outputs;
};

struct SimOptions {
  std::int64_t limit = -1;     // max cycles; < 0 picks a generous default
  std::string trace_path;      // per-cycle channel occupancy CSV
};

/// Cycle-stepped execution with bounded channels, registered pushes
/// (a push issued in cycle t is poppable in t+1), per-unit compute latency
/// pipes, and remote-channel latency/bandwidth. Channel depths are taken
/// from the graph; run apply_depths(analyze(...)) first.
SimulationResult simulate(const DataflowGraph& graph, const BufferReport& report,
                          const FieldMap& inputs, const SimOptions& options = {});

std::string simulation_to_json(const DataflowGraph& graph, const SimulationResult& result);

}  // namespace stencilpipe
