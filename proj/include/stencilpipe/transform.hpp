#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "stencilpipe/graph.hpp"

namespace stencilpipe {

/// A producer/consumer pair joined by one intermediate field `via` that can
/// be collapsed into a single stencil.
struct FusionCandidate {
  std::string producer;
  std::string consumer;
  std::string via;
};

/// All fusable pairs, in topological-then-lexicographic producer order.
/// Conditions: `via` has exactly one consumer and is not a program output;
/// the two nodes' boundary definitions are identical; and the substitution
/// preserves boundary geometry (consumer reads `via` only at the center,
/// or both nodes shrink and the producer's per-dimension offset span
/// touches zero on both sides).
std::vector<FusionCandidate> find_fusion_candidates(const DataflowGraph& graph);

/// Collapse the candidate: the consumer's accesses to `via` are replaced by
/// the producer's expression with all its accesses shifted by the access
/// offset; duplicate subtrees are shared so common work is evaluated once.
/// Returns a freshly lowered graph; the input graph is unchanged.
DataflowGraph fuse(const DataflowGraph& graph, const FusionCandidate& candidate);

/// Fuse to fixpoint, always taking the first candidate in order.
DataflowGraph fuse_all(const DataflowGraph& graph);

struct DevicePlan {
  std::map<std::string, int> assignment;            // stencil id -> device
  std::map<std::string, std::set<int>> replicated_inputs;  // field -> devices (when >1)
  std::vector<std::string> remote_channels;         // "producer->consumer"
};

struct PartitionResult {
  DataflowGraph graph;
  DevicePlan plan;
};

/// Assign stencils to devices and rebuild the graph: one reader per
/// (input field, device) that consumes it, cross-device channels marked
/// remote with the given parameters. Without an explicit assignment, a
/// greedy topological-prefix cut balances AST op count across `count`
/// devices. The quotient graph over devices must be acyclic.
PartitionResult partition(const DataflowGraph& graph, const DeviceSpec& spec);

/// Static cost used by the greedy cut: number of unique operation nodes in
/// the stencil's expression.
std::int64_t node_cost(const StencilNode& node);

}  // namespace stencilpipe
