#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stencilpipe/program.hpp"

namespace stencilpipe {

enum class NodeKind { MemoryReader, StencilUnit, MemoryWriter };

struct DataflowNode {
  NodeKind kind = NodeKind::StencilUnit;
  std::string id;
  std::string field;        // readers/writers: the field moved; units: the produced field
  int stencil_index = -1;   // units: index into DataflowGraph::program.nodes
  int device = 0;
};

struct RemoteAttrs {
  std::int64_t latency = 0;  // cycles
  double bandwidth = 1e30;   // elements/cycle per link
  int links = 1;
  double effective_bandwidth() const { return bandwidth * links; }
};

struct Channel {
  int producer = -1;  // node index
  int consumer = -1;
  std::string field;
  std::int64_t depth = 1;  // capacity in elements; >= minimum depth
  std::optional<RemoteAttrs> remote;
};

struct DataflowGraph {
  StencilProgram program;  // the (possibly transformed) program this graph lowers
  std::vector<DataflowNode> nodes;
  std::vector<Channel> channels;
  std::int64_t min_depth = 1;  // minimum hardware FIFO depth, elements

  const DataflowNode* find(const std::string& id) const;
  int index_of(const std::string& id) const;
  std::vector<int> in_channels(int node) const;
  std::vector<int> out_channels(int node) const;
  const StencilNode& stencil_of(int node) const;
};

/// Lower a validated program: one reader per consumed input field, one unit
/// per stencil, one writer per program output; a channel per
/// producer->consumer field dependency. Depths start at min_depth.
DataflowGraph build_graph(const StencilProgram& program, std::int64_t min_depth = 1);

/// Deterministic topological order (ready set resolved by id); producers
/// always precede consumers.
std::vector<int> topological_order(const DataflowGraph& graph);

/// GraphViz form: nodes labeled id/kind/device, edges labeled field and depth.
std::string to_dot(const DataflowGraph& graph);

/// Recover a StencilProgram from a (possibly transformed) graph. Inputs and
/// outputs are taken from readers and writers; stencil payloads from units.
StencilProgram program_from_graph(const DataflowGraph& graph);

}  // namespace stencilpipe
