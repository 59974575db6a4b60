#include "stencilpipe/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

namespace stencilpipe {

const DataflowNode* DataflowGraph::find(const std::string& id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

int DataflowGraph::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> DataflowGraph::in_channels(int node) const {
  std::vector<int> out;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].consumer == node) out.push_back(static_cast<int>(c));
  }
  return out;
}

std::vector<int> DataflowGraph::out_channels(int node) const {
  std::vector<int> out;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].producer == node) out.push_back(static_cast<int>(c));
  }
  return out;
}

const StencilNode& DataflowGraph::stencil_of(int node) const {
  return program.nodes[static_cast<std::size_t>(nodes[static_cast<std::size_t>(node)].stencil_index)];
}

DataflowGraph build_graph(const StencilProgram& program, std::int64_t min_depth) {
  DataflowGraph g;
  g.program = program;
  g.min_depth = min_depth;

  // Which input fields are actually consumed.
  std::set<std::string> consumed_inputs;
  for (const auto& n : program.nodes) {
    for (const Expr* a : collect_accesses(n.expression)) {
      if (program.is_input(a->field)) consumed_inputs.insert(a->field);
    }
  }

  std::map<std::string, int> producer_of;  // field -> node index
  for (const auto& f : program.inputs) {
    if (!consumed_inputs.count(f.name)) continue;
    DataflowNode n;
    n.kind = NodeKind::MemoryReader;
    n.id = "read_" + f.name;
    n.field = f.name;
    producer_of[f.name] = static_cast<int>(g.nodes.size());
    g.nodes.push_back(n);
  }
  for (std::size_t i = 0; i < program.nodes.size(); ++i) {
    DataflowNode n;
    n.kind = NodeKind::StencilUnit;
    n.id = program.nodes[i].name;
    n.field = program.nodes[i].name;
    n.stencil_index = static_cast<int>(i);
    producer_of[n.field] = static_cast<int>(g.nodes.size());
    g.nodes.push_back(n);
  }

  for (std::size_t i = 0; i < program.nodes.size(); ++i) {
    const StencilNode& sn = program.nodes[i];
    int unit = g.index_of(sn.name);
    std::set<std::string> fields;
    for (const Expr* a : collect_accesses(sn.expression)) fields.insert(a->field);
    for (const auto& f : fields) {
      Channel c;
      c.producer = producer_of.at(f);
      c.consumer = unit;
      c.field = f;
      c.depth = min_depth;
      g.channels.push_back(c);
    }
  }

  for (const auto& out : program.outputs) {
    DataflowNode n;
    n.kind = NodeKind::MemoryWriter;
    n.id = "write_" + out;
    n.field = out;
    int writer = static_cast<int>(g.nodes.size());
    g.nodes.push_back(n);
    Channel c;
    c.producer = producer_of.at(out);
    c.consumer = writer;
    c.field = out;
    c.depth = min_depth;
    g.channels.push_back(c);
  }

  return g;
}

std::vector<int> topological_order(const DataflowGraph& g) {
  std::vector<int> indegree(g.nodes.size(), 0);
  for (const auto& c : g.channels) ++indegree[static_cast<std::size_t>(c.consumer)];

  // Ready set ordered readers-first, then by node id.
  auto rank = [&](int n) {
    const DataflowNode& node = g.nodes[static_cast<std::size_t>(n)];
    int k = node.kind == NodeKind::MemoryReader ? 0 : node.kind == NodeKind::StencilUnit ? 1 : 2;
    return std::make_pair(k, node.id);
  };
  auto cmp = [&](int a, int b) { return rank(a) > rank(b); };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (indegree[i] == 0) ready.push(static_cast<int>(i));
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int n = ready.top();
    ready.pop();
    order.push_back(n);
    for (const auto& c : g.channels) {
      if (c.producer == n && --indegree[static_cast<std::size_t>(c.consumer)] == 0) {
        ready.push(c.consumer);
      }
    }
  }
  if (order.size() != g.nodes.size()) {
    throw ProgramError("dataflow graph contains a cycle");
  }
  return order;
}

std::string to_dot(const DataflowGraph& g) {
  std::ostringstream os;
  os << "digraph dataflow {\n  rankdir=LR;\n";
  for (const auto& n : g.nodes) {
    const char* kind = n.kind == NodeKind::MemoryReader   ? "reader"
                       : n.kind == NodeKind::MemoryWriter ? "writer"
                                                          : "stencil";
    const char* shape = n.kind == NodeKind::StencilUnit ? "box" : "ellipse";
    os << "  \"" << n.id << "\" [shape=" << shape << ", label=\"" << n.id << "\\n"
       << kind << " dev" << n.device << "\"];\n";
  }
  for (const auto& c : g.channels) {
    os << "  \"" << g.nodes[static_cast<std::size_t>(c.producer)].id << "\" -> \""
       << g.nodes[static_cast<std::size_t>(c.consumer)].id << "\" [label=\"" << c.field << " ("
       << c.depth << ")";
    if (c.remote) os << " remote+" << c.remote->latency;
    os << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

StencilProgram program_from_graph(const DataflowGraph& g) {
  StencilProgram p;
  p.dim_names = g.program.dim_names;
  p.shape = g.program.shape;
  p.vectorization = g.program.vectorization;
  p.devices = g.program.devices;
  p.outputs = g.program.outputs;
  // Inputs: keep declarations for every input field still consumed.
  std::set<std::string> consumed;
  for (const auto& c : g.channels) consumed.insert(c.field);
  for (const auto& f : g.program.inputs) {
    if (consumed.count(f.name)) p.inputs.push_back(f);
  }
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::StencilUnit) {
      p.nodes.push_back(g.program.nodes[static_cast<std::size_t>(n.stencil_index)]);
    }
  }
  // Deterministic node order by name.
  std::sort(p.nodes.begin(), p.nodes.end(),
            [](const StencilNode& a, const StencilNode& b) { return a.name < b.name; });
  return p;
}

}  // namespace stencilpipe
