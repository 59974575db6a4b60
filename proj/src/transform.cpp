#include "stencilpipe/transform.hpp"

#include <algorithm>
#include <functional>

namespace stencilpipe {

namespace {

bool boundary_definitions_match(const StencilNode& a, const StencilNode& b) {
  if (a.shrink != b.shrink) return false;
  if (a.shrink) return true;
  for (const auto& [field, cond] : a.input_conditions) {
    auto it = b.input_conditions.find(field);
    if (it == b.input_conditions.end()) continue;
    if (it->second.kind != cond.kind || it->second.value != cond.value) return false;
  }
  return true;
}

// Per-dimension offset envelope over every access of a node, with missing
// dims of lower-rank fields counting as zero.
void offset_envelope(const StencilNode& node, const StencilProgram& program,
                     std::vector<std::int64_t>& lo, std::vector<std::int64_t>& hi) {
  std::size_t rank = program.shape.size();
  lo.assign(rank, 0);
  hi.assign(rank, 0);
  for (const Expr* a : collect_accesses(node.expression)) {
    std::vector<int> idx = program.field_dim_indices(a->field);
    for (std::size_t d = 0; d < a->offsets.size(); ++d) {
      lo[static_cast<std::size_t>(idx[d])] =
          std::min(lo[static_cast<std::size_t>(idx[d])], a->offsets[d]);
      hi[static_cast<std::size_t>(idx[d])] =
          std::max(hi[static_cast<std::size_t>(idx[d])], a->offsets[d]);
    }
  }
}

// Substitution changes boundary behavior unless the consumer reads the
// intermediate at the center only, or both nodes shrink and the producer's
// reach covers both sides of zero in every dimension (so the invalid-mask
// geometry composes exactly).
bool substitution_is_safe(const StencilNode& producer, const StencilNode& consumer,
                          const std::string& via, const StencilProgram& program) {
  bool all_center = true;
  for (const Expr* a : collect_accesses(consumer.expression)) {
    if (a->field != via) continue;
    for (auto o : a->offsets) all_center = all_center && o == 0;
  }
  if (all_center) return true;
  if (!producer.shrink || !consumer.shrink) return false;
  std::vector<std::int64_t> lo, hi;
  offset_envelope(producer, program, lo, hi);
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (lo[d] > 0 || hi[d] < 0) return false;
  }
  return true;
}

}  // namespace

std::vector<FusionCandidate> find_fusion_candidates(const DataflowGraph& graph) {
  std::vector<FusionCandidate> out;
  for (int ni : topological_order(graph)) {
    const DataflowNode& n = graph.nodes[static_cast<std::size_t>(ni)];
    if (n.kind != NodeKind::StencilUnit) continue;
    std::vector<int> outs = graph.out_channels(ni);
    if (outs.size() != 1) continue;  // deg(via) != 2: fanned out or dangling
    const Channel& ch = graph.channels[static_cast<std::size_t>(outs[0])];
    const DataflowNode& consumer = graph.nodes[static_cast<std::size_t>(ch.consumer)];
    if (consumer.kind != NodeKind::StencilUnit) continue;  // feeds memory: via is an output
    const StencilNode& p = graph.stencil_of(ni);
    const StencilNode& c = graph.stencil_of(ch.consumer);
    if (!boundary_definitions_match(p, c)) continue;
    if (!substitution_is_safe(p, c, n.field, graph.program)) continue;
    out.push_back({n.id, consumer.id, n.field});
  }
  return out;
}

DataflowGraph fuse(const DataflowGraph& graph, const FusionCandidate& candidate) {
  const StencilProgram& prog = graph.program;
  const StencilNode* producer = prog.find_node(candidate.producer);
  const StencilNode* consumer = prog.find_node(candidate.consumer);
  if (!producer || !consumer) throw ProgramError("stale fusion candidate");
  bool still_valid = false;
  for (const auto& c : find_fusion_candidates(graph)) {
    still_valid = still_valid || (c.producer == candidate.producer &&
                                  c.consumer == candidate.consumer && c.via == candidate.via);
  }
  if (!still_valid) throw ProgramError("stale fusion candidate");

  auto dim_index_of = [&prog](const std::string& field) { return prog.field_dim_indices(field); };

  StencilNode fused;
  fused.name = consumer->name;
  fused.shrink = consumer->shrink;
  fused.expression =
      substitute_field(consumer->expression, candidate.via, [&](const Expr& access) {
        // via is a stencil output, so its offsets span the full rank.
        return shift_accesses(producer->expression, access.offsets, dim_index_of);
      });
  fused.code = print_expression(fused.expression);
  if (!fused.shrink) {
    fused.input_conditions = consumer->input_conditions;
    fused.input_conditions.erase(candidate.via);
    for (const auto& [field, cond] : producer->input_conditions) {
      fused.input_conditions.emplace(field, cond);
    }
  }

  StencilProgram next = prog;
  next.nodes.clear();
  for (const auto& n : prog.nodes) {
    if (n.name == candidate.producer) continue;
    if (n.name == candidate.consumer) {
      next.nodes.push_back(fused);
    } else {
      next.nodes.push_back(n);
    }
  }
  validate_program(next);
  return build_graph(next, graph.min_depth);
}

DataflowGraph fuse_all(const DataflowGraph& graph) {
  DataflowGraph g = graph;
  while (true) {
    std::vector<FusionCandidate> candidates = find_fusion_candidates(g);
    if (candidates.empty()) return g;
    g = fuse(g, candidates.front());
  }
}

std::int64_t node_cost(const StencilNode& node) {
  std::int64_t cost = 0;
  for_each_unique_node(node.expression, [&](const Expr& e) {
    if (e.kind != ExprKind::Literal && e.kind != ExprKind::Access) ++cost;
  });
  return std::max<std::int64_t>(cost, 1);
}

PartitionResult partition(const DataflowGraph& graph, const DeviceSpec& spec) {
  const StencilProgram& prog = graph.program;

  // Stencil ids in deterministic topological order.
  std::vector<std::string> units;
  for (int ni : topological_order(graph)) {
    if (graph.nodes[static_cast<std::size_t>(ni)].kind == NodeKind::StencilUnit) {
      units.push_back(graph.nodes[static_cast<std::size_t>(ni)].id);
    }
  }

  std::map<std::string, int> assignment = spec.assignment;
  if (assignment.empty()) {
    int k = spec.count;
    if (k < 1) throw ProgramError("device count must be >= 1");
    if (static_cast<std::size_t>(k) > units.size()) {
      throw ProgramError("device count " + std::to_string(k) + " exceeds the stencil count " +
                         std::to_string(units.size()));
    }
    std::int64_t total = 0;
    for (const auto& id : units) total += node_cost(*prog.find_node(id));
    int device = 0;
    std::int64_t cum = 0;
    for (std::size_t i = 0; i < units.size(); ++i) {
      assignment[units[i]] = device;
      cum += node_cost(*prog.find_node(units[i]));
      std::size_t nodes_left = units.size() - i - 1;
      int devices_left = k - device - 1;
      bool quota_met = cum * k >= total * (device + 1);
      if (devices_left > 0 &&
          (quota_met || nodes_left == static_cast<std::size_t>(devices_left))) {
        ++device;
      }
    }
  } else {
    for (const auto& id : units) {
      if (!assignment.count(id)) {
        throw ProgramError("device assignment is missing stencil \"" + id + "\"");
      }
    }
  }

  // Quotient graph over devices must stay acyclic.
  {
    std::set<std::pair<int, int>> dev_edges;
    for (const auto& ch : graph.channels) {
      const DataflowNode& pn = graph.nodes[static_cast<std::size_t>(ch.producer)];
      const DataflowNode& cn = graph.nodes[static_cast<std::size_t>(ch.consumer)];
      if (pn.kind != NodeKind::StencilUnit || cn.kind != NodeKind::StencilUnit) continue;
      int a = assignment.at(pn.id), b = assignment.at(cn.id);
      if (a != b) dev_edges.insert({a, b});
    }
    std::map<int, int> state;
    std::function<void(int)> visit = [&](int d) {
      int& s = state[d];
      if (s == 2) return;
      if (s == 1) throw ProgramError("device assignment induces a cycle between devices");
      s = 1;
      for (const auto& [a, b] : dev_edges) {
        if (a == d) visit(b);
      }
      s = 2;
    };
    for (const auto& [a, b] : dev_edges) {
      (void)b;
      visit(a);
    }
  }

  PartitionResult result;
  result.plan.assignment = assignment;

  // Rebuild: units and writers keep their ids; readers are split per device.
  DataflowGraph g;
  g.program = prog;
  g.min_depth = graph.min_depth;

  // Which devices consume each input field.
  std::map<std::string, std::set<int>> input_devices;
  for (const auto& n : prog.nodes) {
    for (const Expr* a : collect_accesses(n.expression)) {
      if (prog.is_input(a->field)) input_devices[a->field].insert(assignment.at(n.name));
    }
  }

  std::map<std::pair<std::string, int>, int> reader_index;
  for (const auto& [field, devices] : input_devices) {
    for (int d : devices) {
      DataflowNode n;
      n.kind = NodeKind::MemoryReader;
      n.id = devices.size() > 1 ? "read_" + field + "_d" + std::to_string(d) : "read_" + field;
      n.field = field;
      n.device = d;
      reader_index[{field, d}] = static_cast<int>(g.nodes.size());
      g.nodes.push_back(n);
    }
    if (devices.size() > 1) result.plan.replicated_inputs[field] = devices;
  }

  std::map<std::string, int> unit_index;
  for (std::size_t i = 0; i < prog.nodes.size(); ++i) {
    DataflowNode n;
    n.kind = NodeKind::StencilUnit;
    n.id = prog.nodes[i].name;
    n.field = prog.nodes[i].name;
    n.stencil_index = static_cast<int>(i);
    n.device = assignment.at(n.id);
    unit_index[n.id] = static_cast<int>(g.nodes.size());
    g.nodes.push_back(n);
  }

  auto add_channel = [&](int producer, int consumer, const std::string& field) {
    Channel c;
    c.producer = producer;
    c.consumer = consumer;
    c.field = field;
    c.depth = g.min_depth;
    int pd = g.nodes[static_cast<std::size_t>(producer)].device;
    int cd = g.nodes[static_cast<std::size_t>(consumer)].device;
    if (pd != cd) {
      RemoteAttrs r;
      r.latency = spec.remote.latency;
      r.bandwidth = spec.remote.bandwidth;
      r.links = spec.remote.links;
      c.remote = r;
      result.plan.remote_channels.push_back(g.nodes[static_cast<std::size_t>(producer)].id +
                                            "->" +
                                            g.nodes[static_cast<std::size_t>(consumer)].id);
    }
    g.channels.push_back(c);
  };

  for (const auto& n : prog.nodes) {
    int unit = unit_index.at(n.name);
    int dev = assignment.at(n.name);
    std::set<std::string> fields;
    for (const Expr* a : collect_accesses(n.expression)) fields.insert(a->field);
    for (const auto& field : fields) {
      int producer = prog.is_input(field) ? reader_index.at({field, dev}) : unit_index.at(field);
      add_channel(producer, unit, field);
    }
  }
  for (const auto& out : prog.outputs) {
    DataflowNode n;
    n.kind = NodeKind::MemoryWriter;
    n.id = "write_" + out;
    n.field = out;
    n.device = g.nodes[static_cast<std::size_t>(unit_index.at(out))].device;
    int writer = static_cast<int>(g.nodes.size());
    g.nodes.push_back(n);
    add_channel(unit_index.at(out), writer, out);
  }

  result.graph = std::move(g);
  return result;
}

}  // namespace stencilpipe
