#include "stencilpipe/analysis.hpp"

#include <algorithm>

#include <json.hpp>

namespace stencilpipe {

using nlohmann::json;

std::int64_t LatencyConfig::get(const std::string& op) const {
  auto it = cycles.find(op);
  if (it != cycles.end()) return it->second;
  // Subtraction shares the adder unless configured separately.
  if (op == "sub") {
    it = cycles.find("add");
    if (it != cycles.end()) return it->second;
  }
  return fallback;
}

LatencyConfig LatencyConfig::from_json_text(const std::string& text) {
  LatencyConfig cfg;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProgramError(std::string("latency config: JSON parse error: ") + e.what());
  }
  for (const auto& [key, value] : doc.items()) {
    std::int64_t v = value.get<std::int64_t>();
    if (v < 0) throw ProgramError("latency config: \"" + key + "\" must be nonnegative");
    if (key == "default") {
      cfg.fallback = v;
    } else {
      cfg.cycles[key] = v;
    }
  }
  return cfg;
}

LatencyConfig LatencyConfig::zero() {
  LatencyConfig cfg;
  cfg.fallback = 0;
  return cfg;
}

std::int64_t flatten_offset(const std::vector<std::int64_t>& offsets, const Shape& shape,
                            const std::vector<int>& field_dim_indices) {
  // Strides over the field's own extents, last listed dim fastest.
  std::int64_t flat = 0;
  std::int64_t stride = 1;
  for (int d = static_cast<int>(offsets.size()) - 1; d >= 0; --d) {
    flat += offsets[static_cast<std::size_t>(d)] * stride;
    stride *= shape[static_cast<std::size_t>(field_dim_indices[static_cast<std::size_t>(d)])];
  }
  return flat;
}

namespace {

// Offset flattened into the full iteration space (missing dims of
// lower-rank fields contribute 0). This is the stream-window coordinate.
std::int64_t flatten_embedded(const std::vector<std::int64_t>& offsets, const Shape& shape,
                              const std::vector<int>& field_dim_indices) {
  std::vector<std::int64_t> strides = strides_of(shape);
  std::int64_t flat = 0;
  for (std::size_t d = 0; d < offsets.size(); ++d) {
    flat += offsets[d] * strides[static_cast<std::size_t>(field_dim_indices[d])];
  }
  return flat;
}

}  // namespace

InternalBuffer internal_buffer_size(const std::string& field,
                                    const std::vector<std::vector<std::int64_t>>& offsets,
                                    const StencilProgram& program, std::int64_t w) {
  InternalBuffer b;
  b.field = field;
  std::vector<int> idx = program.field_dim_indices(field);

  std::int64_t lo = 0, hi = 0, emb_lo = 0, emb_hi = 0;
  bool first = true;
  std::vector<std::int64_t> flats;
  for (const auto& o : offsets) {
    std::int64_t f = flatten_offset(o, program.shape, idx);
    std::int64_t e = flatten_embedded(o, program.shape, idx);
    flats.push_back(f);
    if (first) {
      lo = hi = f;
      emb_lo = emb_hi = e;
      first = false;
    } else {
      lo = std::min(lo, f);
      hi = std::max(hi, f);
      emb_lo = std::min(emb_lo, e);
      emb_hi = std::max(emb_hi, e);
    }
  }
  b.size = hi - lo + w;
  for (auto f : flats) b.taps.push_back(f - lo);
  b.span_lo = std::min<std::int64_t>(emb_lo, 0);
  b.span_hi = std::max<std::int64_t>(emb_hi, 0);
  b.center_only = emb_lo == 0 && emb_hi == 0;  // all accesses at offset zero
  return b;
}

std::int64_t ast_latency(const ExprPtr& expression, const LatencyConfig& lat) {
  switch (expression->kind) {
    case ExprKind::Literal:
    case ExprKind::Access:
      return 0;
    case ExprKind::Neg:
      return lat.get("neg") + ast_latency(expression->children[0], lat);
    case ExprKind::Binary: {
      const char* op = nullptr;
      switch (expression->bin_op) {
        case BinOp::Add: op = "add"; break;
        case BinOp::Sub: op = "sub"; break;
        case BinOp::Mul: op = "mul"; break;
        case BinOp::Div: op = "div"; break;
      }
      return lat.get(op) + std::max(ast_latency(expression->children[0], lat),
                                    ast_latency(expression->children[1], lat));
    }
    case ExprKind::Call: {
      std::int64_t deepest = 0;
      for (const auto& c : expression->children) {
        deepest = std::max(deepest, ast_latency(c, lat));
      }
      return lat.get(call_fn_name(expression->fn)) + deepest;
    }
    case ExprKind::Select: {
      std::int64_t deepest = 0;
      for (const auto& c : expression->children) {
        deepest = std::max(deepest, ast_latency(c, lat));
      }
      return lat.get("compare") + lat.get("select") + deepest;
    }
  }
  return 0;
}

NodeAnalysis analyze_node(const StencilNode& node, const StencilProgram& program,
                          const LatencyConfig& latencies) {
  NodeAnalysis a;
  std::map<std::string, std::vector<std::vector<std::int64_t>>> per_field;
  for (const Expr* acc : collect_accesses(node.expression)) {
    per_field[acc->field].push_back(acc->offsets);
  }
  std::int64_t w = program.vectorization;
  for (const auto& [field, offsets] : per_field) {
    a.buffers.emplace(field, internal_buffer_size(field, offsets, program, w));
  }
  a.init_iterations = initialization_phase(a, w);
  for (const auto& [field, buf] : a.buffers) {
    std::int64_t fill = (buf.size + w - 1) / w;
    a.fill_start[field] = std::max<std::int64_t>(0, a.init_iterations - fill);
  }
  a.latency = ast_latency(node.expression, latencies);
  return a;
}

std::int64_t initialization_phase(const NodeAnalysis& node, std::int64_t w) {
  std::int64_t max_window = 0;
  for (const auto& [field, buf] : node.buffers) {
    (void)field;
    if (buf.center_only) continue;  // single center access: no buffer to fill
    max_window = std::max(max_window, buf.timing_size(w));
  }
  return (max_window + w - 1) / w;
}

namespace {

// Per-stencil contribution to a path delay, in cycles: the initialization
// iterations, the compute pipeline depth, and one registered handoff for
// the output push.
std::int64_t node_contribution(const DataflowGraph& g, const BufferReport& r, int node) {
  const DataflowNode& n = g.nodes[static_cast<std::size_t>(node)];
  if (n.kind != NodeKind::StencilUnit) return 0;  // readers prefetch; writers are sinks
  const NodeAnalysis& a = r.nodes.at(n.id);
  return a.init_iterations + a.latency + 1;
}

}  // namespace

BufferReport analyze(const DataflowGraph& graph, const LatencyConfig& latencies) {
  BufferReport report;
  std::int64_t w = graph.program.vectorization;
  report.vector_width = w;

  for (const auto& n : graph.nodes) {
    if (n.kind == NodeKind::StencilUnit) {
      report.nodes.emplace(
          n.id, analyze_node(graph.program.nodes[static_cast<std::size_t>(n.stencil_index)],
                             graph.program, latencies));
    }
  }

  // Longest path delay from any source to each node, in cycles. A node's
  // own contribution is added on its outgoing edges.
  std::vector<std::int64_t> path_delay(graph.nodes.size(), 0);
  std::vector<int> order = topological_order(graph);
  report.channels.assign(graph.channels.size(), ChannelAnalysis{});
  for (int node : order) {
    for (std::size_t c = 0; c < graph.channels.size(); ++c) {
      const Channel& ch = graph.channels[c];
      if (ch.consumer != node) continue;
      std::int64_t d = path_delay[static_cast<std::size_t>(ch.producer)] +
                       node_contribution(graph, report, ch.producer) +
                       (ch.remote ? ch.remote->latency : 0);
      report.channels[c].delay_cycles = d;
      path_delay[static_cast<std::size_t>(node)] =
          std::max(path_delay[static_cast<std::size_t>(node)], d);
    }
  }

  // Depth: slack against the slowest sibling path, plus the configured
  // minimum. At least one incoming edge per node gets the minimum.
  std::int64_t min_vec = std::max<std::int64_t>(1, (graph.min_depth + w - 1) / w);
  for (std::size_t c = 0; c < graph.channels.size(); ++c) {
    const Channel& ch = graph.channels[c];
    std::int64_t slowest = path_delay[static_cast<std::size_t>(ch.consumer)];
    std::int64_t slack_vec = slowest - report.channels[c].delay_cycles;
    std::int64_t depth_vec = slack_vec + min_vec;
    if (ch.remote) depth_vec += ch.remote->latency;  // bandwidth-delay allowance
    report.channels[c].depth = depth_vec * w;
  }

  report.total_fast_memory = 0;
  for (const auto& [id, a] : report.nodes) {
    (void)id;
    for (const auto& [field, buf] : a.buffers) {
      (void)field;
      report.total_fast_memory += buf.size;
    }
  }
  for (const auto& c : report.channels) report.total_fast_memory += c.depth;
  return report;
}

void apply_depths(DataflowGraph& graph, const BufferReport& report) {
  for (std::size_t c = 0; c < graph.channels.size(); ++c) {
    graph.channels[c].depth = report.channels[c].depth;
  }
}

std::string report_to_json(const DataflowGraph& graph, const BufferReport& report) {
  json doc;
  doc["vector_width"] = report.vector_width;
  json nodes = json::object();
  for (const auto& [id, a] : report.nodes) {
    json n;
    json buffers = json::object();
    for (const auto& [field, buf] : a.buffers) {
      buffers[field] = {{"size", buf.size}, {"taps", buf.taps}};
    }
    n["buffers"] = buffers;
    n["init_iterations"] = a.init_iterations;
    n["fill_start"] = a.fill_start;
    n["latency"] = a.latency;
    nodes[id] = n;
  }
  doc["nodes"] = nodes;
  json channels = json::array();
  for (std::size_t c = 0; c < graph.channels.size(); ++c) {
    const Channel& ch = graph.channels[c];
    json e;
    e["from"] = graph.nodes[static_cast<std::size_t>(ch.producer)].id;
    e["to"] = graph.nodes[static_cast<std::size_t>(ch.consumer)].id;
    e["field"] = ch.field;
    e["depth"] = report.channels[c].depth;
    e["delay"] = report.channels[c].delay_cycles;
    if (ch.remote) {
      e["remote"] = {{"latency", ch.remote->latency},
                     {"bandwidth", ch.remote->bandwidth},
                     {"links", ch.remote->links}};
    }
    channels.push_back(e);
  }
  doc["channels"] = channels;
  doc["total_fast_memory"] = report.total_fast_memory;
  return doc.dump(2) + "\n";
}

}  // namespace stencilpipe
