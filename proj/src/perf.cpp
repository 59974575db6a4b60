#include "stencilpipe/perf.hpp"

#include <numeric>
#include <set>

#include <json.hpp>

namespace stencilpipe {

using nlohmann::json;

CyclePrediction predict_cycles(const DataflowGraph& graph, const BufferReport& report,
                               std::optional<double> frequency_hz) {
  CyclePrediction p;
  p.iterations = graph.program.iterations();

  // Longest source-to-sink path of init iterations + compute latency +
  // remote latency, without handoff registers.
  std::vector<std::int64_t> delay(graph.nodes.size(), 0);
  for (int ni : topological_order(graph)) {
    for (std::size_t c = 0; c < graph.channels.size(); ++c) {
      const Channel& ch = graph.channels[c];
      if (ch.consumer != ni) continue;
      const DataflowNode& pn = graph.nodes[static_cast<std::size_t>(ch.producer)];
      std::int64_t contrib = 0;
      if (pn.kind == NodeKind::StencilUnit) {
        const NodeAnalysis& a = report.nodes.at(pn.id);
        contrib = a.init_iterations + a.latency;
      }
      std::int64_t d = delay[static_cast<std::size_t>(ch.producer)] + contrib +
                       (ch.remote ? ch.remote->latency : 0);
      delay[static_cast<std::size_t>(ni)] = std::max(delay[static_cast<std::size_t>(ni)], d);
    }
    p.pipeline_latency = std::max(p.pipeline_latency, delay[static_cast<std::size_t>(ni)]);
  }
  p.cycles = p.pipeline_latency + p.initiation_interval * p.iterations;
  if (frequency_hz) p.seconds = static_cast<double>(p.cycles) / *frequency_hz;
  return p;
}

namespace {

const char* bin_op_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::Div: return "div";
  }
  return "?";
}

}  // namespace

std::int64_t ProgramCounts::arithmetic_per_point() const {
  std::int64_t total = 0;
  for (const auto& [kind, n] : ops) {
    if (kind == "add" || kind == "sub" || kind == "mul" || kind == "div" || kind == "sqrt" ||
        kind == "exp" || kind == "log" || kind == "pow" || kind == "neg") {
      total += n;
    }
  }
  return total;
}

ProgramCounts count_program(const StencilProgram& program) {
  ProgramCounts counts;
  for (const auto& node : program.nodes) {
    for_each_unique_node(node.expression, [&](const Expr& e) {
      switch (e.kind) {
        case ExprKind::Literal:
        case ExprKind::Access:
          break;
        case ExprKind::Neg:
          counts.ops["neg"]++;
          break;
        case ExprKind::Binary:
          counts.ops[bin_op_name(e.bin_op)]++;
          break;
        case ExprKind::Call:
          counts.ops[call_fn_name(e.fn)]++;
          break;
        case ExprKind::Select:
          counts.ops["compare"]++;
          counts.branches++;
          break;
      }
    });
  }
  // Perfect reuse: each consumed input field is read from memory exactly
  // once, each program output written once.
  std::set<std::string> consumed;
  for (const auto& node : program.nodes) {
    for (const Expr* a : collect_accesses(node.expression)) consumed.insert(a->field);
  }
  for (const auto& f : program.inputs) {
    if (!consumed.count(f.name)) continue;
    counts.reads_by_rank[static_cast<int>(f.dims.size())]++;
    counts.read_elements += volume(program.field_shape(f.name));
  }
  counts.writes_by_rank[static_cast<int>(program.shape.size())] =
      static_cast<std::int64_t>(program.outputs.size());
  counts.write_elements = static_cast<std::int64_t>(program.outputs.size()) * volume(program.shape);
  return counts;
}

RooflineResult roofline(std::int64_t total_ops, std::int64_t total_operands,
                        std::int64_t bytes_per_operand, std::optional<double> bandwidth_gbs,
                        std::optional<double> target_rate_gops) {
  if (total_operands <= 0) throw ProgramError("roofline: operand volume must be positive");
  if (total_ops < 0 || bytes_per_operand <= 0) throw ProgramError("roofline: bad totals");
  RooflineResult r;
  std::int64_t g = std::gcd(total_ops, total_operands);
  r.ops_num = total_ops / g;
  r.ops_den = total_operands / g;
  std::int64_t bytes = total_operands * bytes_per_operand;
  g = std::gcd(total_ops, bytes);
  r.byte_num = total_ops / g;
  r.byte_den = bytes / g;
  r.ops_per_operand = static_cast<double>(total_ops) / static_cast<double>(total_operands);
  r.ops_per_byte = static_cast<double>(total_ops) / static_cast<double>(bytes);
  if (bandwidth_gbs) r.bound_gops = r.ops_per_byte * *bandwidth_gbs;
  if (target_rate_gops) r.required_bandwidth = *target_rate_gops / r.ops_per_byte;
  return r;
}

std::string prediction_to_json(const CyclePrediction& p) {
  json doc;
  doc["pipeline_latency"] = p.pipeline_latency;
  doc["iterations"] = p.iterations;
  doc["initiation_interval"] = p.initiation_interval;
  doc["cycles"] = p.cycles;
  if (p.seconds) doc["seconds"] = *p.seconds;
  return doc.dump(2) + "\n";
}

std::string counts_to_json(const ProgramCounts& c, const StencilProgram& program) {
  json doc;
  doc["ops_per_point"] = c.ops;
  doc["branches"] = c.branches;
  doc["arithmetic_per_point"] = c.arithmetic_per_point();
  json reads, writes;
  for (const auto& [rank, n] : c.reads_by_rank) reads[std::to_string(rank) + "d"] = n;
  for (const auto& [rank, n] : c.writes_by_rank) writes[std::to_string(rank) + "d"] = n;
  doc["reads"] = {{"fields_by_rank", reads}, {"elements", c.read_elements}};
  doc["writes"] = {{"fields_by_rank", writes}, {"elements", c.write_elements}};
  doc["points"] = volume(program.shape);
  doc["total_arithmetic"] = c.total_arithmetic(volume(program.shape));
  return doc.dump(2) + "\n";
}

std::string roofline_to_json(const RooflineResult& r) {
  json doc;
  doc["ops_per_operand"] = {{"num", r.ops_num}, {"den", r.ops_den}, {"value", r.ops_per_operand}};
  doc["ops_per_byte"] = {{"num", r.byte_num}, {"den", r.byte_den}, {"value", r.ops_per_byte}};
  if (r.bound_gops) doc["bound_gops"] = *r.bound_gops;
  if (r.required_bandwidth) doc["required_bandwidth_gbs"] = *r.required_bandwidth;
  return doc.dump(2) + "\n";
}

}  // namespace stencilpipe
