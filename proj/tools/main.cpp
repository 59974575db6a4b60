// Command-line driver: analyze, transform, simulate, and verify stencil
// dataflow programs described in the JSON DSL.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stencilpipe/analysis.hpp"
#include "stencilpipe/field.hpp"
#include "stencilpipe/graph.hpp"
#include "stencilpipe/interpreter.hpp"
#include "stencilpipe/perf.hpp"
#include "stencilpipe/program.hpp"
#include "stencilpipe/simulator.hpp"
#include "stencilpipe/transform.hpp"

namespace fs = std::filesystem;
using namespace stencilpipe;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDeadlock = 3;
constexpr int kExitMismatch = 4;

struct CommonOpts {
  std::string program_path;
  std::string latencies_path;
  std::int64_t vectorize = 0;  // 0: keep program setting
  std::string devices_path;
  std::int64_t min_depth = 1;
  std::int64_t limit = -1;
  std::string out_dir;
  bool emit_dot = false;
  bool do_fuse = false;
  std::vector<std::string> force_depth;
  std::int64_t seed = -1;
  std::string format = "json";
  std::string trace_path;
  std::string outputs_dir;  // raw arrays; defaults to <out>/outputs
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProgramError("cannot open \"" + path + "\"");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ExecutionError("cannot write \"" + path + "\"");
  out << content;
}

void emit(const CommonOpts& opts, const std::string& name, const std::string& content) {
  if (opts.out_dir.empty()) {
    std::cout << content;
  } else {
    fs::create_directories(opts.out_dir);
    write_file(opts.out_dir + "/" + name, content);
  }
}

struct Pipeline {
  StencilProgram program;
  DataflowGraph graph;
  BufferReport report;
  LatencyConfig latencies;
  std::optional<DevicePlan> plan;
};

// Shared front half of every command: parse, transform, analyze.
Pipeline prepare(const CommonOpts& opts) {
  Pipeline p;
  p.program = parse_program(read_file(opts.program_path));
  if (opts.vectorize > 0) p.program = apply_vectorization(p.program, opts.vectorize);
  if (!opts.latencies_path.empty()) {
    p.latencies = LatencyConfig::from_json_text(read_file(opts.latencies_path));
  }
  p.graph = build_graph(p.program, opts.min_depth);
  if (opts.do_fuse) p.graph = fuse_all(p.graph);

  std::optional<DeviceSpec> devices = p.graph.program.devices;
  if (!opts.devices_path.empty()) {
    nlohmann::json doc = nlohmann::json::parse(read_file(opts.devices_path));
    DeviceSpec spec;
    if (doc.contains("count")) spec.count = doc.at("count").get<int>();
    if (doc.contains("assignment")) {
      for (const auto& [node, dev] : doc.at("assignment").items()) {
        spec.assignment[node] = dev.get<int>();
      }
    }
    if (doc.contains("remote")) {
      spec.remote.latency = doc.at("remote").value("latency", 0);
      spec.remote.bandwidth = doc.at("remote").value("bandwidth", 1e30);
      spec.remote.links = doc.at("remote").value("links", 1);
    }
    devices = spec;
  }
  if (devices && (devices->count > 1 || !devices->assignment.empty())) {
    PartitionResult pr = partition(p.graph, *devices);
    p.graph = std::move(pr.graph);
    p.plan = std::move(pr.plan);
  }

  p.report = analyze(p.graph, p.latencies);
  apply_depths(p.graph, p.report);

  for (const auto& spec : opts.force_depth) {
    auto eq = spec.rfind('=');
    auto arrow = spec.find("->");
    if (eq == std::string::npos || arrow == std::string::npos || arrow > eq) {
      throw ProgramError("--force-depth expects producer->consumer=N (or =min)");
    }
    std::string from = spec.substr(0, arrow);
    std::string to = spec.substr(arrow + 2, eq - arrow - 2);
    std::string val = spec.substr(eq + 1);
    bool found = false;
    for (std::size_t c = 0; c < p.graph.channels.size(); ++c) {
      Channel& ch = p.graph.channels[c];
      if (p.graph.nodes[static_cast<std::size_t>(ch.producer)].id == from &&
          p.graph.nodes[static_cast<std::size_t>(ch.consumer)].id == to) {
        ch.depth = val == "min" ? p.graph.min_depth : std::stoll(val);
        p.report.channels[c].depth = ch.depth;
        found = true;
      }
    }
    if (!found) throw ProgramError("--force-depth: no channel " + from + "->" + to);
  }
  return p;
}


std::string report_text(const DataflowGraph& g, const BufferReport& r) {
  std::ostringstream os;
  os << "vector width " << r.vector_width << "\n";
  for (const auto& [id, n] : r.nodes) {
    os << id << ": init " << n.init_iterations << " it, latency " << n.latency << " cyc";
    for (const auto& [field, buf] : n.buffers) {
      os << ", " << field << " buf " << buf.size;
    }
    os << "\n";
  }
  for (std::size_t c = 0; c < g.channels.size(); ++c) {
    const Channel& ch = g.channels[c];
    os << "  " << g.nodes[static_cast<std::size_t>(ch.producer)].id << " -> "
       << g.nodes[static_cast<std::size_t>(ch.consumer)].id << ": depth "
       << r.channels[c].depth;
    if (ch.remote) os << " (remote +" << ch.remote->latency << " cyc)";
    os << "\n";
  }
  os << "total fast memory " << r.total_fast_memory << " elements\n";
  return os.str();
}

std::string prediction_text(const CyclePrediction& p) {
  std::ostringstream os;
  os << "L = " << p.pipeline_latency << ", N = " << p.iterations << ", C = " << p.cycles
     << " cycles";
  if (p.seconds) os << " (" << *p.seconds * 1e6 << " us)";
  os << "\n";
  return os.str();
}

nlohmann::json compare_json(const std::map<std::string, CompareReport>& reports) {
  nlohmann::json doc;
  bool pass = true;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, r] : reports) {
    pass = pass && r.pass;
    per[name] = {{"pass", r.pass},
                 {"compared", r.compared},
                 {"mismatches", r.mismatches},
                 {"mask_mismatches", r.mask_mismatches}};
    if (!r.first_detail.empty()) per[name]["first"] = r.first_detail;
  }
  doc["pass"] = pass;
  doc["outputs"] = per;
  return doc;
}

void write_outputs(const CommonOpts& opts, const FieldMap& outputs, const std::string& subdir) {
  std::string dir = opts.outputs_dir;
  if (dir.empty()) {
    if (opts.out_dir.empty()) return;
    dir = opts.out_dir + (subdir.empty() ? "" : "/" + subdir);
  }
  fs::create_directories(dir);
  nlohmann::json masks = nlohmann::json::object();
  for (const auto& [name, arr] : outputs) {
    write_raw(arr, dir + "/" + name + ".bin");
    std::int64_t invalid = 0;
    for (auto v : arr.valid) invalid += v ? 0 : 1;
    masks[name] = {{"elements", arr.size()},
                   {"invalid", invalid},
                   {"dtype", dtype_name(arr.dtype)},
                   {"shape", arr.shape}};
  }
  write_file(dir + "/masks.json", masks.dump(2) + "\n");
}

nlohmann::json plan_json(const DevicePlan& plan) {
  nlohmann::json doc;
  doc["assignment"] = plan.assignment;
  nlohmann::json repl = nlohmann::json::object();
  for (const auto& [field, devs] : plan.replicated_inputs) {
    repl[field] = std::vector<int>(devs.begin(), devs.end());
  }
  doc["replicated_inputs"] = repl;
  doc["remote_channels"] = plan.remote_channels;
  return doc;
}

int report_deadlock(const SimulationResult& sim) {
  std::cerr << "deadlock after " << sim.total_cycles << " cycles; wait-for cycle:\n";
  for (const auto& wf : sim.witness) {
    std::cerr << "  " << wf.node << " waiting for " << wf.channel << " to become "
              << (wf.waiting_not_empty ? "non-empty" : "non-full") << "\n";
  }
  return kExitDeadlock;
}

int cmd_analyze(const CommonOpts& opts) {
  Pipeline p = prepare(opts);
  if (opts.format == "text") {
    std::cout << report_text(p.graph, p.report);
  }
  emit(opts, "report.json", report_to_json(p.graph, p.report));
  if (opts.emit_dot) emit(opts, "graph.dot", to_dot(p.graph));
  if (p.plan) emit(opts, "devices.json", plan_json(*p.plan).dump(2) + "\n");
  return 0;
}

int cmd_predict(const CommonOpts& opts, std::optional<double> frequency) {
  Pipeline p = prepare(opts);
  CyclePrediction pred = predict_cycles(p.graph, p.report, frequency);
  if (opts.format == "text") {
    std::cout << prediction_text(pred);
  }
  emit(opts, "prediction.json", prediction_to_json(pred));
  return 0;
}

int cmd_reference(const CommonOpts& opts) {
  Pipeline p = prepare(opts);
  FieldMap inputs = materialize_inputs(p.graph.program, opts.seed,
                                       fs::path(opts.program_path).parent_path().string());
  FieldMap outputs = interpret(p.graph.program, inputs);
  write_outputs(opts, outputs, "");
  if (opts.out_dir.empty()) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [name, arr] : outputs) {
      std::int64_t invalid = 0;
      for (auto v : arr.valid) invalid += v ? 0 : 1;
      doc[name] = {{"elements", arr.size()}, {"invalid", invalid}};
    }
    std::cout << doc.dump(2) << "\n";
  }
  return 0;
}

int cmd_simulate(const CommonOpts& opts, bool and_verify) {
  Pipeline p = prepare(opts);
  FieldMap inputs = materialize_inputs(p.graph.program, opts.seed,
                                       fs::path(opts.program_path).parent_path().string());
  SimOptions so;
  so.limit = opts.limit;
  so.trace_path = opts.trace_path;
  SimulationResult sim = simulate(p.graph, p.report, inputs, so);
  emit(opts, "result.json", simulation_to_json(p.graph, sim));
  if (sim.outcome == SimOutcome::Deadlock) return report_deadlock(sim);
  if (sim.outcome == SimOutcome::LimitExceeded) {
    std::cerr << "cycle limit exceeded (" << sim.total_cycles << ")\n";
    return 1;
  }
  write_outputs(opts, sim.outputs, "outputs");
  if (and_verify) {
    FieldMap expected = interpret(p.graph.program, inputs);
    std::map<std::string, CompareReport> reports;
    for (const auto& [name, arr] : expected) {
      reports[name] = compare_fields(sim.outputs.at(name), arr, CompareMode::BitExact);
    }
    nlohmann::json cj = compare_json(reports);
    emit(opts, "compare.json", cj.dump(2) + "\n");
    if (!cj["pass"].get<bool>()) {
      std::cerr << "verification FAILED\n" << cj.dump(2) << "\n";
      return kExitMismatch;
    }
    if (opts.format == "text") std::cout << "verification: pass\n";
  }
  return 0;
}

int cmd_run(const CommonOpts& opts, std::optional<double> frequency) {
  Pipeline p = prepare(opts);
  FieldMap inputs = materialize_inputs(p.graph.program, opts.seed,
                                       fs::path(opts.program_path).parent_path().string());

  emit(opts, "report.json", report_to_json(p.graph, p.report));
  if (opts.emit_dot) emit(opts, "graph.dot", to_dot(p.graph));
  if (p.plan) emit(opts, "devices.json", plan_json(*p.plan).dump(2) + "\n");
  CyclePrediction pred = predict_cycles(p.graph, p.report, frequency);
  emit(opts, "prediction.json", prediction_to_json(pred));

  SimOptions so;
  so.limit = opts.limit;
  so.trace_path = opts.trace_path;
  SimulationResult sim = simulate(p.graph, p.report, inputs, so);
  emit(opts, "result.json", simulation_to_json(p.graph, sim));
  if (sim.outcome == SimOutcome::Deadlock) return report_deadlock(sim);
  if (sim.outcome == SimOutcome::LimitExceeded) {
    std::cerr << "cycle limit exceeded (" << sim.total_cycles << ")\n";
    return 1;
  }
  write_outputs(opts, sim.outputs, "outputs");

  FieldMap expected = interpret(p.graph.program, inputs);
  std::map<std::string, CompareReport> reports;
  for (const auto& [name, arr] : expected) {
    reports[name] = compare_fields(sim.outputs.at(name), arr, CompareMode::BitExact);
  }
  nlohmann::json cj = compare_json(reports);
  emit(opts, "compare.json", cj.dump(2) + "\n");

  if (opts.format == "text") {
    std::cout << "cycles: " << sim.total_cycles << " (predicted lower bound " << pred.cycles
              << ")\n"
              << "verification: " << (cj["pass"].get<bool>() ? "pass" : "FAIL") << "\n";
  }
  if (!cj["pass"].get<bool>()) {
    std::cerr << "verification FAILED\n" << cj.dump(2) << "\n";
    return kExitMismatch;
  }
  return 0;
}

int cmd_fuse(const CommonOpts& opts) {
  Pipeline p = prepare(opts);
  DataflowGraph fused = fuse_all(p.graph);
  emit(opts, "fused.json", serialize_program(program_from_graph(fused)));
  if (opts.emit_dot) emit(opts, "fused.dot", to_dot(fused));
  return 0;
}

int cmd_partition(const CommonOpts& opts) {
  Pipeline p = prepare(opts);
  if (!p.plan) {
    throw ProgramError("partition: no device spec (give --devices or a \"devices\" key)");
  }
  emit(opts, "devices.json", plan_json(*p.plan).dump(2) + "\n");
  if (opts.emit_dot) emit(opts, "partitioned.dot", to_dot(p.graph));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stencil dataflow analyzer and cycle-level simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::optional<double> frequency;
  std::int64_t roofline_ops = 0, roofline_operands = 0, roofline_bytes = 4;
  std::optional<double> roofline_bandwidth, roofline_rate;

  auto add_common = [&](CLI::App* cmd, bool needs_program = true) {
    auto* o = cmd->add_option("--program,-p", opts.program_path, "program JSON file");
    if (needs_program) o->required();
    cmd->add_option("--latencies", opts.latencies_path, "operation latency JSON file");
    cmd->add_option("--vectorize", opts.vectorize, "override vectorization width");
    cmd->add_option("--devices", opts.devices_path, "device spec JSON file");
    cmd->add_option("--min-depth", opts.min_depth, "minimum channel depth (elements)");
    cmd->add_option("--limit", opts.limit, "simulation cycle limit");
    cmd->add_option("--out", opts.out_dir, "output directory (default: stdout)");
    cmd->add_flag("--emit-dot", opts.emit_dot, "also write GraphViz output");
    cmd->add_flag("--fuse", opts.do_fuse, "fuse stencils before analysis");
    cmd->add_option("--force-depth", opts.force_depth,
                    "override a channel depth: producer->consumer=N (or =min)");
    cmd->add_option("--seed", opts.seed, "seed override for random input data");
    cmd->add_option("--format", opts.format, "json|text");
    cmd->add_option("--dump-trace", opts.trace_path, "per-cycle channel occupancy CSV");
    cmd->add_option("--outputs", opts.outputs_dir, "directory for raw output arrays + masks");
    cmd->add_option("--frequency", frequency, "clock frequency in Hz for runtime estimates");
  };

  auto* c_analyze = app.add_subcommand("analyze", "buffer and delay analysis");
  add_common(c_analyze);
  auto* c_simulate = app.add_subcommand("simulate", "cycle-level simulation");
  add_common(c_simulate);
  bool simulate_verify = false;
  c_simulate->add_flag("--verify", simulate_verify, "also run the reference and compare");
  auto* c_reference = app.add_subcommand("reference", "sequential reference execution");
  add_common(c_reference);
  auto* c_verify = app.add_subcommand("verify", "simulate and compare against the reference");
  add_common(c_verify);
  auto* c_run = app.add_subcommand("run", "full pipeline: analyze, simulate, verify, predict");
  add_common(c_run);
  auto* c_fuse = app.add_subcommand("fuse", "fuse stencils and emit the transformed program");
  add_common(c_fuse);
  auto* c_partition = app.add_subcommand("partition", "assign stencils to devices");
  add_common(c_partition);
  auto* c_predict = app.add_subcommand("predict", "cycle-count prediction");
  add_common(c_predict);

  auto* c_roofline = app.add_subcommand("roofline", "arithmetic intensity and bounds");
  add_common(c_roofline, false);
  c_roofline->add_option("--ops", roofline_ops, "total operation count");
  c_roofline->add_option("--operands", roofline_operands, "total operand count");
  c_roofline->add_option("--bytes", roofline_bytes, "bytes per operand");
  c_roofline->add_option("--bandwidth", roofline_bandwidth, "memory bandwidth, GB/s");
  c_roofline->add_option("--rate", roofline_rate, "target compute rate, GOp/s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (c_analyze->parsed()) return cmd_analyze(opts);
    if (c_simulate->parsed()) return cmd_simulate(opts, simulate_verify);
    if (c_reference->parsed()) return cmd_reference(opts);
    if (c_verify->parsed()) return cmd_simulate(opts, true);
    if (c_run->parsed()) return cmd_run(opts, frequency);
    if (c_fuse->parsed()) return cmd_fuse(opts);
    if (c_partition->parsed()) return cmd_partition(opts);
    if (c_predict->parsed()) return cmd_predict(opts, frequency);
    if (c_roofline->parsed()) {
      if (!opts.program_path.empty()) {
        StencilProgram prog = parse_program(read_file(opts.program_path));
        ProgramCounts counts = count_program(prog);
        roofline_ops = counts.total_arithmetic(volume(prog.shape));
        roofline_operands = counts.read_elements + counts.write_elements;
      }
      RooflineResult r = roofline(roofline_ops, roofline_operands, roofline_bytes,
                                  roofline_bandwidth, roofline_rate);
      emit(opts, "roofline.json", roofline_to_json(r));
      return 0;
    }
  } catch (const ProgramError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
