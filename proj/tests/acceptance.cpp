// Acceptance suite: one pass/fail line per criterion. Exits nonzero if any
// criterion fails. argv[1]: path to the CLI binary (for the determinism
// criterion); argv[2]: path to the reference program JSON.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "stencilpipe/perf.hpp"
#include "stencilpipe/transform.hpp"

using namespace stencilpipe;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int n, const std::string& name, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
    ok = false;
  }
  std::printf("%s criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", n, name.c_str(),
              detail.empty() ? "" : " (", detail.empty() ? "" : (detail + ")").c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

bool expect(bool cond, const std::string& what, std::string& detail) {
  if (!cond && detail.empty()) detail = what;
  return cond;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------

bool end_to_end(std::string& detail) {
  auto t0 = std::chrono::steady_clock::now();
  StencilProgram p = parse_program(sptest::five_stencil_json());
  DataflowGraph g = build_graph(p);
  BufferReport r = analyze(g, LatencyConfig());
  apply_depths(g, r);
  FieldMap in = materialize_inputs(p, 7);
  SimulationResult sim = simulate(g, r, in);
  bool ok = expect(sim.outcome == SimOutcome::Completed, "simulation did not complete", detail);

  FieldMap ref = interpret(p, in);
  CompareReport cmp = compare_fields(sim.outputs.at("b4"), ref.at("b4"), CompareMode::BitExact);
  ok = expect(cmp.pass, "simulator/reference mismatch: " + cmp.first_detail, detail) && ok;

  // The only shrink-induced invalidity comes from b3's i-1/i+1 reads.
  const FieldArray& b4 = sim.outputs.at("b4");
  std::int64_t coords[3];
  bool mask_ok = true;
  for (std::int64_t f = 0; f < b4.size(); ++f) {
    unflatten(f, p.shape, coords);
    bool boundary = coords[0] == 0 || coords[0] == p.shape[0] - 1;
    mask_ok = mask_ok && (b4.valid[f] == (boundary ? 0 : 1));
  }
  ok = expect(mask_ok, "validity mask does not match the shrink region", detail) && ok;

  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = expect(secs < 10.0, "took " + std::to_string(secs) + "s", detail) && ok;
  if (ok) detail = std::to_string(sim.total_cycles) + " cycles, " + std::to_string(secs) + "s";
  return ok;
}

bool buffer_formula(std::string& detail) {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i","j","k"]}},
    "outputs": ["c"], "shape": [32,32,32],
    "program": {"c": {"code": "a[i,j,k]", "boundary_condition": "shrink"}}
  })__");
  bool ok = expect(internal_buffer_size("a", {{0, 1, 0}, {0, -1, 0}}, p, 1).size == 65,
                   "two-row buffer is not 2I+W", detail);
  ok = expect(internal_buffer_size("a", {{1, 0, 0}, {-1, 0, 0}}, p, 1).size == 2 * 32 * 32 + 1,
              "two-slice buffer is not 2*S1*S2+W", detail) &&
       ok;
  ok = expect(internal_buffer_size("a", {{1, 0, 0}, {-1, 0, 0}}, p, 4).size == 2 * 32 * 32 + 4,
              "vectorized two-slice buffer is not 2*S1*S2+W", detail) &&
       ok;

  std::mt19937 rng(4242);
  auto randint = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
  };
  int tested = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t rank = static_cast<std::size_t>(randint(1, 3));
    Shape shape;
    for (std::size_t d = 0; d < rank; ++d) shape.push_back(randint(5, 8));
    std::ostringstream os;
    os << "{\"inputs\": {\"a\": {\"dtype\": \"float32\", \"dims\": [";
    for (std::size_t d = 0; d < rank; ++d) {
      os << (d ? "," : "") << "\"" << static_cast<char>('i' + d) << "\"";
    }
    os << "]}}, \"outputs\": [\"c\"], \"shape\": [";
    for (std::size_t d = 0; d < rank; ++d) os << (d ? "," : "") << shape[d];
    os << "], \"program\": {\"c\": {\"code\": \"a[";
    for (std::size_t d = 0; d < rank; ++d) os << (d ? "," : "") << static_cast<char>('i' + d);
    os << "]\", \"boundary_condition\": \"shrink\"}}}";
    StencilProgram q = parse_program(os.str());
    std::vector<std::vector<std::int64_t>> offsets;
    int n_acc = randint(1, 4);
    for (int a = 0; a < n_acc; ++a) {
      std::vector<std::int64_t> off;
      for (std::size_t d = 0; d < rank; ++d) off.push_back(randint(-2, 2));
      offsets.push_back(off);
    }
    std::int64_t expected = sptest::sliding_window_oracle(shape, offsets);
    if (internal_buffer_size("a", offsets, q, 1).size != expected) {
      detail = "random access set disagrees with the sliding-window search";
      return false;
    }
    ++tested;
  }
  if (ok) detail = std::to_string(tested) + " random access sets matched";
  return ok;
}

bool deadlock_freedom(std::string& detail) {
  // 100 random DAGs stream to completion with analyzed depths.
  std::mt19937 rng(77);
  int completed = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Shape shape;
    switch (trial % 4) {
      case 0: shape = {16, 16, 16}; break;
      case 1: shape = {8, 12, 16}; break;
      case 2: shape = {13, 16}; break;
      default: shape = {16}; break;
    }
    std::int64_t w = std::vector<std::int64_t>{1, 2, 4}[trial % 3];
    std::string json = sptest::random_program_json(rng, 10, shape, w, trial % 2 == 0);
    LatencyConfig lat = sptest::random_latencies(rng);
    auto run = sptest::run_pipeline(json, lat, 7000 + trial);
    if (run.sim.outcome != SimOutcome::Completed) {
      detail = "random graph " + std::to_string(trial) + " did not complete";
      return false;
    }
    for (const auto& [name, expected] : run.reference) {
      if (!compare_fields(run.sim.outputs.at(name), expected, CompareMode::BitExact).pass) {
        detail = "random graph " + std::to_string(trial) + " output mismatch";
        return false;
      }
    }
    ++completed;
  }

  // The diamond wedges when the bypass capacity is forced to the minimum.
  StencilProgram p = parse_program(sptest::diamond_json(16));
  DataflowGraph g = build_graph(p);
  BufferReport r = analyze(g, LatencyConfig::zero());
  apply_depths(g, r);
  std::int64_t analyzed = 0;
  for (std::size_t c = 0; c < g.channels.size(); ++c) {
    if (g.nodes[g.channels[c].producer].id == "A" && g.nodes[g.channels[c].consumer].id == "C") {
      analyzed = g.channels[c].depth;
    }
  }
  FieldMap in = materialize_inputs(p, 3);
  auto simulate_with_depth = [&](std::int64_t depth) {
    DataflowGraph forced = g;
    for (auto& ch : forced.channels) {
      if (forced.nodes[ch.producer].id == "A" && forced.nodes[ch.consumer].id == "C") {
        ch.depth = depth;
      }
    }
    return simulate(forced, r, in);
  };
  SimulationResult wedged = simulate_with_depth(g.min_depth);
  if (!expect(wedged.outcome == SimOutcome::Deadlock, "forced-minimum diamond did not deadlock",
              detail)) {
    return false;
  }
  std::set<std::string> cycle_nodes;
  for (const auto& wf : wedged.witness) cycle_nodes.insert(wf.node);
  if (!expect(cycle_nodes == std::set<std::string>{"A", "B", "C"},
              "witness is not the A/B/C wait-for cycle", detail)) {
    return false;
  }

  // Bisect the minimal deadlock-free depth; the analyzed depth must sit
  // within one producer initialization phase above it.
  std::int64_t lo = g.min_depth, hi = analyzed;
  while (lo + 1 < hi) {
    std::int64_t mid = (lo + hi) / 2;
    if (simulate_with_depth(mid).outcome == SimOutcome::Completed) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  std::int64_t minimal = hi;
  std::int64_t init_b = r.nodes.at("B").init_iterations * r.vector_width;
  bool ok = expect(analyzed >= minimal, "analyzed depth below the simulated minimum", detail);
  ok = expect(analyzed - minimal <= init_b,
              "analyzed depth exceeds the minimum by more than one init phase", detail) &&
       ok;
  if (ok) {
    detail = std::to_string(completed) + " graphs completed; diamond minimal " +
             std::to_string(minimal) + ", analyzed " + std::to_string(analyzed);
  }
  return ok;
}

bool performance_model(std::string& detail) {
  for (int k : {1, 2, 4, 8}) {
    auto run = sptest::run_pipeline(sptest::chain_json(k, 16));
    if (run.sim.outcome != SimOutcome::Completed) {
      detail = "chain k=" + std::to_string(k) + " did not complete";
      return false;
    }
    CyclePrediction pred = predict_cycles(run.graph, run.report);
    std::int64_t slack = run.sim.total_cycles - pred.cycles;
    if (slack < 0 || slack > k) {
      detail = "chain k=" + std::to_string(k) + ": simulated " +
               std::to_string(run.sim.total_cycles) + " vs C=" + std::to_string(pred.cycles);
      return false;
    }
  }

  FieldArray w1_out;
  std::int64_t n1 = 0;
  for (std::int64_t w : {1, 2, 4}) {
    StencilProgram p = parse_program(sptest::chain_json(2, 16, w));
    DataflowGraph g = build_graph(p);
    BufferReport r = analyze(g, LatencyConfig::zero());
    apply_depths(g, r);
    CyclePrediction pred = predict_cycles(g, r);
    if (w == 1) n1 = pred.iterations;
    if (pred.iterations != n1 / w) {
      detail = "W=" + std::to_string(w) + " does not scale N by 1/W";
      return false;
    }
    SimulationResult sim = simulate(g, r, materialize_inputs(p, 11));
    if (sim.outcome != SimOutcome::Completed) {
      detail = "vectorized chain did not complete";
      return false;
    }
    if (w == 1) {
      w1_out = sim.outputs.at("s1");
    } else if (!compare_fields(sim.outputs.at("s1"), w1_out, CompareMode::BitExact).pass) {
      detail = "W=" + std::to_string(w) + " changed the output bits";
      return false;
    }
  }
  detail = "chains match C = L + N within k handoffs; W in {1,2,4} bit-exact";
  return true;
}

bool roofline_reproduction(std::string& detail) {
  RooflineResult r = roofline(130, 9, 4, 58.3, 917.1);
  bool ok = expect(r.byte_num == 65 && r.byte_den == 18, "intensity is not exactly 65/18", detail);
  ok = expect(std::abs(*r.bound_gops - 210.5) < 0.1,
              "bound " + std::to_string(*r.bound_gops) + " not within 0.1 of 210.5", detail) &&
       ok;
  ok = expect(std::abs(*r.required_bandwidth - 254.0) < 0.1,
              "required bandwidth " + std::to_string(*r.required_bandwidth) +
                  " not within 0.1 of 254.0",
              detail) &&
       ok;
  if (ok) {
    std::ostringstream os;
    os << "AI 65/18, bound " << *r.bound_gops << " GOp/s, needs " << *r.required_bandwidth
       << " GB/s";
    detail = os.str();
  }
  return ok;
}

bool fusion(std::string& detail) {
  // Five fusable stencils collapse into one.
  std::ostringstream os;
  os << "{\"inputs\": {\"a\": {\"dtype\": \"float32\", \"dims\": [\"i\",\"j\",\"k\"], "
        "\"data\": {\"type\": \"random\", \"seed\": 23}}},\n \"outputs\": [\"s4\"], "
        "\"shape\": [8,8,8],\n \"program\": {";
  for (int i = 0; i < 5; ++i) {
    std::string src = i == 0 ? "a" : "s" + std::to_string(i - 1);
    os << (i ? "," : "") << "\"s" << i << "\": {\"code\": \"0.5*(" << src << "[i,j,k-1] + " << src
       << "[i,j,k+1])\", \"boundary_condition\": \"shrink\"}";
  }
  os << "}}";
  StencilProgram p = parse_program(os.str());
  DataflowGraph g = build_graph(p);
  DataflowGraph fused = fuse_all(g);
  int units = 0;
  for (const auto& n : fused.nodes) units += n.kind == NodeKind::StencilUnit ? 1 : 0;
  bool ok = expect(units == 1, "chain did not fuse to a single node", detail);

  FieldMap in = materialize_inputs(p, 23);
  FieldMap a = interpret(p, in);
  FieldMap b = interpret(fused.program, in);
  ok = expect(compare_fields(a.at("s4"), b.at("s4"), CompareMode::Relative, 1e-6).pass,
              "fused output differs beyond 1e-6", detail) &&
       ok;
  ok = expect(compare_fields(a.at("s4"), b.at("s4"), CompareMode::BitExact).pass,
              "fused output not bit-exact (no re-association expected)", detail) &&
       ok;

  BufferReport before = analyze(g, LatencyConfig());
  BufferReport after = analyze(fused, LatencyConfig());
  std::int64_t l_before = predict_cycles(g, before).pipeline_latency;
  std::int64_t l_after = predict_cycles(fused, after).pipeline_latency;
  ok = expect(l_after <= l_before, "fusion increased the critical path", detail) && ok;

  // The three rejection rules.
  auto reject = [&](const std::string& json) {
    return find_fusion_candidates(build_graph(parse_program(json))).empty();
  };
  std::string base = R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i"], "data": {"type": "random", "seed": 1}}},
    "outputs": ["c"], "shape": [16],
    "program": {
      "u": {"code": "a[i] + 1", "boundary_condition": "shrink"},
      "c": {"code": "u[i]*2", "boundary_condition": "shrink"}
    }
  })__";
  std::string as_output = base;
  as_output.replace(as_output.find("[\"c\"]"), 5, "[\"u\", \"c\"]");
  std::string deg3 = base;
  deg3.replace(deg3.find("[\"c\"]"), 5, "[\"c\", \"e\"]");
  deg3.replace(deg3.find("\"c\": {\"code\""), 0, "");
  deg3.insert(deg3.rfind('}', deg3.rfind('}') - 1),
              ",\n      \"e\": {\"code\": \"u[i] - 1\", \"boundary_condition\": \"shrink\"}\n");
  std::string diff_bc = base;
  diff_bc.replace(diff_bc.find("\"u\": {\"code\": \"a[i] + 1\", \"boundary_condition\": \"shrink\"}"),
                  std::string("\"u\": {\"code\": \"a[i] + 1\", \"boundary_condition\": \"shrink\"}")
                      .size(),
                  "\"u\": {\"code\": \"a[i] + 1\", \"boundary_condition\": {\"a\": {\"type\": "
                  "\"constant\", \"value\": 0}}}");
  ok = expect(reject(as_output), "output-field intermediate was offered for fusion", detail) && ok;
  ok = expect(reject(deg3), "fan-out intermediate was offered for fusion", detail) && ok;
  ok = expect(reject(diff_bc), "differing boundary definitions were offered for fusion", detail) &&
       ok;
  if (ok) detail = "5-chain fused to one node; L " + std::to_string(l_before) + " -> " +
                   std::to_string(l_after);
  return ok;
}

bool multi_device(std::string& detail) {
  StencilProgram p = parse_program(sptest::five_stencil_json());
  FieldMap in = materialize_inputs(p, 7);

  DataflowGraph single = build_graph(p);
  BufferReport rs = analyze(single, LatencyConfig());
  apply_depths(single, rs);
  SimulationResult sim1 = simulate(single, rs, in);
  bool ok = expect(sim1.outcome == SimOutcome::Completed, "single-device run failed", detail);

  DeviceSpec split;
  split.assignment = {{"b0", 0}, {"b1", 0}, {"b2", 1}, {"b3", 1}, {"b4", 1}};
  split.remote.latency = 20;
  PartitionResult part = partition(build_graph(p), split);
  ok = expect(part.plan.replicated_inputs.count("a2") == 1 &&
                  part.plan.replicated_inputs.at("a2") == std::set<int>{0, 1},
              "a2 reader not replicated to both devices", detail) &&
       ok;
  BufferReport rm = analyze(part.graph, LatencyConfig());
  apply_depths(part.graph, rm);
  SimulationResult sim2 = simulate(part.graph, rm, in);
  ok = expect(sim2.outcome == SimOutcome::Completed, "partitioned run failed", detail) && ok;
  ok = expect(compare_fields(sim1.outputs.at("b4"), sim2.outputs.at("b4"), CompareMode::BitExact)
                  .pass,
              "partitioned output differs from single-device", detail) &&
       ok;

  // On a chain, adding remote latency shifts the cycle count by exactly the
  // analyzed path-delay increase.
  StencilProgram chain = parse_program(sptest::chain_json(2, 16));
  FieldMap cin = materialize_inputs(chain, 11);
  DataflowGraph plain = build_graph(chain);
  BufferReport rp = analyze(plain, LatencyConfig::zero());
  apply_depths(plain, rp);
  SimulationResult base = simulate(plain, rp, cin);

  DeviceSpec spec;
  spec.assignment = {{"s0", 0}, {"s1", 1}};
  spec.remote.latency = 37;
  PartitionResult rpart = partition(build_graph(chain), spec);
  BufferReport rr = analyze(rpart.graph, LatencyConfig::zero());
  apply_depths(rpart.graph, rr);
  SimulationResult remote = simulate(rpart.graph, rr, cin);
  std::int64_t predicted_increase = predict_cycles(rpart.graph, rr).cycles -
                                    predict_cycles(plain, rp).cycles;
  std::int64_t simulated_increase = remote.total_cycles - base.total_cycles;
  ok = expect(remote.outcome == SimOutcome::Completed, "remote chain failed", detail) && ok;
  ok = expect(simulated_increase == predicted_increase,
              "cycle increase " + std::to_string(simulated_increase) + " != analyzed " +
                  std::to_string(predicted_increase),
              detail) &&
       ok;
  if (ok) detail = "a2 replicated; remote latency added " +
                   std::to_string(simulated_increase) + " cycles as analyzed";
  return ok;
}

bool determinism(const std::string& cli, const std::string& program_path, std::string& detail) {
  if (cli.empty() || !fs::exists(cli)) {
    detail = "CLI binary path not provided";
    return false;
  }
  fs::path base = fs::temp_directory_path() / "stencilpipe_accept";
  fs::remove_all(base);
  fs::create_directories(base);
  auto run_once = [&](const std::string& sub) {
    fs::path out = base / sub;
    std::string cmd = "\"" + cli + "\" run -p \"" + program_path + "\" --seed 42 --out \"" +
                      out.string() + "\" >/dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  if (!run_once("a") || !run_once("b")) {
    detail = "CLI run failed";
    return false;
  }
  for (const char* f :
       {"report.json", "prediction.json", "result.json", "compare.json", "outputs/b4.bin",
        "outputs/masks.json"}) {
    std::string a = read_all(base / "a" / f);
    std::string b = read_all(base / "b" / f);
    if (a.empty() || a != b) {
      detail = std::string(f) + " differs between identical runs";
      return false;
    }
  }
  detail = "two seeded runs byte-identical across all reports and outputs";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? argv[1] : "";
  std::string program_path = argc > 2 ? argv[2] : "programs/pipeline5.json";

  criterion(1, "end-to-end run with bit-exact verification and shrink mask", end_to_end);
  criterion(2, "internal buffer sizes match the closed form and the window oracle",
            buffer_formula);
  criterion(3, "analyzed depths are deadlock-free; forced minimum wedges with a witness",
            deadlock_freedom);
  criterion(4, "linear chains hit C = L + N within the handoff slack; vectorization is exact",
            performance_model);
  criterion(5, "arithmetic intensity and roofline bounds reproduce exactly",
            roofline_reproduction);
  criterion(6, "aggressive fusion collapses chains, preserves values, and rejects the unfusable",
            fusion);
  criterion(7, "partitioning replicates inputs and prices remote latency exactly", multi_device);
  criterion(8, "identical seeded runs are byte-identical",
            [&](std::string& d) { return determinism(cli, program_path, d); });

  if (failures == 0) {
    std::printf("all 8 criteria passed\n");
  } else {
    std::printf("%d criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
