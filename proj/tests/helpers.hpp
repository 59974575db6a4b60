#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stencilpipe/analysis.hpp"
#include "stencilpipe/field.hpp"
#include "stencilpipe/graph.hpp"
#include "stencilpipe/interpreter.hpp"
#include "stencilpipe/program.hpp"
#include "stencilpipe/simulator.hpp"

namespace sptest {

using namespace stencilpipe;

/// The 5-stencil reference program: two 3-D inputs and one 2-D input, a
/// diamond of four dependent stencils behind a shared producer.
inline std::string five_stencil_json() {
  return R"__({
  "inputs": {
    "a0": {"dtype": "float32", "dims": ["i", "j", "k"], "data": {"type": "random", "seed": 7}},
    "a1": {"dtype": "float32", "dims": ["i", "j", "k"], "data": {"type": "random", "seed": 8}},
    "a2": {"dtype": "float32", "dims": ["i", "k"], "data": {"type": "random", "seed": 9}}
  },
  "outputs": ["b4"],
  "shape": [32, 32, 32],
  "program": {
    "b0": {
      "code": "a0[i,j,k] + a1[i,j,k]",
      "boundary_condition": {
        "a0": {"type": "constant", "value": 1},
        "a1": {"type": "copy"}
      }
    },
    "b1": {"code": "0.5*(b0[i,j,k] + a2[i,k])", "boundary_condition": "shrink"},
    "b2": {"code": "0.5*(b0[i,j,k] - a2[i,k])", "boundary_condition": "shrink"},
    "b3": {"code": "b1[i-1,j,k] + b1[i+1,j,k]", "boundary_condition": "shrink"},
    "b4": {"code": "b2[i,j,k] + b3[i,j,k]", "boundary_condition": "shrink"}
  }
})__";
}

/// Join diamond: A feeds B and C, B feeds C, so the A->C edge needs
/// a delay buffer covering B's initialization.
inline std::string diamond_json(std::int64_t extent = 8) {
  std::ostringstream os;
  os << R"__({
  "inputs": {"a": {"dtype": "float32", "dims": ["i", "j", "k"],
                   "data": {"type": "random", "seed": 3}}},
  "outputs": ["C"],
  "shape": [)__" << extent << ", " << extent << ", " << extent << R"__(],
  "program": {
    "A": {"code": "a[i,j,k] + 1", "boundary_condition": "shrink"},
    "B": {"code": "A[i-1,j,k] + A[i+1,j,k]", "boundary_condition": "shrink"},
    "C": {"code": "A[i,j,k] + B[i,j,k]", "boundary_condition": "shrink"}
  }
})__";
  return os.str();
}

/// Linear chain of `k` identical centered stencils over `extent`^3.
inline std::string chain_json(int k, std::int64_t extent = 16, std::int64_t vectorize = 1) {
  std::ostringstream os;
  os << "{\n  \"inputs\": {\"a\": {\"dtype\": \"float32\", \"dims\": [\"i\",\"j\",\"k\"], "
        "\"data\": {\"type\": \"random\", \"seed\": 11}}},\n";
  os << "  \"outputs\": [\"s" << k - 1 << "\"],\n";
  os << "  \"shape\": [" << extent << ", " << extent << ", " << extent << "],\n";
  if (vectorize != 1) os << "  \"vectorization\": " << vectorize << ",\n";
  os << "  \"program\": {\n";
  for (int i = 0; i < k; ++i) {
    std::string src = i == 0 ? "a" : "s" + std::to_string(i - 1);
    os << "    \"s" << i << "\": {\"code\": \"0.25*(" << src << "[i,j,k-1] + " << src
       << "[i,j,k+1]) + " << src << "[i,j,k]\", \"boundary_condition\": {\"" << src
       << "\": {\"type\": \"constant\", \"value\": 0}}}";
    os << (i + 1 < k ? ",\n" : "\n");
  }
  os << "  }\n}\n";
  return os.str();
}

struct PipelineRun {
  StencilProgram program;
  DataflowGraph graph;
  BufferReport report;
  SimulationResult sim;
  FieldMap reference;
};

inline PipelineRun run_pipeline(const std::string& json, const LatencyConfig& lat = LatencyConfig::zero(),
                                std::int64_t seed = 5, std::int64_t limit = -1) {
  PipelineRun r;
  r.program = parse_program(json);
  r.graph = build_graph(r.program);
  r.report = analyze(r.graph, lat);
  apply_depths(r.graph, r.report);
  FieldMap inputs = materialize_inputs(r.program, seed);
  SimOptions so;
  so.limit = limit;
  r.sim = simulate(r.graph, r.report, inputs, so);
  r.reference = interpret(r.program, inputs);
  return r;
}

/// Brute-force window oracle: enumerate the flattened stream by odometer
/// (no use of the flattening formula), locate every operand of one interior
/// cell by coordinate search, and return the smallest contiguous window
/// holding them all.
inline std::int64_t sliding_window_oracle(const Shape& shape,
                                          const std::vector<std::vector<std::int64_t>>& offsets) {
  std::vector<std::vector<std::int64_t>> stream;  // position -> coords
  std::vector<std::int64_t> c(shape.size(), 0);
  while (true) {
    stream.push_back(c);
    int d = static_cast<int>(shape.size()) - 1;
    while (d >= 0 && ++c[static_cast<std::size_t>(d)] == shape[static_cast<std::size_t>(d)]) {
      c[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }
  // Interior cell: every offset lands in bounds.
  std::vector<std::int64_t> center(shape.size());
  for (std::size_t d = 0; d < shape.size(); ++d) center[d] = shape[d] / 2;
  std::int64_t lo = -1, hi = -1;
  for (const auto& off : offsets) {
    std::vector<std::int64_t> target = center;
    for (std::size_t d = 0; d < off.size(); ++d) target[d] += off[d];
    std::int64_t pos = -1;
    for (std::size_t s = 0; s < stream.size(); ++s) {
      if (stream[s] == target) pos = static_cast<std::int64_t>(s);
    }
    if (pos < 0) throw std::runtime_error("oracle: operand out of bounds");
    lo = lo < 0 ? pos : std::min(lo, pos);
    hi = hi < 0 ? pos : std::max(hi, pos);
  }
  return hi - lo + 1;
}

/// Deterministic random stencil program generator (full-rank fields,
/// offsets in [-2, 2]).
inline std::string random_program_json(std::mt19937& rng, int max_nodes, const Shape& shape,
                                       std::int64_t vectorize, bool shrink_bc) {
  auto randint = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
  };
  int n_inputs = randint(1, 2);
  int n_nodes = randint(2, max_nodes);
  std::vector<std::string> fields;
  std::ostringstream os;
  os << "{\n  \"inputs\": {";
  for (int i = 0; i < n_inputs; ++i) {
    if (i) os << ", ";
    os << "\"a" << i << "\": {\"dtype\": \"float32\", \"dims\": [";
    for (std::size_t d = 0; d < shape.size(); ++d) {
      os << (d ? ", " : "") << "\"" << static_cast<char>('i' + d) << "\"";
    }
    os << "], \"data\": {\"type\": \"random\", \"seed\": " << randint(1, 1000) << "}}";
    fields.push_back("a" + std::to_string(i));
  }
  os << "},\n  \"shape\": [";
  for (std::size_t d = 0; d < shape.size(); ++d) os << (d ? ", " : "") << shape[d];
  os << "],\n";
  if (vectorize != 1) os << "  \"vectorization\": " << vectorize << ",\n";

  std::vector<std::string> nodes;
  std::ostringstream prog;
  std::vector<std::vector<std::string>> node_sources(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    std::string name = "s" + std::to_string(i);
    int n_srcs = randint(1, std::min<int>(2, static_cast<int>(fields.size())));
    std::vector<std::string> srcs;
    for (int s = 0; s < n_srcs; ++s) {
      std::string f = fields[static_cast<std::size_t>(randint(0, static_cast<int>(fields.size()) - 1))];
      bool dup = false;
      for (const auto& x : srcs) dup = dup || x == f;
      if (!dup) srcs.push_back(f);
    }
    std::ostringstream code;
    bool first_term = true;
    auto access = [&](const std::string& f) {
      std::ostringstream a;
      a << f << "[";
      for (std::size_t d = 0; d < shape.size(); ++d) {
        int off = randint(-2, 2);
        a << (d ? "," : "") << static_cast<char>('i' + d);
        if (off > 0) a << "+" << off;
        if (off < 0) a << off;
      }
      a << "]";
      return a.str();
    };
    for (const auto& f : srcs) {
      int n_acc = randint(1, 3);
      for (int a = 0; a < n_acc; ++a) {
        if (!first_term) code << (randint(0, 2) == 0 ? " - " : " + ");
        first_term = false;
        switch (randint(0, 6)) {
          case 0: code << "0.5*" << access(f); break;
          case 1: code << "min(" << access(f) << ", 0.75)"; break;
          case 2: code << "max(" << access(f) << ", 0.25)"; break;
          case 3: code << "sqrt(abs(" << access(f) << "))"; break;
          case 4:
            code << "(" << access(f) << " < 0.5 ? " << access(f) << " : " << access(f) << "*2)";
            break;
          default: code << access(f); break;
        }
      }
    }
    if (i) prog << ",\n";
    prog << "    \"" << name << "\": {\"code\": \"" << code.str() << "\", ";
    if (shrink_bc) {
      prog << "\"boundary_condition\": \"shrink\"}";
    } else {
      prog << "\"boundary_condition\": {";
      for (std::size_t s = 0; s < srcs.size(); ++s) {
        bool copy = randint(0, 1) == 0;
        prog << (s ? ", " : "") << "\"" << srcs[s] << "\": "
             << (copy ? "{\"type\": \"copy\"}"
                      : "{\"type\": \"constant\", \"value\": 0.5}");
      }
      prog << "}}";
    }
    fields.push_back(name);
    nodes.push_back(name);
    node_sources[static_cast<std::size_t>(i)] = srcs;
  }

  // Outputs: every node nobody consumes.
  std::vector<std::string> outputs;
  for (const auto& n : nodes) {
    bool used = false;
    for (const auto& srcs : node_sources) {
      for (const auto& s : srcs) used = used || s == n;
    }
    if (!used) outputs.push_back(n);
  }
  if (outputs.empty()) outputs.push_back(nodes.back());

  os << "  \"outputs\": [";
  for (std::size_t i = 0; i < outputs.size(); ++i) os << (i ? ", " : "") << "\"" << outputs[i] << "\"";
  os << "],\n  \"program\": {\n" << prog.str() << "\n  }\n}\n";
  return os.str();
}

inline LatencyConfig random_latencies(std::mt19937& rng) {
  LatencyConfig lat;
  lat.fallback = static_cast<std::int64_t>(rng() % 50);
  for (const char* op : {"add", "mul", "div", "sub"}) {
    lat.cycles[op] = static_cast<std::int64_t>(rng() % 50);
  }
  return lat;
}

}  // namespace sptest
