#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "stencilpipe/simulator.hpp"

using namespace stencilpipe;

namespace {

FieldMap zero_inputs(const StencilProgram& p) {
  FieldMap m;
  for (const auto& f : p.inputs) {
    m.emplace(f.name, FieldArray::make(f.name, f.dtype, p.field_shape(f.name)));
  }
  return m;
}

}  // namespace

TEST_CASE("zero inputs propagate zeros; shrink marks only the boundary ring") {
  StencilProgram p = parse_program(sptest::five_stencil_json());
  FieldMap out = interpret(p, zero_inputs(p));
  const FieldArray& b4 = out.at("b4");
  Shape shape = p.shape;
  std::int64_t coords[3];
  for (std::int64_t f = 0; f < b4.size(); ++f) {
    unflatten(f, shape, coords);
    bool boundary = coords[0] == 0 || coords[0] == shape[0] - 1;  // b3 reads b1[i-1], b1[i+1]
    CHECK(b4.valid[f] == (boundary ? 0 : 1));
    if (b4.valid[f]) CHECK(b4.values[f].f == 0.0);
  }
}

TEST_CASE("identity stencil copies its input with an all-valid mask") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i","j"],
                     "data": {"type": "random", "seed": 21}}},
    "outputs": ["c"], "shape": [8, 8],
    "program": {"c": {"code": "a[i,j]", "boundary_condition": "shrink"}}
  })__");
  FieldMap in = materialize_inputs(p);
  FieldMap out = interpret(p, in);
  CompareReport r = compare_fields(out.at("c"), in.at("a"), CompareMode::BitExact);
  // Names differ but content must match.
  CHECK(r.pass);
  for (auto v : out.at("c").valid) CHECK(v == 1);
}

TEST_CASE("constant and copy boundary conditions resolve out-of-bounds reads") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i"], "data": {"type": "random", "seed": 2}},
               "b": {"dtype": "float32", "dims": ["i"], "data": {"type": "random", "seed": 4}}},
    "outputs": ["c"], "shape": [8],
    "program": {"c": {"code": "a[i-1] + b[i+1]",
                      "boundary_condition": {"a": {"type": "constant", "value": 1},
                                             "b": {"type": "copy"}}}}
  })__");
  FieldMap in = materialize_inputs(p);
  FieldMap out = interpret(p, in);
  const FieldArray& c = out.at("c");
  for (auto v : c.valid) CHECK(v == 1);
  // At i=0 the a-read is out of bounds: constant 1.
  float b1 = static_cast<float>(in.at("b").values[1].f);
  CHECK(static_cast<float>(c.values[0].f) == 1.0f + b1);
  // At i=7 the b-read is out of bounds: copy takes b's center value.
  float a6 = static_cast<float>(in.at("a").values[6].f);
  float b7 = static_cast<float>(in.at("b").values[7].f);
  CHECK(static_cast<float>(c.values[7].f) == a6 + b7);
}

TEST_CASE("invalidity propagates from operands into consumers") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i"], "data": {"type": "random", "seed": 2}}},
    "outputs": ["d"], "shape": [8],
    "program": {
      "c": {"code": "a[i-1] + a[i+1]", "boundary_condition": "shrink"},
      "d": {"code": "c[i] + 1", "boundary_condition": "shrink"}
    }
  })__");
  FieldMap out = interpret(p, materialize_inputs(p));
  const FieldArray& d = out.at("d");
  CHECK(d.valid[0] == 0);
  CHECK(d.valid[7] == 0);
  for (std::int64_t i = 1; i < 7; ++i) CHECK(d.valid[i] == 1);
}

TEST_CASE("interpretation does not depend on node declaration order") {
  StencilProgram p = parse_program(sptest::five_stencil_json());
  StencilProgram q = p;
  std::reverse(q.nodes.begin(), q.nodes.end());
  FieldMap in = materialize_inputs(p);
  FieldMap a = interpret(p, in);
  FieldMap b = interpret(q, in);
  CHECK(compare_fields(a.at("b4"), b.at("b4"), CompareMode::BitExact).pass);
}

TEST_CASE("comparison modes: bit-exact failures name the first index") {
  StencilProgram p = parse_program(sptest::five_stencil_json());
  FieldMap in = materialize_inputs(p);
  FieldMap out = interpret(p, in);
  FieldArray a = out.at("b4");
  FieldArray b = a;
  CompareReport same = compare_fields(a, b, CompareMode::BitExact);
  CHECK(same.pass);
  CHECK(same.mismatches == 0);

  // One-ulp difference on one valid cell fails bit-exact, passes relative.
  std::int64_t idx = -1;
  for (std::int64_t i = 0; i < b.size(); ++i) {
    if (b.valid[i] && b.values[i].f != 0.0) {
      idx = i;
      break;
    }
  }
  REQUIRE(idx >= 0);
  float v = static_cast<float>(b.values[idx].f);
  b.values[idx] = Scalar::of_double(DType::Float32, std::nextafterf(v, 2 * v + 1));
  CompareReport diff = compare_fields(a, b, CompareMode::BitExact);
  CHECK(!diff.pass);
  CHECK(diff.mismatches == 1);
  CHECK(diff.first_detail.find("(") != std::string::npos);
  CompareReport rel = compare_fields(a, b, CompareMode::Relative, 1e-6);
  CHECK(rel.pass);

  // Mask differences fail in both modes.
  FieldArray c = a;
  c.valid[0] = c.valid[0] ? 0 : 1;
  CHECK(!compare_fields(a, c, CompareMode::BitExact).pass);
  CHECK(!compare_fields(a, c, CompareMode::Relative, 1e-6).pass);
}

TEST_CASE("integer programs: arithmetic, min/max/abs, and division faults") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "int32", "dims": ["i"], "data": {"type": "constant", "value": 7}}},
    "outputs": ["c"], "shape": [8],
    "program": {"c": {"code": "max(a[i], 3) + min(a[i], 2) - abs(a[i])", "boundary_condition": "shrink"}}
  })__");
  FieldMap out = interpret(p, materialize_inputs(p));
  CHECK(out.at("c").values[0].i == 7 + 2 - 7);

  StencilProgram q = parse_program(R"__({
    "inputs": {"a": {"dtype": "int32", "dims": ["i"], "data": {"type": "constant", "value": 7}}},
    "outputs": ["c"], "shape": [8],
    "program": {"c": {"code": "a[i] / (a[i] - 7)", "boundary_condition": "shrink"}}
  })__");
  CHECK_THROWS_AS(interpret(q, materialize_inputs(q)), ExecutionError);
}

TEST_CASE("float division by zero propagates infinity") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i"], "data": {"type": "constant", "value": 1}}},
    "outputs": ["c"], "shape": [4],
    "program": {"c": {"code": "a[i] / (a[i] - 1)", "boundary_condition": "shrink"}}
  })__");
  FieldMap out = interpret(p, materialize_inputs(p));
  CHECK(std::isinf(out.at("c").values[0].f));
}

TEST_CASE("data-dependent ternaries select per cell") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i"], "data": {"type": "random", "seed": 5}}},
    "outputs": ["c"], "shape": [16],
    "program": {"c": {"code": "a[i] < 0.5 ? 1 : 2", "boundary_condition": "shrink"}}
  })__");
  FieldMap in = materialize_inputs(p);
  FieldMap out = interpret(p, in);
  for (std::int64_t i = 0; i < 16; ++i) {
    float expect = in.at("a").values[i].f < 0.5 ? 1.0f : 2.0f;
    CHECK(static_cast<float>(out.at("c").values[i].f) == expect);
  }
}

TEST_CASE("constant-only stencils need no inputs") {
  StencilProgram p = parse_program(R"__({
    "inputs": {},
    "dimensions": ["i"],
    "outputs": ["c"], "shape": [8],
    "program": {"c": {"code": "2 + 3*0.5", "boundary_condition": {}}}
  })__");
  FieldMap out = interpret(p, {});
  for (std::int64_t i = 0; i < 8; ++i) {
    CHECK(static_cast<float>(out.at("c").values[i].f) == 3.5f);
    CHECK(out.at("c").valid[i] == 1);
  }
  // And they stream the same way.
  DataflowGraph g = build_graph(p);
  BufferReport r = analyze(g, LatencyConfig::zero());
  apply_depths(g, r);
  SimulationResult sim = simulate(g, r, {});
  REQUIRE(sim.outcome == SimOutcome::Completed);
  CHECK(compare_fields(sim.outputs.at("c"), out.at("c"), CompareMode::BitExact).pass);
}

TEST_CASE("the interpreter rejects missing or misshapen inputs") {
  StencilProgram p = parse_program(R"__({
    "inputs": {"a": {"dtype": "float32", "dims": ["i"]}},
    "outputs": ["c"], "shape": [8],
    "program": {"c": {"code": "a[i]", "boundary_condition": "shrink"}}
  })__");
  CHECK_THROWS_AS(interpret(p, {}), ExecutionError);
  FieldMap wrong;
  wrong.emplace("a", FieldArray::make("a", DType::Float32, {4}));
  CHECK_THROWS_AS(interpret(p, wrong), ExecutionError);
}
