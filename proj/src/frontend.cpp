#include "stencilpipe/program.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace stencilpipe {

using nlohmann::json;

const FieldSpec* StencilProgram::find_input(const std::string& name) const {
  for (const auto& f : inputs) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const StencilNode* StencilProgram::find_node(const std::string& name) const {
  for (const auto& n : nodes) {
    if (n.name == name) return &n;
  }
  return nullptr;
}

std::vector<int> StencilProgram::field_dim_indices(const std::string& field) const {
  std::vector<int> idx;
  if (const FieldSpec* f = find_input(field)) {
    for (const auto& d : f->dims) {
      auto it = std::find(dim_names.begin(), dim_names.end(), d);
      idx.push_back(static_cast<int>(it - dim_names.begin()));
    }
    return idx;
  }
  idx.resize(dim_names.size());
  for (std::size_t d = 0; d < idx.size(); ++d) idx[d] = static_cast<int>(d);
  return idx;
}

Shape StencilProgram::field_shape(const std::string& field) const {
  Shape out;
  for (int d : field_dim_indices(field)) out.push_back(shape[d]);
  return out;
}

DType StencilProgram::field_dtype(const std::string& field) const {
  if (const FieldSpec* f = find_input(field)) return f->dtype;
  const StencilNode* n = find_node(field);
  if (!n) throw ProgramError("unknown field \"" + field + "\"");
  // A node's dtype is the dtype of what it consumes; resolved recursively
  // down to program inputs (validation rejects mixes).
  for (const Expr* a : collect_accesses(n->expression)) {
    return field_dtype(a->field);
  }
  return DType::Float32;  // constant-only node
}

bool StencilProgram::is_input(const std::string& field) const {
  return find_input(field) != nullptr;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ProgramError(msg); }

DataSource parse_data_source(const json& j, const std::string& input) {
  DataSource src;
  if (j.is_number()) {
    src.kind = DataSource::Kind::Constant;
    src.value = j.get<double>();
    return src;
  }
  if (!j.is_object() || !j.contains("type")) {
    fail("data source for \"" + input + "\" must be a number or an object with \"type\"");
  }
  std::string type = j.at("type").get<std::string>();
  if (type == "file") {
    src.kind = DataSource::Kind::File;
    src.path = j.at("path").get<std::string>();
  } else if (type == "constant") {
    src.kind = DataSource::Kind::Constant;
    src.value = j.at("value").get<double>();
  } else if (type == "random") {
    src.kind = DataSource::Kind::Random;
    src.seed = j.value("seed", 0ull);
  } else {
    fail("unknown data source type \"" + type + "\" for input \"" + input + "\"");
  }
  return src;
}

std::vector<std::string> infer_dims(const json& doc, const std::vector<FieldSpec>& inputs,
                                    std::size_t rank) {
  if (doc.contains("dimensions")) {
    auto dims = doc.at("dimensions").get<std::vector<std::string>>();
    if (dims.size() != rank) fail("\"dimensions\" length must match \"shape\" length");
    return dims;
  }
  for (const auto& f : inputs) {
    if (f.dims.size() == rank) return f.dims;
  }
  fail("cannot infer dimension names: no full-rank input and no \"dimensions\" key");
}

bool is_subsequence(const std::vector<std::string>& sub, const std::vector<std::string>& full) {
  std::size_t i = 0;
  for (const auto& d : full) {
    if (i < sub.size() && sub[i] == d) ++i;
  }
  return i == sub.size();
}

}  // namespace

StencilProgram parse_program(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("JSON parse error: ") + e.what());
  }
  if (!doc.is_object()) fail("program document must be a JSON object");
  for (const char* key : {"inputs", "outputs", "shape", "program"}) {
    if (!doc.contains(key)) fail(std::string("missing top-level key \"") + key + "\"");
  }

  StencilProgram p;
  p.shape = doc.at("shape").get<Shape>();
  if (p.shape.empty() || p.shape.size() > 3) fail("\"shape\" must have 1 to 3 dimensions");
  for (auto e : p.shape) {
    if (e <= 0) fail("shape extents must be positive");
  }

  for (const auto& [name, spec] : doc.at("inputs").items()) {
    FieldSpec f;
    f.name = name;
    if (!spec.contains("dtype")) fail("input \"" + name + "\" is missing \"dtype\"");
    f.dtype = dtype_from_name(spec.at("dtype").get<std::string>());
    f.dims = spec.value("dims", std::vector<std::string>{});
    if (spec.contains("data")) f.data = parse_data_source(spec.at("data"), name);
    p.inputs.push_back(std::move(f));
  }
  if (doc.contains("data")) {
    for (const auto& [name, src] : doc.at("data").items()) {
      bool found = false;
      for (auto& f : p.inputs) {
        if (f.name == name) {
          f.data = parse_data_source(src, name);
          found = true;
        }
      }
      if (!found) fail("\"data\" names unknown input \"" + name + "\"");
    }
  }

  p.dim_names = infer_dims(doc, p.inputs, p.shape.size());
  for (const auto& f : p.inputs) {
    if (!is_subsequence(f.dims, p.dim_names)) {
      fail("input \"" + f.name + "\" declares dims that are not an ordered subsequence of " +
           "the program dimensions");
    }
    if (f.dims.size() > p.shape.size()) {
      fail("input \"" + f.name + "\" has higher rank than the iteration space");
    }
  }

  p.outputs = doc.at("outputs").get<std::vector<std::string>>();
  p.vectorization = doc.value("vectorization", 1);
  if (p.vectorization < 1) fail("\"vectorization\" must be >= 1");

  // Accessible fields: all inputs plus every node's output (full rank).
  std::vector<AccessibleField> accessible;
  for (const auto& f : p.inputs) accessible.push_back({f.name, f.dims});
  const json& prog = doc.at("program");
  if (!prog.is_object()) fail("\"program\" must be an object of stencil nodes");
  for (auto it = prog.begin(); it != prog.end(); ++it) {
    accessible.push_back({it.key(), p.dim_names});
  }

  for (const auto& [name, node] : prog.items()) {
    StencilNode n;
    n.name = name;
    if (!node.contains("code")) fail("node \"" + name + "\" is missing \"code\"");
    n.code = node.at("code").get<std::string>();
    try {
      n.expression = parse_expression(n.code, accessible, p.dim_names);
    } catch (const ProgramError& e) {
      fail("in node \"" + name + "\": " + e.what());
    }
    if (!node.contains("boundary_condition")) {
      fail("node \"" + name + "\" is missing \"boundary_condition\"");
    }
    const json& bc = node.at("boundary_condition");
    if (bc.is_string()) {
      if (bc.get<std::string>() != "shrink") {
        fail("node \"" + name + "\": boundary_condition string must be \"shrink\"");
      }
      n.shrink = true;
    } else if (bc.is_object()) {
      for (const auto& [input, cond] : bc.items()) {
        BoundaryCondition c;
        std::string type = cond.at("type").get<std::string>();
        if (type == "constant") {
          c.kind = BoundaryCondition::Kind::Constant;
          c.value = cond.at("value").get<double>();
        } else if (type == "copy") {
          c.kind = BoundaryCondition::Kind::Copy;
        } else {
          fail("node \"" + name + "\": unknown boundary condition type \"" + type + "\"");
        }
        n.input_conditions[input] = c;
      }
    } else {
      fail("node \"" + name + "\": boundary_condition must be \"shrink\" or an object");
    }
    p.nodes.push_back(std::move(n));
  }

  if (doc.contains("devices")) {
    const json& dv = doc.at("devices");
    DeviceSpec spec;
    if (dv.contains("count")) spec.count = dv.at("count").get<int>();
    if (dv.contains("assignment")) {
      for (const auto& [node, dev] : dv.at("assignment").items()) {
        spec.assignment[node] = dev.get<int>();
      }
    }
    if (dv.contains("remote")) {
      const json& r = dv.at("remote");
      spec.remote.latency = r.value("latency", 0);
      spec.remote.bandwidth = r.value("bandwidth", 1e30);
      spec.remote.links = r.value("links", 1);
    }
    p.devices = spec;
  }

  validate_program(p);
  return p;
}

const StencilProgram& validate_program(const StencilProgram& p) {
  std::set<std::string> produced;
  for (const auto& f : p.inputs) {
    if (!produced.insert(f.name).second) fail("duplicate input \"" + f.name + "\"");
  }
  for (const auto& n : p.nodes) {
    if (!produced.insert(n.name).second) {
      fail("multiple producers for field \"" + n.name + "\"");
    }
  }

  if (p.shape.empty()) fail("empty shape");
  if (p.shape.back() % p.vectorization != 0) {
    fail("vectorization " + std::to_string(p.vectorization) +
         " does not divide the innermost extent " + std::to_string(p.shape.back()));
  }

  for (const auto& out : p.outputs) {
    if (!p.find_node(out)) fail("output \"" + out + "\" is not produced by any node");
  }

  // Cycle check over the field-level dependency relation (inputs are roots).
  std::map<std::string, int> state;  // 0 new, 1 visiting, 2 done
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    const StencilNode* n = p.find_node(name);
    if (!n) return;  // program input
    int& s = state[name];
    if (s == 2) return;
    if (s == 1) {
      auto it = std::find(stack.begin(), stack.end(), name);
      std::string cycle;
      for (; it != stack.end(); ++it) cycle += *it + " -> ";
      fail("dependency cycle: " + cycle + name);
    }
    s = 1;
    stack.push_back(name);
    for (const Expr* a : collect_accesses(n->expression)) visit(a->field);
    stack.pop_back();
    s = 2;
  };
  for (const auto& n : p.nodes) visit(n.name);

  for (const auto& n : p.nodes) {
    std::set<std::string> accessed;
    DType node_dtype = DType::Float32;
    bool dtype_set = false;
    bool has_transcendental = false;
    for_each_unique_node(n.expression, [&](const Expr& e) {
      if (e.kind == ExprKind::Call &&
          (e.fn == CallFn::Sqrt || e.fn == CallFn::Exp || e.fn == CallFn::Log ||
           e.fn == CallFn::Pow)) {
        has_transcendental = true;
      }
    });
    for (const Expr* a : collect_accesses(n.expression)) {
      accessed.insert(a->field);
      if (!p.is_input(a->field) && !p.find_node(a->field)) {
        fail("node \"" + n.name + "\" references undeclared field \"" + a->field + "\"");
      }
      DType t = p.field_dtype(a->field);
      if (dtype_set && t != node_dtype) {
        fail("node \"" + n.name + "\": dtype mismatch between inputs (" + dtype_name(node_dtype) +
             " vs " + dtype_name(t) + " for \"" + a->field + "\")");
      }
      node_dtype = t;
      dtype_set = true;
      bool oob = false;
      for (auto o : a->offsets) oob = oob || o != 0;
      if (oob && !n.shrink) {
        auto it = n.input_conditions.find(a->field);
        if (it == n.input_conditions.end()) {
          fail("node \"" + n.name + "\": input \"" + a->field +
               "\" can read out of bounds but has no boundary condition");
        }
      }
    }
    if (dtype_set && !is_float(node_dtype) && has_transcendental) {
      fail("node \"" + n.name + "\": transcendental functions require a floating dtype");
    }
    for (const auto& [input, cond] : n.input_conditions) {
      (void)cond;
      if (!accessed.count(input)) {
        fail("node \"" + n.name + "\": boundary condition for \"" + input +
             "\" which the node does not read");
      }
    }
  }

  return p;
}

StencilProgram apply_vectorization(StencilProgram program, std::int64_t width) {
  if (width < 1) fail("vectorization must be >= 1");
  if (program.shape.back() % width != 0) {
    fail("vectorization " + std::to_string(width) + " does not divide the innermost extent " +
         std::to_string(program.shape.back()));
  }
  program.vectorization = width;
  return program;
}

std::string serialize_program(const StencilProgram& p) {
  json doc;
  doc["dimensions"] = p.dim_names;
  doc["shape"] = p.shape;
  json inputs = json::object();
  for (const auto& f : p.inputs) {
    json spec;
    spec["dtype"] = dtype_name(f.dtype);
    spec["dims"] = f.dims;
    switch (f.data.kind) {
      case DataSource::Kind::None: break;
      case DataSource::Kind::File: spec["data"] = {{"type", "file"}, {"path", f.data.path}}; break;
      case DataSource::Kind::Constant:
        spec["data"] = {{"type", "constant"}, {"value", f.data.value}};
        break;
      case DataSource::Kind::Random:
        spec["data"] = {{"type", "random"}, {"seed", f.data.seed}};
        break;
    }
    inputs[f.name] = spec;
  }
  doc["inputs"] = inputs;
  doc["outputs"] = p.outputs;
  if (p.vectorization != 1) doc["vectorization"] = p.vectorization;
  json prog = json::object();
  for (const auto& n : p.nodes) {
    json node;
    node["code"] = print_expression(n.expression);
    if (n.shrink) {
      node["boundary_condition"] = "shrink";
    } else {
      json bc = json::object();
      for (const auto& [input, cond] : n.input_conditions) {
        if (cond.kind == BoundaryCondition::Kind::Constant) {
          bc[input] = {{"type", "constant"}, {"value", cond.value}};
        } else {
          bc[input] = {{"type", "copy"}};
        }
      }
      node["boundary_condition"] = bc;
    }
    prog[n.name] = node;
  }
  doc["program"] = prog;
  if (p.devices) {
    json dv;
    dv["count"] = p.devices->count;
    if (!p.devices->assignment.empty()) dv["assignment"] = p.devices->assignment;
    dv["remote"] = {{"latency", p.devices->remote.latency},
                    {"bandwidth", p.devices->remote.bandwidth},
                    {"links", p.devices->remote.links}};
    doc["devices"] = dv;
  }
  return doc.dump(2) + "\n";
}

}  // namespace stencilpipe
