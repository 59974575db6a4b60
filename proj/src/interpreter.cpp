#include "stencilpipe/interpreter.hpp"

#include <algorithm>

#include "stencilpipe/evaluate.hpp"

namespace stencilpipe {

namespace {

// Stencil names in dependency order, ties broken by name.
std::vector<const StencilNode*> node_order(const StencilProgram& p) {
  std::vector<const StencilNode*> pending;
  for (const auto& n : p.nodes) pending.push_back(&n);
  std::sort(pending.begin(), pending.end(),
            [](const StencilNode* a, const StencilNode* b) { return a->name < b->name; });
  std::vector<const StencilNode*> order;
  std::vector<bool> done(pending.size(), false);
  auto is_ready = [&](const StencilNode* n) {
    for (const Expr* a : collect_accesses(n->expression)) {
      if (p.is_input(a->field)) continue;
      bool produced = false;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        if (pending[i]->name == a->field) produced = done[i];
      }
      if (!produced) return false;
    }
    return true;
  };
  for (std::size_t round = 0; round < pending.size(); ++round) {
    bool progressed = false;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (done[i] || !is_ready(pending[i])) continue;
      order.push_back(pending[i]);
      done[i] = true;
      progressed = true;
    }
    if (order.size() == pending.size()) break;
    if (!progressed) throw ProgramError("dependency cycle in program");
  }
  return order;
}

}  // namespace

FieldMap interpret_all(const StencilProgram& program, const FieldMap& inputs) {
  FieldMap fields;
  for (const auto& f : program.inputs) {
    auto it = inputs.find(f.name);
    if (it == inputs.end()) throw ExecutionError("missing input \"" + f.name + "\"");
    if (it->second.shape != program.field_shape(f.name)) {
      throw ExecutionError("input \"" + f.name + "\" has the wrong shape");
    }
    if (it->second.dtype != f.dtype) {
      throw ExecutionError("input \"" + f.name + "\" has the wrong dtype");
    }
    fields.emplace(f.name, it->second);
  }

  std::int64_t total = volume(program.shape);
  for (const StencilNode* node : node_order(program)) {
    CellEvaluator eval(program, *node);
    FieldArray out = FieldArray::make(node->name, eval.dtype(), program.shape);
    auto fetch = [&fields](const CellEvaluator::AccessPlan& plan, std::int64_t own_flat,
                           std::int64_t) -> EvalResult {
      const FieldArray& a = fields.at(plan.field);
      return {a.values[static_cast<std::size_t>(own_flat)],
              a.valid[static_cast<std::size_t>(own_flat)] != 0};
    };
    std::int64_t pos[3] = {0, 0, 0};
    for (std::int64_t flat = 0; flat < total; ++flat) {
      unflatten(flat, program.shape, pos);
      EvalResult r = eval.evaluate(pos, fetch);
      out.values[static_cast<std::size_t>(flat)] = r.value;
      out.valid[static_cast<std::size_t>(flat)] = r.valid ? 1 : 0;
    }
    fields.emplace(node->name, std::move(out));
  }
  return fields;
}

FieldMap interpret(const StencilProgram& program, const FieldMap& inputs) {
  FieldMap all = interpret_all(program, inputs);
  FieldMap out;
  for (const auto& name : program.outputs) {
    out.emplace(name, all.at(name));
  }
  return out;
}

}  // namespace stencilpipe
