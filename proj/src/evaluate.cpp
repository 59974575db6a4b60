#include "stencilpipe/evaluate.hpp"

#include <unordered_set>

namespace stencilpipe {

CellEvaluator::CellEvaluator(const StencilProgram& program, const StencilNode& node)
    : program_(&program), node_(&node), shrink_(node.shrink) {
  dtype_ = program.field_dtype(node.name);
  std::vector<std::int64_t> strides = strides_of(program.shape);

  for (const Expr* acc : collect_accesses(node.expression)) {
    AccessPlan p;
    p.access = acc;
    p.field = acc->field;
    p.dim_idx = program.field_dim_indices(acc->field);
    p.extents = program.field_shape(acc->field);
    p.own_strides = strides_of(p.extents);
    for (std::size_t d = 0; d < acc->offsets.size(); ++d) {
      p.rel_embedded += acc->offsets[d] * strides[static_cast<std::size_t>(p.dim_idx[d])];
    }
    if (node.shrink) {
      p.oob = AccessPlan::Oob::Shrink;
    } else {
      auto it = node.input_conditions.find(acc->field);
      if (it == node.input_conditions.end()) {
        // Validation guarantees this access never goes out of bounds.
        p.oob = AccessPlan::Oob::Shrink;
      } else if (it->second.kind == BoundaryCondition::Kind::Constant) {
        p.oob = AccessPlan::Oob::Constant;
        p.constant = Scalar::of_double(dtype_, it->second.value);
      } else {
        p.oob = AccessPlan::Oob::Copy;
      }
    }
    plans_.push_back(std::move(p));
  }

  // Sharing only exists after fusion hash-conses subtrees; plain parses are
  // trees and skip the per-cell memo.
  std::unordered_set<const Expr*> seen;
  std::vector<const Expr*> stack{node.expression.get()};
  while (!stack.empty() && !has_shared_subtrees_) {
    const Expr* e = stack.back();
    stack.pop_back();
    if (!seen.insert(e).second) {
      has_shared_subtrees_ = true;
      break;
    }
    for (const auto& c : e->children) stack.push_back(c.get());
  }
}

EvalResult CellEvaluator::evaluate(const std::int64_t* pos, const Fetch& fetch) const {
  std::unordered_map<const Expr*, Scalar> operands;
  operands.reserve(plans_.size() * 2);
  bool valid = true;

  for (const AccessPlan& p : plans_) {
    bool oob = false;
    std::int64_t own_flat = 0;
    for (std::size_t d = 0; d < p.access->offsets.size(); ++d) {
      std::int64_t c = pos[p.dim_idx[d]] + p.access->offsets[d];
      if (c < 0 || c >= p.extents[d]) {
        oob = true;
        break;
      }
      own_flat += c * p.own_strides[d];
    }
    Scalar v;
    if (!oob) {
      EvalResult r = fetch(p, own_flat, p.rel_embedded);
      v = r.value;
      valid = valid && r.valid;
    } else {
      switch (p.oob) {
        case AccessPlan::Oob::Shrink:
          v = invalid_sentinel(dtype_);
          valid = false;
          break;
        case AccessPlan::Oob::Constant:
          v = p.constant;
          break;
        case AccessPlan::Oob::Copy: {
          // The value at offset 0 in all dimensions; the center itself is
          // always in bounds.
          std::int64_t center = 0;
          for (std::size_t d = 0; d < p.dim_idx.size(); ++d) {
            center += pos[p.dim_idx[d]] * p.own_strides[d];
          }
          EvalResult r = fetch(p, center, 0);
          v = r.value;
          valid = valid && r.valid;
          break;
        }
      }
    }
    operands.emplace(p.access, v);
  }

  EvalResult out;
  out.valid = valid;
  if (!valid) {
    // Invalid cells carry the sentinel and are never computed (an integer
    // cell with a sentinel-zero divisor must not fault).
    out.value = invalid_sentinel(dtype_);
    return out;
  }
  std::unordered_map<const Expr*, Scalar> memo;
  out.value = eval_expr(node_->expression.get(), operands, has_shared_subtrees_ ? &memo : nullptr);
  return out;
}

Scalar CellEvaluator::eval_expr(const Expr* e,
                                const std::unordered_map<const Expr*, Scalar>& operands,
                                std::unordered_map<const Expr*, Scalar>* memo) const {
  if (memo) {
    auto it = memo->find(e);
    if (it != memo->end()) return it->second;
  }
  Scalar result;
  switch (e->kind) {
    case ExprKind::Literal:
      result = e->literal_is_int ? Scalar::of_int(dtype_, static_cast<std::int64_t>(e->literal))
                                 : Scalar::of_double(dtype_, e->literal);
      break;
    case ExprKind::Access:
      result = operands.at(e);
      break;
    case ExprKind::Neg:
      result = scalar_neg(eval_expr(e->children[0].get(), operands, memo));
      break;
    case ExprKind::Binary: {
      Scalar a = eval_expr(e->children[0].get(), operands, memo);
      Scalar b = eval_expr(e->children[1].get(), operands, memo);
      switch (e->bin_op) {
        case BinOp::Add: result = scalar_add(a, b); break;
        case BinOp::Sub: result = scalar_sub(a, b); break;
        case BinOp::Mul: result = scalar_mul(a, b); break;
        case BinOp::Div: result = scalar_div(a, b); break;
      }
      break;
    }
    case ExprKind::Call: {
      Scalar a = eval_expr(e->children[0].get(), operands, memo);
      switch (e->fn) {
        case CallFn::Sqrt: result = scalar_sqrt(a); break;
        case CallFn::Exp: result = scalar_exp(a); break;
        case CallFn::Log: result = scalar_log(a); break;
        case CallFn::Abs: result = scalar_abs(a); break;
        case CallFn::Min:
          result = scalar_min(a, eval_expr(e->children[1].get(), operands, memo));
          break;
        case CallFn::Max:
          result = scalar_max(a, eval_expr(e->children[1].get(), operands, memo));
          break;
        case CallFn::Pow:
          result = scalar_pow(a, eval_expr(e->children[1].get(), operands, memo));
          break;
      }
      break;
    }
    case ExprKind::Select: {
      Scalar lhs = eval_expr(e->children[0].get(), operands, memo);
      Scalar rhs = eval_expr(e->children[1].get(), operands, memo);
      bool taken = scalar_compare(static_cast<int>(e->cmp), lhs, rhs);
      // Only the taken branch is evaluated.
      result = eval_expr(e->children[taken ? 2 : 3].get(), operands, memo);
      break;
    }
  }
  if (memo) memo->emplace(e, result);
  return result;
}

}  // namespace stencilpipe
