#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "stencilpipe/program.hpp"
#include "stencilpipe/types.hpp"

namespace stencilpipe {

struct EvalResult {
  Scalar value;
  bool valid = true;
};

/// Per-stencil evaluation plan shared by the reference interpreter and the
/// simulator, so both resolve boundaries and order operations identically.
class CellEvaluator {
public:
  CellEvaluator(const StencilProgram& program, const StencilNode& node);

  struct AccessPlan {
    const Expr* access = nullptr;
    std::string field;
    std::vector<int> dim_idx;        // global dim index per field dim
    Shape extents;                   // the field's own extents
    std::vector<std::int64_t> own_strides;
    std::int64_t rel_embedded = 0;   // flattened full-space offset of this access
    enum class Oob { Shrink, Constant, Copy } oob = Oob::Shrink;
    Scalar constant;                 // Oob::Constant
  };

  /// Fetch one in-bounds operand: `plan` identifies the access,
  /// `own_flat` is the element's index in the field's own array, and
  /// `rel_embedded` its position in the expanded stream relative to the
  /// current cell. Returns value + validity.
  using Fetch = std::function<EvalResult(const AccessPlan& plan, std::int64_t own_flat,
                                         std::int64_t rel_embedded)>;

  /// Evaluate the stencil at iteration-space coordinates `pos`.
  EvalResult evaluate(const std::int64_t* pos, const Fetch& fetch) const;

  const std::vector<AccessPlan>& accesses() const { return plans_; }
  DType dtype() const { return dtype_; }
  const StencilNode& node() const { return *node_; }

private:
  Scalar eval_expr(const Expr* e,
                   const std::unordered_map<const Expr*, Scalar>& operands,
                   std::unordered_map<const Expr*, Scalar>* memo) const;

  const StencilProgram* program_;
  const StencilNode* node_;
  DType dtype_ = DType::Float32;
  std::vector<AccessPlan> plans_;
  bool shrink_ = false;
  bool has_shared_subtrees_ = false;
};

}  // namespace stencilpipe
