#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stencilpipe/types.hpp"

namespace stencilpipe {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Literal, Access, Neg, Binary, Call, Select };

enum class BinOp { Add, Sub, Mul, Div };

enum class CmpKind { Lt = 0, Le = 1, Gt = 2, Ge = 3, Eq = 4, Ne = 5 };

enum class CallFn { Sqrt, Exp, Log, Abs, Min, Max, Pow };

const char* call_fn_name(CallFn fn);

/// Immutable expression node. Subtrees may be shared between parents
/// (fused expressions hash-cons duplicate subtrees so common work is
/// evaluated once per cell).
struct Expr {
  ExprKind kind;

  // Literal
  double literal = 0.0;
  bool literal_is_int = false;

  // Access
  std::string field;
  std::vector<std::string> dims;      // the field's declared dims, for printing
  std::vector<std::int64_t> offsets;  // one per declared dim of the field

  // Neg / Binary / Call / Select children
  BinOp bin_op = BinOp::Add;
  CallFn fn = CallFn::Sqrt;
  CmpKind cmp = CmpKind::Lt;
  std::vector<ExprPtr> children;
};

ExprPtr make_literal(double v, bool is_int);
ExprPtr make_access(std::string field, std::vector<std::string> dims,
                    std::vector<std::int64_t> offsets);
ExprPtr make_neg(ExprPtr a);
ExprPtr make_binary(BinOp op, ExprPtr a, ExprPtr b);
ExprPtr make_call(CallFn fn, std::vector<ExprPtr> args);
ExprPtr make_select(CmpKind cmp, ExprPtr lhs, ExprPtr rhs, ExprPtr then_e, ExprPtr else_e);

/// Field metadata the expression parser needs: declared dims per accessible
/// field, in declaration order.
struct AccessibleField {
  std::string name;
  std::vector<std::string> dims;
};

/// Parse one stencil code string. Index expressions are restricted to
/// `dim`, `dim+k`, `dim-k` with k a nonnegative integer literal; accesses
/// must name a declared field and index exactly its declared dims in order.
/// Throws ProgramError with a column-annotated message.
ExprPtr parse_expression(const std::string& code, const std::vector<AccessibleField>& fields,
                         const std::vector<std::string>& dims);

/// Canonical source form; parse_expression(print_expression(e)) is
/// structurally identical to e.
std::string print_expression(const ExprPtr& e);

/// Walk unique nodes (shared subtrees visited once).
void for_each_unique_node(const ExprPtr& root, const std::function<void(const Expr&)>& fn);

/// All accesses in the tree, including duplicates inside shared subtrees
/// counted once per unique node.
std::vector<const Expr*> collect_accesses(const ExprPtr& root);

/// Structural equality (used by hash-consing and tests).
bool expr_equal(const ExprPtr& a, const ExprPtr& b);

/// Rebuild `root` with every access to any field shifted by `delta`
/// (delta given per global dim; lower-rank accesses shift only their
/// declared dims). `dim_index_of` maps a field to the global dim indices of
/// its declared dims.
ExprPtr shift_accesses(const ExprPtr& root, const std::vector<std::int64_t>& delta,
                       const std::function<std::vector<int>(const std::string&)>& dim_index_of);

/// Rebuild `root` replacing accesses to `field` via `replace`; other nodes
/// are rebuilt with hash-consing so structurally equal subtrees are shared.
ExprPtr substitute_field(const ExprPtr& root, const std::string& field,
                         const std::function<ExprPtr(const Expr& access)>& replace);

}  // namespace stencilpipe
