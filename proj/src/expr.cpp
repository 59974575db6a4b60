#include "stencilpipe/expr.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace stencilpipe {

const char* call_fn_name(CallFn fn) {
  switch (fn) {
    case CallFn::Sqrt: return "sqrt";
    case CallFn::Exp: return "exp";
    case CallFn::Log: return "log";
    case CallFn::Abs: return "abs";
    case CallFn::Min: return "min";
    case CallFn::Max: return "max";
    case CallFn::Pow: return "pow";
  }
  return "?";
}

ExprPtr make_literal(double v, bool is_int) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Literal;
  e->literal = v;
  e->literal_is_int = is_int;
  return e;
}

ExprPtr make_access(std::string field, std::vector<std::string> dims,
                    std::vector<std::int64_t> offsets) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Access;
  e->field = std::move(field);
  e->dims = std::move(dims);
  e->offsets = std::move(offsets);
  return e;
}

ExprPtr make_neg(ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Neg;
  e->children = {std::move(a)};
  return e;
}

ExprPtr make_binary(BinOp op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Binary;
  e->bin_op = op;
  e->children = {std::move(a), std::move(b)};
  return e;
}

ExprPtr make_call(CallFn fn, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Call;
  e->fn = fn;
  e->children = std::move(args);
  return e;
}

ExprPtr make_select(CmpKind cmp, ExprPtr lhs, ExprPtr rhs, ExprPtr then_e, ExprPtr else_e) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Select;
  e->cmp = cmp;
  e->children = {std::move(lhs), std::move(rhs), std::move(then_e), std::move(else_e)};
  return e;
}

// ---------------------------------------------------------------------------
// Tokenizer + recursive-descent parser.
// Grammar (loosest binding first):
//   ternary := cmp ('?' ternary ':' ternary)?
//   cmp     := additive (('<'|'<='|'>'|'>='|'=='|'!=') additive)?
//   additive := mul (('+'|'-') mul)*
//   mul     := unary (('*'|'/') unary)*
//   unary   := '-' unary | primary
//   primary := number | ident '(' args ')' | ident '[' indices ']' | ident | '(' ternary ')'
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { Ident, Number, Punct, End } kind;
  std::string text;
  std::size_t pos = 0;
};

class Lexer {
public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg, std::size_t pos) const {
    std::ostringstream os;
    os << "syntax error at column " << pos + 1 << ": " << msg;
    throw ProgramError(os.str());
  }

private:
  void advance() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    tok_.pos = i_;
    if (i_ >= src_.size()) {
      tok_.kind = Token::End;
      tok_.text.clear();
      return;
    }
    char c = src_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      tok_ = {Token::Ident, src_.substr(i_, j - i_), i_};
      i_ = j;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      std::size_t j = i_;
      bool seen_dot = false, seen_exp = false;
      while (j < src_.size()) {
        char d = src_[j];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++j;
        } else if (d == '.' && !seen_dot && !seen_exp) {
          seen_dot = true;
          ++j;
        } else if ((d == 'e' || d == 'E') && !seen_exp && j > i_) {
          seen_exp = true;
          ++j;
          if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
        } else {
          break;
        }
      }
      tok_ = {Token::Number, src_.substr(i_, j - i_), i_};
      i_ = j;
      return;
    }
    static const char* two_char[] = {"<=", ">=", "==", "!="};
    for (const char* p : two_char) {
      if (src_.compare(i_, 2, p) == 0) {
        tok_ = {Token::Punct, p, i_};
        i_ += 2;
        return;
      }
    }
    tok_ = {Token::Punct, std::string(1, c), i_};
    ++i_;
  }

  const std::string& src_;
  std::size_t i_ = 0;
  Token tok_;
};

class Parser {
public:
  Parser(const std::string& src, const std::vector<AccessibleField>& fields,
         const std::vector<std::string>& dims)
      : lex_(src), dims_(dims) {
    for (const auto& f : fields) fields_[f.name] = &f;
  }

  ExprPtr parse() {
    ExprPtr e = ternary();
    if (lex_.peek().kind != Token::End) {
      lex_.fail("unexpected \"" + lex_.peek().text + "\"", lex_.peek().pos);
    }
    return e;
  }

private:
  ExprPtr ternary() {
    std::size_t pos = lex_.peek().pos;
    ExprPtr lhs = additive();
    CmpKind cmp;
    if (!peek_cmp(&cmp)) {
      if (is_punct("?")) lex_.fail("ternary predicate must be a comparison", pos);
      return lhs;
    }
    lex_.take();
    ExprPtr rhs = additive();
    if (!is_punct("?")) {
      // A bare comparison only makes sense as a ternary predicate.
      lex_.fail("expected '?' after comparison", lex_.peek().pos);
    }
    lex_.take();
    ExprPtr then_e = ternary();
    expect(":");
    ExprPtr else_e = ternary();
    return make_select(cmp, lhs, rhs, then_e, else_e);
  }

  ExprPtr additive() {
    ExprPtr e = multiplicative();
    while (is_punct("+") || is_punct("-")) {
      BinOp op = lex_.take().text == "+" ? BinOp::Add : BinOp::Sub;
      e = make_binary(op, e, multiplicative());
    }
    return e;
  }

  ExprPtr multiplicative() {
    ExprPtr e = unary();
    while (is_punct("*") || is_punct("/")) {
      BinOp op = lex_.take().text == "*" ? BinOp::Mul : BinOp::Div;
      e = make_binary(op, e, unary());
    }
    return e;
  }

  ExprPtr unary() {
    if (is_punct("-")) {
      lex_.take();
      return make_neg(unary());
    }
    return primary();
  }

  ExprPtr primary() {
    Token t = lex_.peek();
    if (t.kind == Token::Number) {
      lex_.take();
      bool is_int = t.text.find_first_of(".eE") == std::string::npos;
      double v = 0;
      auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc() || p != t.text.data() + t.text.size()) {
        lex_.fail("bad numeric literal \"" + t.text + "\"", t.pos);
      }
      return make_literal(v, is_int);
    }
    if (t.kind == Token::Ident) {
      lex_.take();
      if (is_punct("(")) return call(t);
      if (is_punct("[")) return access(t);
      // Bare identifier: a 0-D field access.
      auto it = fields_.find(t.text);
      if (it == fields_.end()) lex_.fail("unknown field \"" + t.text + "\"", t.pos);
      if (!it->second->dims.empty()) {
        lex_.fail("field \"" + t.text + "\" has rank " +
                      std::to_string(it->second->dims.size()) + " and needs an index list",
                  t.pos);
      }
      return make_access(t.text, {}, {});
    }
    if (is_punct("(")) {
      lex_.take();
      ExprPtr e = ternary();
      expect(")");
      return e;
    }
    lex_.fail("expected expression", t.pos);
  }

  ExprPtr call(const Token& name) {
    static const std::map<std::string, std::pair<CallFn, int>> fns = {
        {"sqrt", {CallFn::Sqrt, 1}}, {"exp", {CallFn::Exp, 1}}, {"log", {CallFn::Log, 1}},
        {"abs", {CallFn::Abs, 1}},   {"min", {CallFn::Min, 2}}, {"max", {CallFn::Max, 2}},
        {"pow", {CallFn::Pow, 2}}};
    auto it = fns.find(name.text);
    if (it == fns.end()) lex_.fail("unsupported function \"" + name.text + "\"", name.pos);
    expect("(");
    std::vector<ExprPtr> args;
    args.push_back(ternary());
    while (is_punct(",")) {
      lex_.take();
      args.push_back(ternary());
    }
    expect(")");
    if (static_cast<int>(args.size()) != it->second.second) {
      lex_.fail(name.text + " takes " + std::to_string(it->second.second) + " argument(s)",
                name.pos);
    }
    return make_call(it->second.first, std::move(args));
  }

  ExprPtr access(const Token& name) {
    auto it = fields_.find(name.text);
    if (it == fields_.end()) lex_.fail("unknown field \"" + name.text + "\"", name.pos);
    const AccessibleField& f = *it->second;
    expect("[");
    std::vector<std::int64_t> offsets;
    for (std::size_t d = 0; d < f.dims.size(); ++d) {
      if (d > 0) expect(",");
      offsets.push_back(index_offset(f, d));
    }
    expect("]");
    return make_access(name.text, f.dims, std::move(offsets));
  }

  // One index: `dim`, `dim+k`, or `dim-k`, where dim is the field's d-th
  // declared dimension.
  std::int64_t index_offset(const AccessibleField& f, std::size_t d) {
    Token t = lex_.peek();
    if (t.kind != Token::Ident) lex_.fail("expected dimension name in index", t.pos);
    lex_.take();
    bool known_dim = false;
    for (const auto& dim : dims_) known_dim = known_dim || dim == t.text;
    if (!known_dim) lex_.fail("\"" + t.text + "\" is not an iteration dimension", t.pos);
    if (t.text != f.dims[d]) {
      lex_.fail("field \"" + f.name + "\" expects dimension \"" + f.dims[d] + "\" at index " +
                    std::to_string(d) + ", got \"" + t.text + "\"",
                t.pos);
    }
    std::int64_t sign = 0;
    if (is_punct("+")) sign = 1;
    if (is_punct("-")) sign = -1;
    if (sign == 0) return 0;
    lex_.take();
    Token k = lex_.peek();
    if (k.kind != Token::Number || k.text.find_first_of(".eE") != std::string::npos) {
      lex_.fail("index offsets must be integer constants", k.pos);
    }
    lex_.take();
    std::int64_t v = 0;
    std::from_chars(k.text.data(), k.text.data() + k.text.size(), v);
    return sign * v;
  }

  bool is_punct(const char* p) const {
    return lex_.peek().kind == Token::Punct && lex_.peek().text == p;
  }

  void expect(const char* p) {
    if (!is_punct(p)) lex_.fail(std::string("expected \"") + p + "\"", lex_.peek().pos);
    lex_.take();
  }

  bool peek_cmp(CmpKind* out) const {
    if (lex_.peek().kind != Token::Punct) return false;
    const std::string& t = lex_.peek().text;
    if (t == "<") *out = CmpKind::Lt;
    else if (t == "<=") *out = CmpKind::Le;
    else if (t == ">") *out = CmpKind::Gt;
    else if (t == ">=") *out = CmpKind::Ge;
    else if (t == "==") *out = CmpKind::Eq;
    else if (t == "!=") *out = CmpKind::Ne;
    else return false;
    return true;
  }

  Lexer lex_;
  const std::vector<std::string>& dims_;
  std::unordered_map<std::string, const AccessibleField*> fields_;
};

}  // namespace

ExprPtr parse_expression(const std::string& code, const std::vector<AccessibleField>& fields,
                         const std::vector<std::string>& dims) {
  return Parser(code, fields, dims).parse();
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

std::string format_number(double v, bool is_int) {
  if (is_int) {
    std::ostringstream os;
    os << static_cast<std::int64_t>(v);
    return os.str();
  }
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

const char* cmp_text(CmpKind c) {
  switch (c) {
    case CmpKind::Lt: return "<";
    case CmpKind::Le: return "<=";
    case CmpKind::Gt: return ">";
    case CmpKind::Ge: return ">=";
    case CmpKind::Eq: return "==";
    case CmpKind::Ne: return "!=";
  }
  return "?";
}

// Precedence: 0 ternary, 1 additive, 2 multiplicative, 3 unary/primary.
int precedence(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Select: return 0;
    case ExprKind::Binary:
      return e.bin_op == BinOp::Add || e.bin_op == BinOp::Sub ? 1 : 2;
    case ExprKind::Neg: return 3;
    default: return 4;
  }
}

void print_rec(const Expr& e, std::string& out);

void print_child(const ExprPtr& c, int prec, std::string& out) {
  bool parens = precedence(*c) < prec;
  if (parens) out += "(";
  print_rec(*c, out);
  if (parens) out += ")";
}

void print_rec(const Expr& e, std::string& out) {
  switch (e.kind) {
    case ExprKind::Literal:
      out += format_number(e.literal, e.literal_is_int);
      break;
    case ExprKind::Access: {
      out += e.field;
      if (!e.offsets.empty()) {
        out += "[";
        for (std::size_t d = 0; d < e.offsets.size(); ++d) {
          if (d > 0) out += ",";
          out += e.dims[d];
          std::int64_t o = e.offsets[d];
          if (o > 0) out += "+" + std::to_string(o);
          if (o < 0) out += std::to_string(o);
        }
        out += "]";
      }
      break;
    }
    case ExprKind::Neg:
      out += "-";
      print_child(e.children[0], 3, out);
      break;
    case ExprKind::Binary: {
      int prec = precedence(e);
      print_child(e.children[0], prec, out);
      switch (e.bin_op) {
        case BinOp::Add: out += " + "; break;
        case BinOp::Sub: out += " - "; break;
        case BinOp::Mul: out += "*"; break;
        case BinOp::Div: out += "/"; break;
      }
      // Right child needs one level tighter to keep a-(b-c) unambiguous.
      print_child(e.children[1], prec + 1, out);
      break;
    }
    case ExprKind::Call: {
      out += call_fn_name(e.fn);
      out += "(";
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i > 0) out += ", ";
        print_rec(*e.children[i], out);
      }
      out += ")";
      break;
    }
    case ExprKind::Select: {
      print_child(e.children[0], 1, out);
      out += " ";
      out += cmp_text(e.cmp);
      out += " ";
      print_child(e.children[1], 1, out);
      out += " ? ";
      print_child(e.children[2], 1, out);
      out += " : ";
      print_child(e.children[3], 1, out);
      break;
    }
  }
}

}  // namespace

std::string print_expression(const ExprPtr& e) {
  std::string out;
  print_rec(*e, out);
  return out;
}

void for_each_unique_node(const ExprPtr& root, const std::function<void(const Expr&)>& fn) {
  std::unordered_set<const Expr*> seen;
  std::vector<const Expr*> stack{root.get()};
  while (!stack.empty()) {
    const Expr* e = stack.back();
    stack.pop_back();
    if (!seen.insert(e).second) continue;
    fn(*e);
    for (const auto& c : e->children) stack.push_back(c.get());
  }
}

std::vector<const Expr*> collect_accesses(const ExprPtr& root) {
  std::vector<const Expr*> out;
  for_each_unique_node(root, [&](const Expr& e) {
    if (e.kind == ExprKind::Access) out.push_back(&e);
  });
  return out;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::Literal:
      return a->literal == b->literal && a->literal_is_int == b->literal_is_int;
    case ExprKind::Access:
      return a->field == b->field && a->offsets == b->offsets;
    case ExprKind::Binary:
      if (a->bin_op != b->bin_op) return false;
      break;
    case ExprKind::Call:
      if (a->fn != b->fn) return false;
      break;
    case ExprKind::Select:
      if (a->cmp != b->cmp) return false;
      break;
    case ExprKind::Neg:
      break;
  }
  if (a->children.size() != b->children.size()) return false;
  for (std::size_t i = 0; i < a->children.size(); ++i) {
    if (!expr_equal(a->children[i], b->children[i])) return false;
  }
  return true;
}

ExprPtr shift_accesses(const ExprPtr& root, const std::vector<std::int64_t>& delta,
                       const std::function<std::vector<int>(const std::string&)>& dim_index_of) {
  if (root->kind == ExprKind::Access) {
    std::vector<int> idx = dim_index_of(root->field);
    std::vector<std::int64_t> offsets = root->offsets;
    for (std::size_t d = 0; d < offsets.size(); ++d) offsets[d] += delta[idx[d]];
    return make_access(root->field, root->dims, std::move(offsets));
  }
  auto e = std::make_shared<Expr>(*root);
  for (auto& c : e->children) c = shift_accesses(c, delta, dim_index_of);
  return e;
}

namespace {

// Hash-consing pool keyed by a structural fingerprint; collisions resolved
// by expr_equal.
struct ConsPool {
  std::unordered_map<std::size_t, std::vector<ExprPtr>> buckets;

  ExprPtr intern(ExprPtr e) {
    std::size_t h = fingerprint(*e);
    auto& bucket = buckets[h];
    for (const auto& other : bucket) {
      if (expr_equal(other, e)) return other;
    }
    bucket.push_back(e);
    return e;
  }

  static std::size_t fingerprint(const Expr& e) {
    std::size_t h = static_cast<std::size_t>(e.kind) * 1099511628211ull;
    auto mix = [&h](std::size_t v) { h = (h ^ v) * 1099511628211ull; };
    switch (e.kind) {
      case ExprKind::Literal:
        mix(std::hash<double>()(e.literal));
        break;
      case ExprKind::Access:
        mix(std::hash<std::string>()(e.field));
        for (auto o : e.offsets) mix(static_cast<std::size_t>(o * 2654435761ull + 17));
        break;
      case ExprKind::Binary: mix(static_cast<std::size_t>(e.bin_op)); break;
      case ExprKind::Call: mix(static_cast<std::size_t>(e.fn)); break;
      case ExprKind::Select: mix(static_cast<std::size_t>(e.cmp)); break;
      case ExprKind::Neg: break;
    }
    for (const auto& c : e.children) mix(reinterpret_cast<std::size_t>(c.get()));
    return h;
  }
};

ExprPtr substitute_rec(const ExprPtr& root, const std::string& field,
                       const std::function<ExprPtr(const Expr&)>& replace, ConsPool& pool,
                       std::unordered_map<const Expr*, ExprPtr>& memo) {
  auto it = memo.find(root.get());
  if (it != memo.end()) return it->second;
  ExprPtr result;
  if (root->kind == ExprKind::Access && root->field == field) {
    result = pool.intern(replace(*root));
  } else {
    auto e = std::make_shared<Expr>(*root);
    for (auto& c : e->children) c = substitute_rec(c, field, replace, pool, memo);
    result = pool.intern(std::move(e));
  }
  memo.emplace(root.get(), result);
  return result;
}

}  // namespace

ExprPtr substitute_field(const ExprPtr& root, const std::string& field,
                         const std::function<ExprPtr(const Expr& access)>& replace) {
  ConsPool pool;
  std::unordered_map<const Expr*, ExprPtr> memo;
  return substitute_rec(root, field, replace, pool, memo);
}

}  // namespace stencilpipe
