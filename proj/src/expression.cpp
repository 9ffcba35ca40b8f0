#include "obsrisk/expression.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <system_error>

#include "obsrisk/errors.hpp"

namespace obsrisk {

namespace {

using Node = Expression::Node;
using NodePtr = Expression::NodePtr;

enum class OpCode : std::uint8_t {
  kPushConst,
  kPushX,
  kPushU,
  kNeg,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kMin,
  kMax,
  kClamp,
  kAbs,
  kExp,
};

struct Instr {
  OpCode op;
  int exponent = 0;
  double value = 0.0;
};

std::size_t arity(Function fn) {
  switch (fn) {
    case Function::kMin:
    case Function::kMax:
      return 2;
    case Function::kClamp:
      return 3;
    case Function::kAbs:
    case Function::kExp:
      return 1;
  }
  return 0;
}

const char* function_name(Function fn) {
  switch (fn) {
    case Function::kMin:
      return "min";
    case Function::kMax:
      return "max";
    case Function::kClamp:
      return "clamp";
    case Function::kAbs:
      return "abs";
    case Function::kExp:
      return "exp";
  }
  return "?";
}

double power(double base, int n) {
  if (n == 0) return 1.0;
  double r = base;
  for (int i = 1; i < n; ++i) r *= base;
  return r;
}

double eval_node(const Node& n, double x, double u) {
  switch (n.kind) {
    case Node::Kind::kLiteral:
      return n.value;
    case Node::Kind::kVariable:
      return n.variable == Variable::kX ? x : u;
    case Node::Kind::kNegate:
      return -eval_node(*n.children[0], x, u);
    case Node::Kind::kBinary: {
      const double a = eval_node(*n.children[0], x, u);
      if (n.op == BinaryOp::kPow) return power(a, n.exponent);
      const double b = eval_node(*n.children[1], x, u);
      switch (n.op) {
        case BinaryOp::kAdd:
          return a + b;
        case BinaryOp::kSub:
          return a - b;
        case BinaryOp::kMul:
          return a * b;
        case BinaryOp::kDiv:
          return a / b;
        case BinaryOp::kPow:
          break;
      }
      return 0.0;
    }
    case Node::Kind::kCall: {
      std::array<double, 3> v{};
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        v[i] = eval_node(*n.children[i], x, u);
      }
      switch (n.function) {
        case Function::kMin:
          return std::fmin(v[0], v[1]);
        case Function::kMax:
          return std::fmax(v[0], v[1]);
        case Function::kClamp:
          return std::fmin(std::fmax(v[0], v[1]), v[2]);
        case Function::kAbs:
          return std::fabs(v[0]);
        case Function::kExp:
          return std::exp(v[0]);
      }
      return 0.0;
    }
  }
  return 0.0;
}

bool node_references(const Node& n, Variable v) {
  if (n.kind == Node::Kind::kVariable) return n.variable == v;
  for (const auto& c : n.children) {
    if (node_references(*c, v)) return true;
  }
  return false;
}

bool node_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Node::Kind::kLiteral:
      return std::bit_cast<std::uint64_t>(a.value) ==
             std::bit_cast<std::uint64_t>(b.value);
    case Node::Kind::kVariable:
      return a.variable == b.variable;
    case Node::Kind::kNegate:
      break;
    case Node::Kind::kBinary:
      if (a.op != b.op) return false;
      break;
    case Node::Kind::kCall:
      if (a.function != b.function) return false;
      break;
  }
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!node_equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

// Printing precedence: higher binds tighter.
int precedence(const Node& n) {
  switch (n.kind) {
    case Node::Kind::kLiteral:
    case Node::Kind::kVariable:
    case Node::Kind::kCall:
      return 5;
    case Node::Kind::kNegate:
      return 3;
    case Node::Kind::kBinary:
      switch (n.op) {
        case BinaryOp::kPow:
          return 4;
        case BinaryOp::kMul:
        case BinaryOp::kDiv:
          return 2;
        case BinaryOp::kAdd:
        case BinaryOp::kSub:
          return 1;
      }
  }
  return 0;
}

void print_node(const Node& n, std::string& out);

void print_child(const Node& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print_node(child, out);
  if (parens) out += ')';
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case Node::Kind::kLiteral:
      out += format_shortest(n.value);
      return;
    case Node::Kind::kVariable:
      out += n.variable == Variable::kX ? 'x' : 'u';
      return;
    case Node::Kind::kNegate:
      out += '-';
      print_child(*n.children[0], precedence(*n.children[0]) < 3, out);
      return;
    case Node::Kind::kCall:
      out += function_name(n.function);
      out += '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i > 0) out += ", ";
        print_node(*n.children[i], out);
      }
      out += ')';
      return;
    case Node::Kind::kBinary:
      break;
  }
  const Node& lhs = *n.children[0];
  const Node& rhs = *n.children[1];
  if (n.op == BinaryOp::kPow) {
    print_child(lhs, precedence(lhs) <= 4, out);
    out += '^';
    print_child(rhs, precedence(rhs) < 3, out);
    return;
  }
  const int p = precedence(n);
  print_child(lhs, precedence(lhs) < p, out);
  switch (n.op) {
    case BinaryOp::kAdd:
      out += " + ";
      break;
    case BinaryOp::kSub:
      out += " - ";
      break;
    case BinaryOp::kMul:
      out += " * ";
      break;
    case BinaryOp::kDiv:
      out += " / ";
      break;
    case BinaryOp::kPow:
      break;
  }
  print_child(rhs, precedence(rhs) <= p, out);
}

// ---------------------------------------------------------------------------
// Parser

const std::vector<std::string> kOperandStart = {"number", "identifier", "'('",
                                                "'-'"};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse_all() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) {
      fail("unexpected character '" + std::string(1, src_[pos_]) + "'",
           {"operator", "end of input"});
    }
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what,
                         std::vector<std::string> expected,
                         std::size_t at = std::string_view::npos) const {
    const std::size_t off = at == std::string_view::npos ? pos_ : at;
    std::string msg = "syntax error at offset " + std::to_string(off) + ": " +
                      what;
    if (!expected.empty()) {
      msg += "; expected one of {";
      for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0) msg += ", ";
        msg += expected[i];
      }
      msg += '}';
    }
    throw ParseError(msg, off, std::move(expected));
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
            src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      const std::string tok = std::string("'") + c + "'";
      fail(pos_ < src_.size() ? "unexpected character" : "unexpected end of input",
           {tok});
    }
  }

  static NodePtr make_binary(BinaryOp op, NodePtr l, NodePtr r) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::kBinary;
    n->op = op;
    n->children = {std::move(l), std::move(r)};
    return n;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(BinaryOp::kAdd, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(BinaryOp::kSub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(BinaryOp::kMul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(BinaryOp::kDiv, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::kNegate;
      n->children = {parse_unary()};
      return n;
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t exp_at = pos_;
    NodePtr exponent = parse_unary();
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::kBinary;
    n->op = BinaryOp::kPow;
    if (node_references(*exponent, Variable::kX) ||
        node_references(*exponent, Variable::kU)) {
      fail("non-constant exponent", {}, exp_at);
    }
    const double e = eval_node(*exponent, 0.0, 0.0);
    if (!(e >= 0.0 && e <= kMaxExponent && e == std::floor(e))) {
      fail("exponent must be an integer in [0, " +
               std::to_string(kMaxExponent) + "]",
           {}, exp_at);
    }
    n->exponent = static_cast<int>(e);
    n->children = {std::move(base), std::move(exponent)};
    return n;
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
        ++pos_;
        ++k;
      }
      return k;
    };
    std::size_t nd = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) fail("malformed number", {"digit"}, start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        ++pos_;
      }
      if (digits() == 0) fail("malformed exponent in number", {"digit"});
    }
    double v = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      fail("numeric literal out of range", {}, start);
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::kLiteral;
    n->value = v;
    return n;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input", kOperandStart);
    const char c = src_[pos_];
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view id = src_.substr(start, pos_ - start);
      if (id == "x" || id == "u") {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::kVariable;
        n->variable = id == "x" ? Variable::kX : Variable::kU;
        return n;
      }
      Function fn;
      if (id == "min") {
        fn = Function::kMin;
      } else if (id == "max") {
        fn = Function::kMax;
      } else if (id == "clamp") {
        fn = Function::kClamp;
      } else if (id == "abs") {
        fn = Function::kAbs;
      } else if (id == "exp") {
        fn = Function::kExp;
      } else {
        fail("unknown identifier '" + std::string(id) + "'",
             {"x", "u", "min", "max", "clamp", "abs", "exp"}, start);
      }
      expect('(');
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::kCall;
      n->function = fn;
      const std::size_t want = arity(fn);
      for (std::size_t i = 0; i < want; ++i) {
        if (i > 0) expect(',');
        n->children.push_back(parse_expr());
      }
      expect(')');
      return n;
    }
    fail("unexpected character '" + std::string(1, c) + "'", kOperandStart);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Compiled postfix form used for evaluation.

struct Expression::Program {
  std::vector<Instr> code;
  std::size_t max_depth = 0;
  bool uses_x = false;
  bool uses_u = false;

  void emit(const Node& n, std::size_t& depth) {
    auto push = [&](Instr i) {
      code.push_back(i);
      ++depth;
      max_depth = std::max(max_depth, depth);
    };
    switch (n.kind) {
      case Node::Kind::kLiteral:
        push({OpCode::kPushConst, 0, n.value});
        return;
      case Node::Kind::kVariable:
        if (n.variable == Variable::kX) {
          uses_x = true;
          push({OpCode::kPushX});
        } else {
          uses_u = true;
          push({OpCode::kPushU});
        }
        return;
      case Node::Kind::kNegate:
        emit(*n.children[0], depth);
        code.push_back({OpCode::kNeg});
        return;
      case Node::Kind::kBinary:
        emit(*n.children[0], depth);
        if (n.op == BinaryOp::kPow) {
          code.push_back({OpCode::kPow, n.exponent});
          return;
        }
        emit(*n.children[1], depth);
        --depth;
        switch (n.op) {
          case BinaryOp::kAdd:
            code.push_back({OpCode::kAdd});
            break;
          case BinaryOp::kSub:
            code.push_back({OpCode::kSub});
            break;
          case BinaryOp::kMul:
            code.push_back({OpCode::kMul});
            break;
          case BinaryOp::kDiv:
            code.push_back({OpCode::kDiv});
            break;
          case BinaryOp::kPow:
            break;
        }
        return;
      case Node::Kind::kCall:
        for (const auto& c : n.children) emit(*c, depth);
        depth -= n.children.size() - 1;
        switch (n.function) {
          case Function::kMin:
            code.push_back({OpCode::kMin});
            break;
          case Function::kMax:
            code.push_back({OpCode::kMax});
            break;
          case Function::kClamp:
            code.push_back({OpCode::kClamp});
            break;
          case Function::kAbs:
            code.push_back({OpCode::kAbs});
            break;
          case Function::kExp:
            code.push_back({OpCode::kExp});
            break;
        }
        return;
    }
  }

  template <typename Stack>
  double run(Stack& st, double x, double u) const {
    std::size_t sp = 0;
    for (const Instr& in : code) {
      switch (in.op) {
        case OpCode::kPushConst:
          st[sp++] = in.value;
          break;
        case OpCode::kPushX:
          st[sp++] = x;
          break;
        case OpCode::kPushU:
          st[sp++] = u;
          break;
        case OpCode::kNeg:
          st[sp - 1] = -st[sp - 1];
          break;
        case OpCode::kAdd:
          --sp;
          st[sp - 1] = st[sp - 1] + st[sp];
          break;
        case OpCode::kSub:
          --sp;
          st[sp - 1] = st[sp - 1] - st[sp];
          break;
        case OpCode::kMul:
          --sp;
          st[sp - 1] = st[sp - 1] * st[sp];
          break;
        case OpCode::kDiv:
          --sp;
          st[sp - 1] = st[sp - 1] / st[sp];
          break;
        case OpCode::kPow:
          st[sp - 1] = power(st[sp - 1], in.exponent);
          break;
        case OpCode::kMin:
          --sp;
          st[sp - 1] = std::fmin(st[sp - 1], st[sp]);
          break;
        case OpCode::kMax:
          --sp;
          st[sp - 1] = std::fmax(st[sp - 1], st[sp]);
          break;
        case OpCode::kClamp:
          sp -= 2;
          st[sp - 1] = std::fmin(std::fmax(st[sp - 1], st[sp]), st[sp + 1]);
          break;
        case OpCode::kAbs:
          st[sp - 1] = std::fabs(st[sp - 1]);
          break;
        case OpCode::kExp:
          st[sp - 1] = std::exp(st[sp - 1]);
          break;
      }
    }
    return st[0];
  }
};

Expression::Expression() : Expression(Expression::literal(0.0).root_) {}

Expression::Expression(NodePtr root) : root_(std::move(root)) {
  auto p = std::make_shared<Program>();
  std::size_t depth = 0;
  p->emit(*root_, depth);
  program_ = std::move(p);
}

Expression Expression::parse(std::string_view source) {
  return Expression(Parser(source).parse_all());
}

Expression parse_expression(std::string_view source) {
  return Expression::parse(source);
}

Expression Expression::literal(double value) {
  if (!std::isfinite(value)) {
    throw DomainError("expression literal must be finite");
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kLiteral;
  n->value = std::fabs(value);
  if (std::signbit(value) && value != 0.0) {
    auto neg = std::make_shared<Node>();
    neg->kind = Node::Kind::kNegate;
    neg->children = {std::move(n)};
    return Expression(std::move(neg));
  }
  return Expression(std::move(n));
}

Expression Expression::variable(Variable v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kVariable;
  n->variable = v;
  return Expression(std::move(n));
}

Expression Expression::negate(const Expression& operand) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kNegate;
  n->children = {operand.root_};
  return Expression(std::move(n));
}

Expression Expression::binary(BinaryOp op, const Expression& lhs,
                              const Expression& rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kBinary;
  n->op = op;
  if (op == BinaryOp::kPow) {
    if (!rhs.is_constant()) throw DomainError("non-constant exponent");
    const double e = rhs.evaluate(0.0, 0.0);
    if (!(e >= 0.0 && e <= kMaxExponent && e == std::floor(e))) {
      throw DomainError("exponent must be an integer in [0, " +
                        std::to_string(kMaxExponent) + "]");
    }
    n->exponent = static_cast<int>(e);
  }
  n->children = {lhs.root_, rhs.root_};
  return Expression(std::move(n));
}

Expression Expression::call(Function fn, const std::vector<Expression>& args) {
  if (args.size() != arity(fn)) {
    throw DomainError(std::string(function_name(fn)) + " takes " +
                      std::to_string(arity(fn)) + " argument(s)");
  }
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kCall;
  n->function = fn;
  for (const auto& a : args) n->children.push_back(a.root_);
  return Expression(std::move(n));
}

double Expression::evaluate(double x, double u) const {
  const Program& p = *program_;
  if (p.max_depth <= 32) {
    std::array<double, 32> st;
    return p.run(st, x, u);
  }
  std::vector<double> st(p.max_depth);
  return p.run(st, x, u);
}

std::string Expression::to_string() const {
  std::string out;
  print_node(*root_, out);
  return out;
}

bool Expression::references(Variable v) const {
  return v == Variable::kX ? program_->uses_x : program_->uses_u;
}

bool operator==(const Expression& a, const Expression& b) {
  return node_equal(*a.root_, *b.root_);
}

std::string format_shortest(double value) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

}  // namespace obsrisk
