#ifndef OBSRISK_EXPRESSION_HPP
#define OBSRISK_EXPRESSION_HPP

// Arithmetic expressions over the covariate x and the confounder u.
//
// Grammar (whitespace insignificant):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | 'x' | 'u' | call | '(' expr ')'
//   call    := ('min' | 'max') '(' expr ',' expr ')'
//            | 'clamp' '(' expr ',' expr ',' expr ')'
//            | ('abs' | 'exp') '(' expr ')'
//
// The exponent of '^' must be variable-free and evaluate to an integer in
// [0, kMaxExponent]. Literals in the tree are always finite and
// non-negative; a leading minus is a negation node.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace obsrisk {

enum class Variable { kX, kU };
enum class BinaryOp { kAdd, kSub, kMul, kDiv, kPow };
enum class Function { kMin, kMax, kClamp, kAbs, kExp };

inline constexpr int kMaxExponent = 256;

class Expression {
 public:
  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    enum class Kind { kLiteral, kVariable, kNegate, kBinary, kCall };

    Kind kind = Kind::kLiteral;
    double value = 0.0;  // kLiteral
    Variable variable = Variable::kX;
    BinaryOp op = BinaryOp::kAdd;
    Function function = Function::kMin;
    int exponent = 0;  // kBinary with kPow: folded value of children[1]
    std::vector<NodePtr> children;
  };

  /// The constant 0.
  Expression();

  static Expression parse(std::string_view source);

  static Expression literal(double value);
  static Expression variable(Variable v);
  static Expression negate(const Expression& operand);
  static Expression binary(BinaryOp op, const Expression& lhs,
                           const Expression& rhs);
  static Expression call(Function fn, const std::vector<Expression>& args);

  double evaluate(double x, double u = 0.0) const;

  /// Canonical text: minimal parentheses, shortest round-trip literals.
  /// parse(to_string()) is structurally identical to *this.
  std::string to_string() const;

  bool references(Variable v) const;
  bool is_constant() const {
    return !references(Variable::kX) && !references(Variable::kU);
  }

  const Node& root() const { return *root_; }

  /// Structural identity; literals compare bit-for-bit.
  friend bool operator==(const Expression& a, const Expression& b);

 private:
  struct Program;

  explicit Expression(NodePtr root);

  NodePtr root_;
  std::shared_ptr<const Program> program_;
};

Expression parse_expression(std::string_view source);

/// Shortest decimal text that reads back to exactly `value`.
std::string format_shortest(double value);

}  // namespace obsrisk

#endif  // OBSRISK_EXPRESSION_HPP
