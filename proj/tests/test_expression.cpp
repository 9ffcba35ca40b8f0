#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "obsrisk/errors.hpp"
#include "obsrisk/expression.hpp"
#include "test_support.hpp"

namespace obsrisk {
namespace {

using testing::ExpressionFuzzer;

TEST(Expression, VanishingSquareAtSevenTenths) {
  EXPECT_EQ(parse_expression("(0.7 - x)^2").evaluate(0.7), 0.0);
}

TEST(Expression, ScoreFormAtHalf) {
  const Expression e = parse_expression("x*(0.7-x)^2 + (1-x)*x");
  EXPECT_NEAR(e.evaluate(0.5), 0.27, 1e-15);
}

TEST(Expression, TrailingOperatorReportsOffsetAndExpectedTokens) {
  try {
    parse_expression("x +");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
    EXPECT_FALSE(e.expected().empty());
  }
}

TEST(Expression, Precedence) {
  EXPECT_DOUBLE_EQ(parse_expression("1 + 2 * 3").evaluate(0), 7.0);
  EXPECT_DOUBLE_EQ(parse_expression("2 * 3 ^ 2").evaluate(0), 18.0);
  EXPECT_DOUBLE_EQ(parse_expression("-2 ^ 2").evaluate(0), -4.0);
  EXPECT_DOUBLE_EQ(parse_expression("(-2) ^ 2").evaluate(0), 4.0);
  EXPECT_DOUBLE_EQ(parse_expression("2 ^ 3 ^ 2").evaluate(0), 512.0);
  EXPECT_DOUBLE_EQ(parse_expression("8 - 3 - 2").evaluate(0), 3.0);
  EXPECT_DOUBLE_EQ(parse_expression("8 / 4 / 2").evaluate(0), 1.0);
  EXPECT_DOUBLE_EQ(parse_expression("x ^ 0").evaluate(123.0), 1.0);
}

TEST(Expression, FunctionsAndVariables) {
  EXPECT_EQ(parse_expression("min(x, u)").evaluate(0.2, 0.7), 0.2);
  EXPECT_EQ(parse_expression("max(x, u)").evaluate(0.2, 0.7), 0.7);
  EXPECT_EQ(parse_expression("clamp(x, 0, 1)").evaluate(1.5), 1.0);
  EXPECT_EQ(parse_expression("clamp(x, 0, 1)").evaluate(-0.5), 0.0);
  EXPECT_EQ(parse_expression("abs(x - 1)").evaluate(0.25), 0.75);
  EXPECT_EQ(parse_expression("exp(x)").evaluate(1.0), std::exp(1.0));
  EXPECT_TRUE(parse_expression("x + u").references(Variable::kU));
  EXPECT_FALSE(parse_expression("x * 2").references(Variable::kU));
  EXPECT_TRUE(parse_expression("1 / 3").is_constant());
}

TEST(Expression, WhitespaceIsInsignificant) {
  EXPECT_EQ(parse_expression(" ( 0.7-x ) ^ 2 "),
            parse_expression("(0.7 - x)^2"));
}

TEST(Expression, Errors) {
  EXPECT_THROW(parse_expression("y + 1"), ParseError);
  EXPECT_THROW(parse_expression("sin(x)"), ParseError);
  EXPECT_THROW(parse_expression("x ^ x"), ParseError);
  EXPECT_THROW(parse_expression("x ^ 0.5"), ParseError);
  EXPECT_THROW(parse_expression("x ^ 257"), ParseError);
  EXPECT_THROW(parse_expression("min(x)"), ParseError);
  EXPECT_THROW(parse_expression("(x"), ParseError);
  EXPECT_THROW(parse_expression("x)"), ParseError);
  EXPECT_THROW(parse_expression(""), ParseError);
  EXPECT_THROW(parse_expression("1.2.3"), ParseError);
}

TEST(Expression, ErrorOffsetsLieWithinSource) {
  const char* bad[] = {"",       "x +",   "(x",  "x)",    "min(x,)", "1e",
                       "x ^ x",  "abs()", "@",   "2 ** 3", "clamp(1,2)",
                       "x u",    "-",     "1..", "exp(x"};
  for (const char* src : bad) {
    try {
      parse_expression(src);
      ADD_FAILURE() << "accepted: " << src;
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), std::strlen(src)) << src;
    }
  }
}

TEST(Expression, ShortestLiteralFormatting) {
  EXPECT_EQ(parse_expression("0.70").to_string(), "0.7");
  EXPECT_EQ(parse_expression("1.000").to_string(), "1");
  EXPECT_EQ(parse_expression("(0.7 - x)^2").to_string(), "(0.7 - x)^2");
  EXPECT_EQ(parse_expression("x*(0.7-x)^2 + (1-x)*x").to_string(),
            "x * (0.7 - x)^2 + (1 - x) * x");
}

TEST(Expression, MinimalParentheses) {
  EXPECT_EQ(parse_expression("x - (u - 1)").to_string(), "x - (u - 1)");
  EXPECT_EQ(parse_expression("(x - u) - 1").to_string(), "x - u - 1");
  EXPECT_EQ(parse_expression("x / (u * 2)").to_string(), "x / (u * 2)");
  EXPECT_EQ(parse_expression("-(x + 1)").to_string(), "-(x + 1)");
  EXPECT_EQ(parse_expression("(x^2)^3").to_string(), "(x^2)^3");
  EXPECT_EQ(parse_expression("x^(2^1)").to_string(), "x^2^1");
}

TEST(Expression, EvaluationIsPure) {
  const Expression e = parse_expression("exp(-x) * clamp(u / 3, 0, 1) + x^3");
  for (double x = -1.0; x <= 1.0; x += 0.125) {
    const double a = e.evaluate(x, 0.5);
    const double b = e.evaluate(x, 0.5);
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

TEST(Expression, FuzzedRoundTripIsStructurallyIdentical) {
  ExpressionFuzzer fuzz(20240611);
  for (int i = 0; i < 2000; ++i) {
    const Expression e = fuzz.next();
    const std::string text = e.to_string();
    const Expression back = parse_expression(text);
    ASSERT_EQ(back, e) << text;
    ASSERT_EQ(back.to_string(), text);
  }
}

TEST(Expression, ToyStringsMatchClosedFormsExactly) {
  const Expression mu0 = parse_expression("x");
  const Expression mu1 = parse_expression("(0.7 - x)^2");
  const Expression score = parse_expression("x*(0.7-x)^2 + (1-x)*x");
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    EXPECT_EQ(mu0.evaluate(x), testing::toy_mu0(x));
    EXPECT_EQ(mu1.evaluate(x), testing::toy_mu1(x));
    EXPECT_EQ(score.evaluate(x), testing::toy_score(x));
  }
}

TEST(Expression, BuilderRejectsBadExponent) {
  const Expression x = Expression::variable(Variable::kX);
  EXPECT_THROW(Expression::binary(BinaryOp::kPow, x, x), DomainError);
  EXPECT_THROW(Expression::binary(BinaryOp::kPow, x, Expression::literal(1.5)),
               DomainError);
  EXPECT_THROW(Expression::call(Function::kClamp, {x}), DomainError);
}

}  // namespace
}  // namespace obsrisk
