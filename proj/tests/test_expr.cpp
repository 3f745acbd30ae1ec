#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <adapted_mech/expr.hpp>
#include <adapted_mech/verify.hpp>

#include "oracles.hpp"

using namespace adapted_mech;

namespace {

BundlePoint pt(std::initializer_list<double> z) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z.size()));
  Eigen::Index k = 0;
  for (double d : z) v(k++) = d;
  return BundlePoint::from_natural(v);
}

template <class T>
const T* as(const Expression& e) {
  return std::get_if<T>(&e.node().data);
}

}  // namespace

TEST(ExprParse, HalfSquareOfVelocity) {
  const Expression e = parse("0.5*y1^2", 1);
  const auto* mul = as<node::Binary>(e);
  ASSERT_NE(mul, nullptr);
  EXPECT_EQ(mul->op, BinaryOp::mul);
  ASSERT_NE(as<node::Constant>(mul->lhs), nullptr);
  EXPECT_EQ(as<node::Constant>(mul->lhs)->value, 0.5);
  const auto* pw = as<node::Binary>(mul->rhs);
  ASSERT_NE(pw, nullptr);
  EXPECT_EQ(pw->op, BinaryOp::pow);
  const auto* y = as<node::Coordinate>(pw->lhs);
  ASSERT_NE(y, nullptr);
  EXPECT_EQ(y->kind, CoordKind::y);
  EXPECT_EQ(y->index, 1);
  EXPECT_EQ(as<node::Constant>(pw->rhs)->value, 2.0);
}

TEST(ExprParse, SubtractNegation) {
  const Expression e = parse("x1 - -x1", 1);
  EXPECT_EQ(e, Expression::x(1) - (-Expression::x(1)));
}

TEST(ExprParse, UnknownIdentifierReportsPosition) {
  try {
    parse("k*z1", 1, {"k"});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
    EXPECT_NE(e.message().find("z1"), std::string::npos);
  }
}

TEST(ExprParse, CoordinateBeyondDimension) {
  EXPECT_THROW(parse("x2", 1), ParseError);
  EXPECT_NO_THROW(parse("x2", 2));
}

TEST(ExprParse, UnknownFunction) { EXPECT_THROW(parse("tan(x1)", 1), ParseError); }

TEST(ExprParse, SyntaxErrors) {
  for (const char* bad : {"", "x1 +", "(x1", "x1)", "2**3", "sin x1", "1e", "x1 $ 2"}) {
    EXPECT_THROW(parse(bad, 1), ParseError) << bad;
  }
}

TEST(ExprParse, PowerIsRightAssociativeAndBindsTighterThanNegation) {
  EXPECT_EQ(parse("2^3^2", 1), pow(Expression::constant(2), pow(Expression::constant(3), Expression::constant(2))));
  EXPECT_DOUBLE_EQ(eval_value(parse("-x1^2", 1), pt({3, 0})), -9.0);
  EXPECT_DOUBLE_EQ(eval_value(parse("(-x1)^2", 1), pt({3, 0})), 9.0);
}

TEST(ExprPrint, Examples) {
  EXPECT_EQ(Expression::constant(3).to_string(), "3");
  EXPECT_EQ((-Expression::x(1)).to_string(), "-x1");
  EXPECT_EQ(parse("x1 - (x1 - y1)", 1).to_string(), "x1 - (x1 - y1)");
  EXPECT_EQ(parse("x1/(y1*x1)", 1).to_string(), "x1/(y1*x1)");
}

TEST(ExprPrint, NegativeConstantIsNegation) {
  const Expression c = Expression::constant(-2.5);
  ASSERT_NE(as<node::Unary>(c), nullptr);
  EXPECT_EQ(parse(c.to_string(), 1), c);
}

TEST(ExprPrint, RoundTripHandWritten) {
  for (const char* text : {"x1 - (y1 - x1)", "(x1 + y1)*x1", "x1/(y1/x1)", "(-x1)^2", "-x1^2", "2^3^2", "(2^3)^2",
                           "-(-x1)", "sin(x1)^cos(y1)", "exp(-x1)*log(2 + y1^2)", "sqrt(1 + x1^2)/(1 - -y1)",
                           "0.1 + 1e-7*x1", "1.7976931348623157e308*x1", "k*x1 - m*y1^3"}) {
    const Expression e = parse(text, 1, {"k", "m"});
    EXPECT_EQ(parse(e.to_string(), 1, {"k", "m"}), e) << text << " -> " << e.to_string();
  }
}

TEST(ExprPrint, RoundTripGenerated) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 500; ++k) {
    const int n = 1 + k % 3;
    const Expression e = sampling::random_smooth_expression(rng, n, 4);
    EXPECT_EQ(parse(e.to_string(), n), e) << e.to_string();
  }
}

TEST(ExprJet, ScalarExamples) {
  const Jet2 a = eval_jet(parse("0.5*y1^2", 1), pt({3, 2}));
  EXPECT_DOUBLE_EQ(a.value, 2.0);
  EXPECT_EQ(a.gradient, Eigen::Vector2d(0, 2));
  EXPECT_EQ(a.hessian, (Eigen::Matrix2d() << 0, 0, 0, 1).finished());

  const Jet2 b = eval_jet(parse("x1*y1", 1), pt({2, 3}));
  EXPECT_DOUBLE_EQ(b.value, 6.0);
  EXPECT_EQ(b.gradient, Eigen::Vector2d(3, 2));
  EXPECT_EQ(b.hessian, (Eigen::Matrix2d() << 0, 1, 1, 0).finished());

  const Jet2 c = eval_jet(parse("sin(x1)", 1), pt({0, 0}));
  EXPECT_DOUBLE_EQ(c.value, 0.0);
  EXPECT_DOUBLE_EQ(c.gradient(0), 1.0);
  EXPECT_DOUBLE_EQ(c.hessian(0, 0), 0.0);
}

TEST(ExprJet, Parameters) {
  const Expression e = parse("k*x1^2", 1, {"k"});
  const Jet2 j = eval_jet(e, pt({3, 0}), {{"k", 2.0}});
  EXPECT_DOUBLE_EQ(j.value, 18.0);
  EXPECT_DOUBLE_EQ(j.gradient(0), 12.0);
  EXPECT_DOUBLE_EQ(j.hessian(0, 0), 4.0);
  EXPECT_THROW(eval_jet(e, pt({3, 0})), EvaluationError);
}

TEST(ExprJet, IntegerPowersOfNegativeBase) {
  const Jet2 j = eval_jet(parse("x1^3 + x1^-2", 1), pt({-2, 0}));
  EXPECT_DOUBLE_EQ(j.value, -8.0 + 0.25);
  EXPECT_DOUBLE_EQ(j.gradient(0), 12.0 + 0.25);  // 3x^2 - 2x^-3
  EXPECT_DOUBLE_EQ(j.hessian(0, 0), -12.0 + 6.0 / 16.0);
}

TEST(ExprJet, DomainErrorsNameTheSubexpression) {
  try {
    eval_jet(parse("1 + log(x1)", 1), pt({-1, 0}));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_EQ(e.subexpression(), "log(x1)");
  }
  EXPECT_THROW(eval_jet(parse("sqrt(x1)", 1), pt({-1, 0})), DomainError);
  EXPECT_THROW(eval_jet(parse("1/x1", 1), pt({0, 0})), DomainError);
  EXPECT_THROW(eval_jet(parse("x1^0.5", 1), pt({-1, 0})), DomainError);
  EXPECT_THROW(eval_value(parse("1/(x1 - x1)", 1), pt({1, 0})), DomainError);
  EXPECT_THROW(eval_value(parse("exp(x1)", 1), pt({1000, 0})), DomainError);
}

TEST(ExprJet, PointOfWrongDimension) {
  EXPECT_THROW(eval_jet(parse("x2", 2), pt({1, 2})), EvaluationError);
}

TEST(ExprJet, ValueAgreesWithJet) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 3;
    const Expression e = sampling::random_smooth_expression(rng, n, 4);
    const BundlePoint p = sampling::random_point(rng, n);
    EXPECT_DOUBLE_EQ(eval_value(e, p), eval_jet(e, p).value) << e.to_string();
  }
}

TEST(ExprJet, HessianIsExactlySymmetric) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 3;
    const Jet2 j = eval_jet(sampling::random_smooth_expression(rng, n, 4), sampling::random_point(rng, n));
    EXPECT_EQ(j.hessian, j.hessian.transpose());
  }
}

TEST(ExprJet, SumAndProductRules) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + k % 3;
    const Expression a = sampling::random_smooth_expression(rng, n, 3);
    const Expression b = sampling::random_smooth_expression(rng, n, 3);
    const BundlePoint p = sampling::random_point(rng, n);
    const Jet2 ja = eval_jet(a, p), jb = eval_jet(b, p);
    const Jet2 sum = eval_jet(a + b, p), prod = eval_jet(a * b, p);
    EXPECT_NEAR((sum.gradient - ja.gradient - jb.gradient).norm(), 0.0, 1e-12);
    const Eigen::MatrixXd expected = ja.hessian * jb.value + jb.hessian * ja.value +
                                     ja.gradient * jb.gradient.transpose() + jb.gradient * ja.gradient.transpose();
    EXPECT_LE((prod.hessian - expected).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
  }
}

// Jets against fourth-order differences of plain values.
TEST(ExprJet, AgreesWithFiniteDifferences) {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 3;
    const Expression e = sampling::random_smooth_expression(rng, n, 3);
    const BundlePoint p = sampling::random_point(rng, n);
    const Jet2 j = eval_jet(e, p);
    const oracle::Field f = oracle::value_of(e);
    const Eigen::VectorXd g = oracle::gradient(f, p.natural());
    const Eigen::MatrixXd H = oracle::hessian(f, p.natural());
    for (Eigen::Index r = 0; r < g.size(); ++r) {
      EXPECT_LE(oracle::relative_error(j.gradient(r), g(r)), 1e-6) << e.to_string();
      for (Eigen::Index s = 0; s < g.size(); ++s) {
        EXPECT_LE(oracle::relative_error(j.hessian(r, s), H(r, s)), 1e-5) << e.to_string() << " at " << r << "," << s;
      }
    }
    ++compared;
  }
  EXPECT_EQ(compared, 200);
}

TEST(ExprMisc, ReferencedParametersAndFiber) {
  const Expression e = parse("k*x1 + m*sin(y2)", 2, {"k", "m", "unused"});
  EXPECT_EQ(referenced_parameters(e), (ParameterSet{"k", "m"}));
  EXPECT_TRUE(references_fiber(e));
  EXPECT_FALSE(references_fiber(parse("x1^2", 1)));
}
