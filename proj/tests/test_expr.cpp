#include "monolab/expr.hpp"
#include "monolab/fixtures.hpp"
#include "monolab/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace monolab;

namespace {

double eval1(const std::string& src, std::vector<double> u) {
  return ReactionField::parse(src, static_cast<int>(u.size())).eval(u)[0];
}

// Central differences with step 1e-6 (1 + |u_j|).
Eigen::MatrixXd fd_jacobian(const ReactionField& f, const std::vector<double>& u) {
  const std::size_t n = f.size();
  Eigen::MatrixXd jac(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(u[j]));
    std::vector<double> up = u, dn = u;
    up[j] += h;
    dn[j] -= h;
    const auto fu = f.eval(up), fd = f.eval(dn);
    for (std::size_t i = 0; i < n; ++i) jac(i, j) = (fu[i] - fd[i]) / (2.0 * h);
  }
  return jac;
}

}  // namespace

TEST(Parse, FixtureFields) {
  const ReactionField tanh2 = ReactionField::parse(kTanh2Source, 2);
  EXPECT_EQ(tanh2.size(), 2u);
  const ReactionField chafee = ReactionField::parse("u1 - u1^3", 1);
  EXPECT_EQ(chafee.size(), 1u);
  EXPECT_DOUBLE_EQ(chafee.eval({0.5})[0], 0.5 - 0.125);
}

TEST(Parse, VariableOutOfRange) {
  try {
    ReactionField::parse("u3", 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 0u);
    EXPECT_NE(std::string(e.what()).find("u3"), std::string::npos);
  }
  EXPECT_THROW(ReactionField::parse("u0", 1), ParseError);
}

TEST(Parse, Errors) {
  EXPECT_THROW(ReactionField::parse("foo(u1)", 1), ParseError);
  EXPECT_THROW(ReactionField::parse("x + 1", 1), ParseError);
  EXPECT_THROW(ReactionField::parse("u1; u1", 1), ParseError);  // arity mismatch
  EXPECT_THROW(ReactionField::parse("u1", 2), ParseError);
  EXPECT_THROW(ReactionField::parse("", 1), ParseError);
  try {
    ReactionField::parse("u1 + * 2", 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 5u);
  }
  try {
    ReactionField::parse("(u1 + 2", 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 7u);
  }
  EXPECT_NO_THROW(ReactionField::parse("u1;", 1));
}

TEST(Parse, Precedence) {
  EXPECT_DOUBLE_EQ(eval1("-u1^2", {3.0}), -9.0);
  EXPECT_DOUBLE_EQ(eval1("2^3^2", {0.0}), 512.0);
  EXPECT_DOUBLE_EQ(eval1("2^-1", {0.0}), 0.5);
  EXPECT_DOUBLE_EQ(eval1("1 - 2 - 3", {0.0}), -4.0);
  EXPECT_DOUBLE_EQ(eval1("8 / 4 / 2", {0.0}), 1.0);
  EXPECT_DOUBLE_EQ(eval1("1 + 2 * 3", {0.0}), 7.0);
  EXPECT_DOUBLE_EQ(eval1("(1 + 2) * 3", {0.0}), 9.0);
  EXPECT_DOUBLE_EQ(eval1("-2 * -u1", {4.0}), 8.0);
  EXPECT_DOUBLE_EQ(eval1("1.5e1 + .5", {0.0}), 15.5);
  EXPECT_DOUBLE_EQ(eval1("abs(u1) + sqrt(4) + exp(0) + cos(0) + sin(0)", {-2.0}), 6.0);
}

TEST(Eval, Examples) {
  const ReactionField f = ReactionField::parse(kTanh2Source, 2);
  const auto at0 = f.eval({0.0, 0.0});
  EXPECT_EQ(at0[0], 0.0);
  EXPECT_EQ(at0[1], 0.0);
  EXPECT_EQ(ReactionField::parse("u1 - u1^3", 1).eval({1.0})[0], 0.0);
  const double expect = -1.0 + 2.0 * std::tanh(1.0);
  const auto at1 = f.eval({1.0, 1.0});
  EXPECT_NEAR(at1[0], 0.523188, 1e-6);
  EXPECT_DOUBLE_EQ(at1[0], expect);
  EXPECT_DOUBLE_EQ(at1[1], expect);
}

TEST(Eval, DomainErrorsCarryComponent) {
  const ReactionField f = ReactionField::parse("u1; sqrt(u2)", 2);
  try {
    f.eval({1.0, -1.0});
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.component(), 1u);
  }
  EXPECT_THROW(ReactionField::parse("1 / u1", 1).eval({0.0}), EvaluationError);
  EXPECT_THROW(f.eval({1.0}), std::exception);
}

TEST(Jacobian, Examples) {
  const ReactionField f = ReactionField::parse(kTanh2Source, 2);
  const Eigen::MatrixXd j0 = f.jacobian({0.0, 0.0});
  EXPECT_DOUBLE_EQ(j0(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(j0(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(j0(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(j0(1, 1), -1.0);

  EXPECT_DOUBLE_EQ(ReactionField::parse("u1 - u1^3", 1).jacobian({1.0})(0, 0), -2.0);

  const double a = oracle::tanh2_root();
  const Eigen::MatrixXd ja = f.jacobian({a, a});
  const double expect = 2.0 * (1.0 - (a / 2.0) * (a / 2.0));  // tanh(a) = a/2
  EXPECT_NEAR(ja(0, 1), expect, 1e-12);
  EXPECT_NEAR(ja(1, 0), 0.16637, 1e-5);
}

TEST(Jacobian, MatchesFiniteDifferencesOnFixtures) {
  const std::vector<std::pair<std::string, int>> fields{
      {kTanh2Source, 2}, {kChafeeSource, 1}, {"u1*u2 - exp(-u1) + sin(u2)^2; u1/(1 + u2^2) - abs(u1)^1.5 + cos(u1*u2)", 2}};
  Rng rng(2024);
  for (const auto& [src, arity] : fields) {
    const ReactionField f = ReactionField::parse(src, arity);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> u(static_cast<std::size_t>(arity));
      for (double& x : u) x = rng.uniform(-3.0, 3.0);
      const Eigen::MatrixXd ad = f.jacobian(u);
      const Eigen::MatrixXd fd = fd_jacobian(f, u);
      for (Eigen::Index i = 0; i < ad.rows(); ++i) {
        for (Eigen::Index j = 0; j < ad.cols(); ++j) {
          EXPECT_LE(std::abs(ad(i, j) - fd(i, j)), 1e-6 * std::max(1.0, std::abs(fd(i, j)))) << src;
        }
      }
    }
  }
}

TEST(Jacobian, PowerWithVariableExponent) {
  const ReactionField f = ReactionField::parse("u1^u2; u2", 2);
  const Eigen::MatrixXd j = f.jacobian({2.0, 3.0});
  EXPECT_NEAR(j(0, 0), 3.0 * 4.0, 1e-12);
  EXPECT_NEAR(j(0, 1), 8.0 * std::log(2.0), 1e-12);
}

TEST(Jacobian, NonDifferentiablePointIsAnError) {
  const ReactionField f = ReactionField::parse("sqrt(u1)", 1);
  EXPECT_THROW(f.jacobian({0.0}), EvaluationError);
  EXPECT_NEAR(f.jacobian({4.0})(0, 0), 0.25, 1e-15);
}

TEST(Printing, RoundTripIsStructurallyIdentical) {
  const std::vector<std::pair<std::string, int>> sources{
      {kTanh2Source, 2},
      {kChafeeSource, 1},
      {"-u1^2^-3 / (1 - u2) * tanh(-(u1 + 0.1)); u2", 2},
      {"2.5e-3 * abs(u1 - u2) - sqrt(exp(u1)); --u2", 2}};
  for (const auto& [src, arity] : sources) {
    const ReactionField f = ReactionField::parse(src, arity);
    const ReactionField g = ReactionField::parse(f.to_string(), arity);
    ASSERT_EQ(f.size(), g.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_TRUE(structurally_equal(*f.components()[i], *g.components()[i])) << f.to_string();
    }
    EXPECT_EQ(f.to_string(), g.to_string());
  }
  // Numbers print with enough digits to round-trip.
  const ReactionField f = ReactionField::parse("0.1 + 1e-300 * u1", 1);
  EXPECT_TRUE(structurally_equal(*f.components()[0], *ReactionField::parse(f.to_string(), 1).components()[0]));
}

TEST(Eval, DeterministicAcrossCopies) {
  const ReactionField f = ReactionField::parse(kTanh2Source, 2);
  const ReactionField g = f;
  const std::vector<double> u{0.37, -1.21};
  EXPECT_EQ(f.eval(u), g.eval(u));
  EXPECT_EQ(f.eval(u), f.eval(u));
}
