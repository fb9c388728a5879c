#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spraylab/dsl.hpp"

using namespace spraylab;

TEST(Dsl, ParsesSprayWithFunctionCoefficients) {
    const auto def = parse("dim 2\nspray G1 = x1*(y1^2 - y2^2)\nspray G2 = 2*x1*y1*y2");
    EXPECT_EQ(def.dim, 2);
    EXPECT_EQ(def.kind, ProblemKind::Spray);
    ASSERT_EQ(def.exprs.size(), 2u);
    const std::vector<double> env{0.5, 0.0, 3.0, 1.0};
    EXPECT_DOUBLE_EQ(evaluate_real(*def.exprs[0], env), 0.5 * 8.0);
    EXPECT_DOUBLE_EQ(evaluate_real(*def.exprs[1], env), 3.0);
}

TEST(Dsl, ParsesMetric) {
    const auto def = parse(
        "dim 2\nmetric L = ((1+x1^2+x2^2)*(y1^2+y2^2) - (x1*y1+x2*y2)^2) / (1+x1^2+x2^2)^2");
    EXPECT_EQ(def.kind, ProblemKind::Metric);
    EXPECT_EQ(def.exprs.size(), 1u);
    const std::vector<double> env{0.0, 0.0, 1.0, 2.0};
    EXPECT_DOUBLE_EQ(evaluate_real(def.metric(), env), 5.0);
}

TEST(Dsl, Errors) {
    EXPECT_THROW(parse("dim 2\nspray G1 = y3"), DimensionError);
    EXPECT_THROW(parse("dim 2\nspray G1 = y1\nspray G2 = x0"), DimensionError);
    EXPECT_THROW(parse("dim 1\nspray G1 = y1"), DimensionError);
    EXPECT_THROW(parse("dim 2\nspray G1 = y1"), ArityError);
    EXPECT_THROW(parse("dim 2\nspray G1 = y1\nspray G1 = y2"), ArityError);
    EXPECT_THROW(parse("dim 2\nspray G1 = y1\nspray G2 = y2\nmetric L = y1"), ArityError);
    EXPECT_THROW(parse("dim 2\nspray G1 = sqrt(y1, y2)\nspray G2 = y2"), ArityError);
    EXPECT_THROW(parse("dim 2\nspray G1 = y1\nspray G2 = y2", {{"r", 2.0}}), ParamError);
    try {
        parse("dim 2\nspray G1 = y1 +\nspray G2 = y2");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_EQ(e.col(), 16);
    }
    try {
        parse("dim 2\nspray G1 = y1 * q\nspray G2 = y2");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_EQ(e.col(), 17);
    }
    EXPECT_THROW(parse("spray G1 = y1"), SyntaxError);
    EXPECT_THROW(parse("dim 2\nspray G1 = (y1\nspray G2 = y2"), SyntaxError);
    EXPECT_THROW(parse("dim 2\nspray G1 = y1 $ 2\nspray G2 = y2"), SyntaxError);
}

TEST(Dsl, PrecedenceAndAssociativity) {
    auto value = [](const std::string& e) {
        const auto def = parse("dim 2\nmetric L = " + e);
        const std::vector<double> env{2.0, 3.0, 0.0, 0.0};
        return evaluate_real(def.metric(), env);
    };
    EXPECT_DOUBLE_EQ(value("2^3^2"), 512.0);
    EXPECT_DOUBLE_EQ(value("-x1^2"), -4.0);
    EXPECT_DOUBLE_EQ(value("x1^-1"), 0.5);
    EXPECT_DOUBLE_EQ(value("1 - 2 - 3"), -4.0);
    EXPECT_DOUBLE_EQ(value("8 / 2 / 2"), 2.0);
    EXPECT_DOUBLE_EQ(value("1 + 2 * x2"), 7.0);
    EXPECT_DOUBLE_EQ(value("x2^0.5"), std::sqrt(3.0));
    EXPECT_NEAR(value("cos(pi)"), -1.0, 1e-15);
    EXPECT_DOUBLE_EQ(value("ln(exp(x1)) + abs(-x2) + atan(0) + sin(0)"), 5.0);
}

TEST(Dsl, ConstantsAndOverrides) {
    const std::string text = "# comment\ndim 2\nconst r = 1\nconst s = -0.5  # trailing\n"
                             "spray G1 = 1/(2*r)*y2*sqrt(y1^2+y2^2)\nspray G2 = s/r*y1*sqrt(y1^2+y2^2)\n"
                             "guard = y1^2 + y2^2\n";
    const auto def = parse(text);
    const std::vector<double> env{0.0, 0.0, 3.0, 4.0};
    EXPECT_DOUBLE_EQ(evaluate_real(*def.exprs[0], env), 10.0);
    EXPECT_DOUBLE_EQ(evaluate_real(*def.exprs[1], env), -7.5);
    ASSERT_EQ(def.guards.size(), 1u);
    const auto over = parse(text, {{"r", 2.0}});
    EXPECT_DOUBLE_EQ(evaluate_real(*over.exprs[0], env), 5.0);
    ASSERT_EQ(over.constants.size(), 2u);
    EXPECT_EQ(over.constants[0].first, "r");
    EXPECT_DOUBLE_EQ(over.constants[0].second, 2.0);
}

TEST(Dsl, JetEvaluation) {
    const auto def = parse("dim 2\nconst r = 1\nspray G1 = 1/(2*r)*y2*sqrt(y1^2+y2^2)\nspray G2 = -1/(2*r)*y1*sqrt(y1^2+y2^2)");
    const std::vector<double> center{0.1, 0.2, 3.0, 4.0};
    const auto vars = chart_variables(center, 2);
    const Jet g1 = evaluate(*def.exprs[0], vars);
    EXPECT_NEAR(g1.value(), 10.0, 1e-14);
    // d/dy2 of y2|y|/2 = (|y| + y2^2/|y|)/2
    EXPECT_NEAR(g1.partial({0, 0, 0, 1}), 0.5 * (5.0 + 16.0 / 5.0), 1e-13);
    const auto five = parse("dim 2\nmetric L = 5");
    EXPECT_DOUBLE_EQ(evaluate(five.metric(), vars).value(), 5.0);
    EXPECT_EQ(evaluate(five.metric(), vars).partial({0, 0, 1, 0}), 0.0);
    const auto ident = parse("dim 2\nmetric L = y1");
    const Jet y1 = evaluate(ident.metric(), vars);
    for (std::size_t k = 0; k < y1.coefficients().size(); ++k) EXPECT_EQ(y1.coefficients()[k], vars[2].coefficients()[k]);
}

TEST(Dsl, PrettyPrintRoundTrip) {
    const char* sources[] = {
        "dim 2\nspray G1 = -x1*(y1^2 - y2^2)^-1.5 + 1e-5\nspray G2 = -(2)*x1*y1*-y2/3\nguard = 1 - x1^2",
        "dim 3\nmetric F = (y3)^2 + x1^2*y1^2 + y1*y2 + x3^2*y1*y3 - -2.5",
        "dim 2\nmetric L = exp(2*x1^2)*(y1^2+y2^2)*atan(x2)^(1/3) - ln(abs(x1)) + cos(sin(-x2))",
    };
    for (const char* src : sources) {
        const auto a = parse(src);
        const auto b = parse(to_source(a));
        ASSERT_EQ(a.exprs.size(), b.exprs.size());
        for (std::size_t i = 0; i < a.exprs.size(); ++i) EXPECT_TRUE(structurally_equal(*a.exprs[i], *b.exprs[i])) << to_source(a);
        ASSERT_EQ(a.guards.size(), b.guards.size());
        for (std::size_t i = 0; i < a.guards.size(); ++i) EXPECT_TRUE(structurally_equal(*a.guards[i], *b.guards[i]));
        EXPECT_EQ(to_source(a), to_source(b));
    }
}

TEST(Dsl, JetValueMatchesRealEvaluator) {
    const auto def = parse("dim 2\nmetric L = exp(2*x1^2)*(y1^2+y2^2)*(1+x2^2)^(1/3) / sqrt(2 + cos(x1*y2))");
    const std::vector<double> center{0.3, -0.6, 0.8, -0.4};
    const auto vars = chart_variables(center, 0);
    const double jet = evaluate(def.metric(), vars).value();
    const double real = evaluate_real(def.metric(), center);
    EXPECT_LE(std::abs(jet - real), 1e-12 * std::abs(real));
}

TEST(Dsl, RealEvaluatorDomainErrors) {
    const std::vector<double> env{0.0, -1.0, 1.0, 1.0};
    EXPECT_THROW(evaluate_real(parse("dim 2\nmetric L = 1/x1").metric(), env), DomainError);
    EXPECT_THROW(evaluate_real(parse("dim 2\nmetric L = sqrt(x2)").metric(), env), DomainError);
    EXPECT_THROW(evaluate_real(parse("dim 2\nmetric L = ln(x1)").metric(), env), DomainError);
    EXPECT_THROW(evaluate_real(parse("dim 2\nmetric L = x2^0.5").metric(), env), DomainError);
}
