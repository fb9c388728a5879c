#include <gtest/gtest.h>

#include <cmath>

#include "spraylab/dim2.hpp"

using namespace spraylab;

namespace {

// p, q for beta = p y1, gamma = q y2; reference values from tests/oracle/dim2_oracle.py
const char* kP = "1 + x1*x2^2/3 + x2/5";
const char* kQ = "1 + x1 + x2^2/4";
const PointTangent kRef{{0.3, -0.2}, {0.7, 0.4}};

Jet metric_at(const ProblemDef& def, const PointTangent& p, int order) { return SpraySource(def).metric_jet(p, order); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST(Dim2, EuclideanFrame) {
    const auto def = parse("dim 2\nmetric L = y1^2 + y2^2");
    const PointTangent p{{0.1, 0.2}, {0.6, -0.8}};
    const auto f = frame(metric_at(def, p, 3), p);
    EXPECT_EQ(f.eps, 1.0);
    EXPECT_NEAR(f.det_g, 1.0, 1e-15);
    EXPECT_NEAR(f.I, 0.0, 1e-14);
    EXPECT_NEAR(f.l_low[0] * f.m_up[0] + f.l_low[1] * f.m_up[1], 0.0, 1e-15);
    EXPECT_LE(f.frame_residual, 1e-14);
}

TEST(Dim2, AngleDerivative) {
    const auto def = parse("dim 2\nmetric L = y1^2 + y2^2");
    const PointTangent p{{0.1, 0.2}, {0.6, 0.3}};
    const FrameJets f = frame_jets(metric_at(def, p, 4), p);
    const Jet theta = lift([](std::span<const Jet> v) { return atan(v[3] / v[2]); }, p.chart(), 3);
    EXPECT_NEAR(angle_derivative(theta, f, p).value(), 1.0, 1e-14);
    const Jet c = lift([](std::span<const Jet> v) { return v[0] * 0.0 + 2.5; }, p.chart(), 3);
    EXPECT_EQ(angle_derivative(c, f, p).value(), 0.0);
    const Jet y1 = lift([](std::span<const Jet> v) { return v[2]; }, p.chart(), 3);
    EXPECT_THROW(angle_derivative(y1, f, p), PreconditionError);
}

TEST(Dim2, ConstantMainScalarFrames) {
    const auto c19 = gen_cms_metric(19, kP, kQ, 1.0 / 3.0);
    const auto f19 = frame(metric_at(c19.metric, kRef, 3), kRef);
    EXPECT_EQ(f19.eps, -1.0);
    EXPECT_NEAR(f19.eps * f19.I * f19.I, c19.main_scalar_invariant(), 1e-10);
    EXPECT_NEAR(f19.I * f19.I, 0.5, 1e-10);
    EXPECT_LE(f19.frame_residual, 1e-10);
    EXPECT_LE(f19.cartan_residual, 1e-10);

    const auto c20 = gen_cms_metric(20, kP, kQ);
    const auto f20 = frame(metric_at(c20.metric, kRef, 3), kRef);
    EXPECT_EQ(f20.eps, 1.0);
    EXPECT_NEAR(f20.I * f20.I, 4.0, 1e-10);
    EXPECT_LE(f20.cartan_residual, 1e-10);

    const auto c21 = gen_cms_metric(21, kP, kQ, 1.0);
    const auto f21 = frame(metric_at(c21.metric, kRef, 3), kRef);
    EXPECT_NEAR(f21.I * f21.I, 2.0, 1e-10);
    EXPECT_LE(f21.cartan_residual, 1e-10);

    const auto unit = gen_cms_metric(19, "1", "1", 1.0 / 3.0);
    EXPECT_NEAR(std::pow(frame(metric_at(unit.metric, kRef, 3), kRef).I, 2), 0.5, 1e-10);
}

TEST(Dim2, FlagCurvatureReferenceValues) {
    const auto c19 = gen_cms_metric(19, kP, kQ, 1.0 / 3.0);
    const auto o = flag_ode(SpraySource(c19.metric), kRef);
    EXPECT_LE(rel(o.lambda, 0.031098661392887677), 1e-8);
    EXPECT_LE(rel(o.d1, 0.021990074356736798), 1e-7);
    EXPECT_LE(rel(o.d2, 0.015549330696427655), 1e-6);
    EXPECT_LE(o.residual, 1e-6);

    EXPECT_LE(rel(flag_ode(SpraySource(gen_cms_metric(20, kP, kQ).metric), kRef).lambda, 0.006180382465472187), 1e-8);
    EXPECT_LE(rel(flag_ode(SpraySource(gen_cms_metric(21, kP, kQ, 1.0).metric), kRef).lambda, -0.0222064919711869), 1e-8);
}

TEST(Dim2, PredictedOmega) {
    // R_{.i} - 2 tau_i at kRef, reference values
    const std::vector<std::pair<CmsMetric, std::array<double, 2>>> cases{
        {gen_cms_metric(19, kP, kQ, 1.0 / 3.0), {0.00481298121052193, -0.008422717118413376}},
        {gen_cms_metric(20, kP, kQ), {0.029507737440421167, -0.05163854052073704}},
        {gen_cms_metric(21, kP, kQ, 1.0), {0.1386109346283891, -0.24256913559968094}},
    };
    for (const auto& [m, ref] : cases) {
        const double w = m.omega12(kRef.x);
        EXPECT_LE(rel(w * kRef.y[1], ref[0]), 1e-10) << m.cls;
        EXPECT_LE(rel(-w * kRef.y[0], ref[1]), 1e-10) << m.cls;
    }
    const std::vector<double> x{0.1, 0.4};
    EXPECT_EQ(gen_cms_metric(20, "1", "1").omega12(x), 0.0);
}

TEST(Dim2, SingleVariableCoefficientsGiveZeroOmega) {
    // p = 1, q = q(x1) (class 19) and p = p(x2), q = 1 (class 21) cancel every term
    RunConfig cfg;
    cfg.points = 8;
    cfg.box = {{"x1", {-0.4, 0.4}}, {"x2", {-0.4, 0.4}}};
    for (const auto& m : {gen_cms_metric(19, "1", "1 + x1", 1.0 / 3.0), gen_cms_metric(21, "1 + x2", "1", 1.0)}) {
        EXPECT_EQ(m.omega12(std::vector<double>{0.1, 0.4}), 0.0);
        const auto rep = classify(SpraySource(m.metric), cfg);
        EXPECT_TRUE(rep.weak_isotropic.value);
        for (const auto& fit : rep.omega) EXPECT_LE(std::abs(fit.omega(0, 1)), 1e-8);
    }
}

TEST(Dim2, WeakIsotropyEndToEnd) {
    RunConfig cfg;
    cfg.points = 16;
    cfg.box = {{"x1", {-0.4, 0.4}}, {"x2", {-0.4, 0.4}}};
    for (const auto& m : {gen_cms_metric(19, kP, kQ, 1.0 / 3.0), gen_cms_metric(20, kP, kQ), gen_cms_metric(21, kP, kQ, 1.0)}) {
        const SpraySource s(m.metric);
        const auto rep = classify(s, cfg);
        EXPECT_TRUE(rep.weak_isotropic.value) << m.cls;
        for (const auto& fit : rep.omega) {
            const double w = m.omega12(fit.x);
            EXPECT_LE(std::abs(fit.omega(0, 1) - w), 1e-6 * std::max(1e-3, std::abs(w))) << m.cls;
        }
        rep.for_each_point([&](const PointTangent& p, const PointAnalysis& a) {
            const double w = m.omega12(p.x);
            const std::array<double, 2> w0{w * p.y[1], -w * p.y[0]};
            for (std::size_t i = 0; i < 2; ++i)
                EXPECT_LE(std::abs(a.bundle.chi[i] - 3.0 * w0[i]), 1e-6 * std::max(1.0, std::abs(a.bundle.chi[i])));
            EXPECT_LE(flag_ode_residual(s, p, cfg), 1e-6);
        });
    }
}

TEST(Dim2, ConstantCurvatureOde) {
    const SpraySource s(parse("dim 2\nmetric L = ((1+x1^2+x2^2)*(y1^2+y2^2) - (x1*y1+x2*y2)^2) / (1+x1^2+x2^2)^2"));
    const auto o = flag_ode(s, PointTangent{{0.2, -0.5}, {0.3, 0.9}});
    EXPECT_NEAR(o.lambda, 1.0, 1e-10);
    EXPECT_NEAR(o.d1, 0.0, 1e-10);
    EXPECT_NEAR(o.d2, 0.0, 1e-9);
}

TEST(Dim2, Errors) {
    EXPECT_THROW(gen_cms_metric(18, "1", "1"), ParamError);
    EXPECT_THROW(gen_cms_metric(19, "1", "1", 1.0), ParamError);
    const auto neg = parse("dim 2\nmetric L = -(y1^2 + y2^2)");
    EXPECT_THROW(frame(metric_at(neg, kRef, 3), kRef), NegativeMetric);
    EXPECT_THROW(flag_ode(SpraySource(parse("dim 2\nspray G1 = 0\nspray G2 = 0")), kRef), PreconditionError);
}
