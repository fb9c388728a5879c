#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spraylab/geometry.hpp"
#include "spraylab/oracle.hpp"

using namespace spraylab;

namespace {

SpraySource source(const std::string& text, std::map<std::string, double> consts = {}) {
    return SpraySource(parse(text, consts));
}

const char* kEx71 = "dim 2\nspray G1 = x1*(y1^2 - y2^2)\nspray G2 = 2*x1*y1*y2";
const char* kEx72 = "dim 2\nconst r = 1\nspray G1 = 1/(2*r)*y2*sqrt(y1^2+y2^2)\nspray G2 = -1/(2*r)*y1*sqrt(y1^2+y2^2)";
const char* kEx73 =
    "dim 2\nconst c = 2\n"
    "spray G1 = (-(y1^2+y2^2)*x1 + c*(x1*y1+x2*y2)*y1)/(1-x1^2-x2^2)\n"
    "spray G2 = (-(y1^2+y2^2)*x2 + c*(x1*y1+x2*y2)*y2)/(1-x1^2-x2^2)\nguard = 1 - x1^2 - x2^2";
const char* kEx76 = "dim 2\nspray G1 = -3*y2^2\nspray G2 = -2*y2^3/y1\nguard = y1";
const char* kFlat = "dim 2\nspray G1 = 0\nspray G2 = 0";
const char* kSphere = "dim 2\nmetric L = ((1+x1^2+x2^2)*(y1^2+y2^2) - (x1*y1+x2*y2)^2) / (1+x1^2+x2^2)^2";

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(Geometry, MetricTensorExamples) {
    const PointTangent p{{0.3, -0.1}, {0.6, 0.8}};
    const auto flat = source("dim 2\nmetric L = y1^2 + y2^2");
    const auto m = metric_tensor(flat.metric_jet(p, 2), p);
    EXPECT_TRUE(m.g.values().isApprox(Eigen::Matrix2d::Identity()));
    EXPECT_NEAR(m.y_low[0].value(), 0.6, 1e-15);
    EXPECT_NEAR(m.y_low[1].value(), 0.8, 1e-15);

    const PointTangent origin{{0.0, 0.0}, {0.6, 0.8}};
    const auto sph = source(kSphere);
    EXPECT_LT((metric_tensor(sph.metric_jet(origin, 2), origin).g.values() - Eigen::Matrix2d::Identity()).norm(), 1e-14);

    const auto degenerate = source("dim 2\nmetric L = ((x1^2+x2^2)*(y1^2+y2^2) - (x1*y1+x2*y2)^2)/(x1^2+x2^2)^2");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const PointTangent q{{u(rng), u(rng)}, {u(rng), u(rng)}};
        EXPECT_THROW(metric_tensor(degenerate.metric_jet(q, 2), q), DegenerateMetric);
    }
}

TEST(Geometry, SprayFromMetric) {
    const PointTangent p{{0.4, -0.2}, {0.7, 0.3}};
    const auto flat = source("dim 2\nmetric L = y1^2 + y2^2");
    for (const auto& g : flat.spray_jets(p, 2)) EXPECT_EQ(g.value(), 0.0);

    const auto conformal = source("dim 2\nmetric L = -2*exp(2*x1^2)*(y1^2+y2^2)");
    const auto ex71 = source(kEx71);
    const auto a = conformal.spray_jets(p, 3);
    const auto b = ex71.spray_jets(p, 3);
    for (int i = 0; i < 2; ++i)
        for (std::size_t k = 0; k < a[static_cast<std::size_t>(i)].coefficients().size(); ++k)
            EXPECT_NEAR(a[static_cast<std::size_t>(i)].coefficients()[k], b[static_cast<std::size_t>(i)].coefficients()[k], 1e-12);

    // sphere-type metric: G is 2-homogeneous and L is parallel
    const auto sph = source(kSphere);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int t = 0; t < 8; ++t) {
        const PointTangent q{{u(rng), u(rng)}, {u(rng), u(rng) + 1.0}};
        const auto G = sph.spray_jets(q, 3);
        for (const auto& g : G) {
            double s = -2.0 * g.value();
            for (int k = 0; k < 2; ++k) s += q.y[static_cast<std::size_t>(k)] * ydot(g, 2, k).value();
            EXPECT_LT(std::abs(s), 1e-12);
        }
        const Connection c = berwald(G, q);
        const TensorField dL = h_cov(scalar_field(2, sph.metric_jet(q, 3)), c);
        EXPECT_LT(dL.max_abs(), 1e-12);
    }
}

TEST(Geometry, RiemannExamples) {
    const auto ex72 = source(kEx72);
    const PointTangent p{{0.2, 0.5}, {3.0, 4.0}};
    const auto cj = curvature(ex72, p);
    EXPECT_NEAR(cj.Ric.value(), 25.0, 1e-12);
    const TensorField dRic = h_cov(scalar_field(2, cj.Ric), cj.conn);
    EXPECT_NEAR(dRic.c[0].value(), 20.0, 1e-12);
    EXPECT_NEAR(dRic.c[1].value(), -15.0, 1e-12);

    const auto ex73 = source(kEx73);
    const PointTangent origin{{0.0, 0.0}, {1.0, 0.0}};
    EXPECT_NEAR(curvature(ex73, origin).Ric.value(), -4.0, 1e-12);

    const auto flat = source(kFlat);
    const auto b = bundle(curvature(flat, p));
    EXPECT_EQ(max_abs(b.R), 0.0);
    EXPECT_EQ(max_abs(b.N), 0.0);
    EXPECT_EQ(max_abs(b.Gamma), 0.0);
    EXPECT_EQ(max_abs(b.B), 0.0);
    EXPECT_EQ(max_abs(b.chi), 0.0);
    EXPECT_EQ(max_abs(b.H4), 0.0);
    EXPECT_EQ(max_abs(b.Hij), 0.0);
    EXPECT_EQ(max_abs(b.Hi), 0.0);
}

TEST(Geometry, BerwaldTensor) {
    const PointTangent p{{0.2, 0.5}, {0.3, -0.9}};
    EXPECT_LT(max_abs(bundle(curvature(source(kEx71), p)).B), 1e-14);
    const auto b72 = bundle(curvature(source(kEx72), p));
    EXPECT_GT(max_abs(b72.B), 0.1);
    // total symmetry of B and symmetry of Gamma
    for (int i = 0; i < 2; ++i)
        for (int h = 0; h < 2; ++h)
            for (int j = 0; j < 2; ++j) {
                EXPECT_EQ(b72.Gamma[static_cast<std::size_t>((i * 2 + h) * 2 + j)],
                          b72.Gamma[static_cast<std::size_t>((i * 2 + j) * 2 + h)]);
                for (int k = 0; k < 2; ++k)
                    EXPECT_NEAR(b72.B[static_cast<std::size_t>(((i * 2 + h) * 2 + j) * 2 + k)],
                                b72.B[static_cast<std::size_t>(((i * 2 + k) * 2 + h) * 2 + j)], 1e-13);
            }
}

TEST(Geometry, ChiAndHTensors) {
    const PointTangent p{{0.1, 0.2}, {1.0, 1.0}};
    const auto b76 = bundle(curvature(source(kEx76), p));
    EXPECT_NEAR(b76.Ric, 0.0, 1e-12);
    EXPECT_GT(max_abs(b76.chi), 1.0);
    EXPECT_GT(std::abs(b76.Hij[1] - b76.Hij[2]), 1.0);

    const auto b71 = bundle(curvature(source(kEx71), PointTangent{{0.4, 0.2}, {0.5, -0.7}}));
    EXPECT_LT(max_abs(b71.chi), 1e-12);
    EXPECT_LT(std::abs(b71.Hij[1] - b71.Hij[2]), 1e-12);
}

TEST(Geometry, UniversalIdentities) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const char* sources[] = {kEx71, kEx72, kEx73, kEx76, kSphere,
                             "dim 3\nspray G1 = x2*y3^2\nspray G2 = 0\nspray G3 = 0"};
    for (const char* src : sources) {
        const auto s = source(src);
        const int n = s.dim();
        for (int t = 0; t < 6; ++t) {
            PointTangent p;
            for (int i = 0; i < n; ++i) p.x.push_back(u(rng));
            for (int i = 0; i < n; ++i) p.y.push_back(u(rng) + (i == 0 ? 1.0 : 0.0));
            const auto b = bundle(curvature(s, p));
            const Tolerances tol;
            EXPECT_TRUE(tol.is_zero(b.ry_residual, b.curvature_scale)) << src;
            EXPECT_TRUE(tol.is_zero(b.bianchi_residual, b.bianchi_scale)) << src << " " << b.bianchi_residual;
        }
    }
}

TEST(Geometry, FiniteDifferenceOracle) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const char* sources[] = {kEx72, kEx73, kEx76, kSphere};
    for (const char* src : sources) {
        const auto s = source(src);
        for (int t = 0; t < 3; ++t) {
            const PointTangent p{{u(rng), u(rng)}, {u(rng) + 1.0, u(rng)}};
            const auto b = bundle(curvature(s, p));
            const auto o = fd_oracle(s, p);
            auto tol = [](const std::vector<double>& v) { return std::max(1e-5, 1e-4 * max_abs(v)); };
            EXPECT_LE(max_diff(b.R, o.R), tol(b.R)) << src;
            EXPECT_LE(max_diff(b.chi, o.chi), tol(b.chi)) << src;
            EXPECT_LE(max_diff(b.B, o.B), tol(b.B)) << src;
        }
    }
}

TEST(Geometry, OrderBudget) {
    const auto s = source(kEx72);
    const PointTangent p{{0.2, 0.5}, {3.0, 4.0}};
    const auto cj = curvature(s, p, 2);
    EXPECT_EQ(cj.R.order(), 0);
    EXPECT_THROW(h_cov(cj.R, cj.conn), OrderError);
    EXPECT_THROW(v_cov(cj.R), OrderError);
}
