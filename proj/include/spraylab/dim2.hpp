#pragma once

// Two-dimensional metrics: Berwald frame, main scalar, derivatives along the
// indicatrix angle, the flag-curvature ODE and metrics of constant main
// scalar.

#include <array>
#include <cmath>
#include <string>

#include "spraylab/classify.hpp"
#include "spraylab/dsl.hpp"
#include "spraylab/errors.hpp"
#include "spraylab/geometry.hpp"

namespace spraylab {

/// Frame quantities as jets, for repeated angle derivatives.
struct FrameJets {
    Jet F;
    double eps = 1.0;
    Jet det_g;
    std::array<Jet, 2> l_low, m_up, m_low;
    JetMatrix g;
};

inline FrameJets frame_jets(const Jet& L, const PointTangent& p) {
    if (p.dim() != 2) throw DimensionError("the Berwald frame is two-dimensional");
    if (!(L.value() > 0.0)) throw NegativeMetric("the Berwald frame needs L > 0");
    const MetricJets m = metric_tensor(L, p);
    FrameJets f;
    f.g = m.g;
    f.F = sqrt(L.truncated(m.g(0, 0).order()));
    f.det_g = m.g(0, 0) * m.g(1, 1) - m.g(0, 1) * m.g(1, 0);
    f.eps = f.det_g.value() > 0.0 ? 1.0 : -1.0;
    const Jet root = sqrt(f.det_g * f.eps);
    for (int i = 0; i < 2; ++i) f.l_low[static_cast<std::size_t>(i)] = m.y_low[static_cast<std::size_t>(i)] / f.F;
    f.m_up[0] = -f.l_low[1] / root;
    f.m_up[1] = f.l_low[0] / root;
    for (int i = 0; i < 2; ++i) f.m_low[static_cast<std::size_t>(i)] = m.g(i, 0) * f.m_up[0] + m.g(i, 1) * f.m_up[1];
    return f;
}

struct BerwaldFrame {
    double F = 0.0;
    double eps = 1.0;
    double det_g = 0.0;
    double I = 0.0;  // main scalar
    std::array<double, 2> l_low{}, l_up{}, m_low{}, m_up{};
    double frame_residual = 0.0;   // max |g_ij - l_i l_j - eps m_i m_j|
    double cartan_residual = 0.0;  // max |F C_ijk - I m_i m_j m_k|
};

/// L needs order >= 3 (the Cartan tensor is C_ijk = L_{.i.j.k}/4).
inline BerwaldFrame frame(const Jet& L, const PointTangent& p) {
    if (L.order() < 3) throw OrderError("the Berwald frame needs L at order >= 3");
    const FrameJets f = frame_jets(L, p);
    BerwaldFrame b;
    b.F = f.F.value();
    b.eps = f.eps;
    b.det_g = f.det_g.value();
    for (std::size_t i = 0; i < 2; ++i) {
        b.l_low[i] = f.l_low[i].value();
        b.l_up[i] = p.y[i] / b.F;
        b.m_low[i] = f.m_low[i].value();
        b.m_up[i] = f.m_up[i].value();
    }
    std::array<std::array<std::array<double, 2>, 2>, 2> C{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) C[i][j][k] = 0.25 * ydot(ydot(ydot(L, 2, i), 2, j), 2, k).value();
    const std::size_t k = std::abs(b.m_low[0]) >= std::abs(b.m_low[1]) ? 0 : 1;
    b.I = b.F * C[k][k][k] / (b.m_low[k] * b.m_low[k] * b.m_low[k]);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double g = f.g(static_cast<int>(i), static_cast<int>(j)).value();
            b.frame_residual = std::max(b.frame_residual, std::abs(g - b.l_low[i] * b.l_low[j] - b.eps * b.m_low[i] * b.m_low[j]));
            for (std::size_t l = 0; l < 2; ++l)
                b.cartan_residual = std::max(b.cartan_residual,
                                             std::abs(b.F * C[i][j][l] - b.I * b.m_low[i] * b.m_low[j] * b.m_low[l]));
        }
    return b;
}

/// S'(theta) = eps F S_{.i} m^i for S of degree 0 in y.
inline Jet angle_derivative(const Jet& S, const FrameJets& f, const PointTangent& p, const Tolerances& tol = {}) {
    double euler = 0.0, scale = std::abs(S.value());
    for (int k = 0; k < 2; ++k) {
        const double t = p.y[static_cast<std::size_t>(k)] * ydot(S, 2, k).value();
        euler += t;
        scale = std::max(scale, std::abs(t));
    }
    if (!tol.is_zero(euler, scale)) throw PreconditionError("angle derivative needs a function of degree 0 in y");
    return (ydot(S, 2, 0) * f.m_up[0] + ydot(S, 2, 1) * f.m_up[1]) * f.F * f.eps;
}

struct FlagOde {
    double lambda = 0.0;  // R / L
    double d1 = 0.0;      // lambda'
    double d2 = 0.0;      // lambda''
    double I = 0.0;
    double eps = 1.0;
    double residual = 0.0;  // |lambda'' + eps I lambda'|
};

/// Flag curvature lambda = R/L of a 2-D metric and its angle derivatives.
inline FlagOde flag_ode(const SpraySource& s, const PointTangent& p, const RunConfig& cfg = {}) {
    if (!s.is_metric() || s.shift() != 0.0) throw PreconditionError("flag_ode_residual needs a metric input");
    if (s.dim() != 2) throw DimensionError("flag_ode_residual is two-dimensional");
    const int K = std::max(cfg.order, kDefaultOrder);
    const CurvatureJets cj = curvature(s, p, K);
    const ScalarDecomposition d = decompose_scalar(cj);
    if (!cfg.tol.is_zero(d.residual, connection_scale(cj.conn)))
        throw PreconditionError("flag curvature needs scalar curvature at the point");
    const Jet L = s.metric_jet(p, K + 2);
    const FrameJets f = frame_jets(L, p);
    const Jet lambda = d.R / L;
    const Jet d1 = angle_derivative(lambda, f, p, cfg.tol);
    const Jet d2 = angle_derivative(d1, f, p, cfg.tol);
    FlagOde o;
    o.lambda = lambda.value();
    o.d1 = d1.value();
    o.d2 = d2.value();
    o.I = frame(L, p).I;
    o.eps = f.eps;
    o.residual = std::abs(o.d2 + o.eps * o.I * o.d1);
    return o;
}

inline double flag_ode_residual(const SpraySource& s, const PointTangent& p, const RunConfig& cfg = {}) {
    return flag_ode(s, p, cfg).residual;
}

/// Metrics of constant main scalar with beta = p(x) y1, gamma = q(x) y2:
///   19: L = beta^{2s} gamma^{2(1-s)}
///   20: L = beta^2 exp(2 gamma / beta)
///   21: L = (beta^2 + gamma^2) exp(2 r atan(beta / gamma))
struct CmsMetric {
    int cls = 19;
    double param = 0.0;  // s for class 19, r for class 21
    ExprPtr p, q;
    ProblemDef metric;

    /// eps I^2 for class 19, I^2 otherwise.
    double main_scalar_invariant() const {
        switch (cls) {
            case 19: return (2 * param - 1) * (2 * param - 1) / (param * (param - 1));
            case 20: return 4.0;
            default: return 4 * param * param / (1 + param * param);
        }
    }

    /// Predicted omega_12 at x.
    double omega12(std::span<const double> x) const {
        const std::vector<double> chart{x[0], x[1], 1.0, 1.0};
        auto jet = [&](const ExprPtr& e) { return lift([&](std::span<const Jet> v) { return evaluate(*e, v); }, chart, 2); };
        const Jet P = jet(p), Q = jet(q);
        const double pv = P.value(), qv = Q.value();
        const Jet P1 = xpartial(P, 0), P2 = xpartial(P, 1), Q1 = xpartial(Q, 0), Q2 = xpartial(Q, 1);
        const double p1 = P1.value(), p2 = P2.value(), q1 = Q1.value(), q2 = Q2.value();
        const double p12 = xpartial(P1, 1).value(), p22 = xpartial(P2, 1).value();
        const double q11 = xpartial(Q1, 0).value(), q12 = xpartial(Q1, 1).value();
        const double pp = pv * pv, qq = qv * qv, den = pp * qq;
        switch (cls) {
            case 19: {
                const double s = param;
                return (1 - 2 * s) / (s * (1 - s)) *
                       ((pp * qv * q12 - pv * qq * p12 + qq * p1 * p2 - pp * q1 * q2) * s - pp * qv * q12 + pp * q1 * q2) / den;
            }
            case 20:
                return -2 * (pp * qv * p22 + pv * qq * p12 - pp * qv * q12 + pp * q1 * q2 - qq * p1 * p2 - pp * p2 * q2) / den;
            default: {
                const double r = param;
                return 2 * r / (1 + r * r) *
                       ((pp * qv * q12 - pv * qq * p12 - pp * q1 * q2 + qq * p1 * p2) * r + pp * qv * p22 + pv * qq * q11 -
                        qq * p1 * q1 - pp * p2 * q2) /
                       den;
            }
        }
    }
};

inline CmsMetric gen_cms_metric(int cls, const std::string& p, const std::string& q, double param = 0.0) {
    if (cls != 19 && cls != 20 && cls != 21) throw ParamError("constant main scalar class must be 19, 20 or 21");
    if (cls == 19 && (param == 0.0 || param == 1.0)) throw ParamError("class 19 needs s not in {0, 1}");
    const std::string b = "((" + p + ")*y1)", c = "((" + q + ")*y2)", k = "(" + format_number(param) + ")";
    std::string L;
    switch (cls) {
        case 19: L = "(" + b + "^2)^" + k + " * (" + c + "^2)^(1 - " + k + ")"; break;
        case 20: L = b + "^2 * exp(2*" + c + "/" + b + ")"; break;
        default: L = "(" + b + "^2 + " + c + "^2) * exp(2*" + k + "*atan(" + b + "/" + c + "))"; break;
    }
    const std::string guard = cls == 20 ? b + "^2" : "(" + b + "*" + c + ")^2";
    CmsMetric m;
    m.cls = cls;
    m.param = param;
    m.metric = parse("dim 2\nmetric L = " + L + "\nguard = " + guard + "\nguard = ((" + p + ")*(" + q + "))^2\n", {},
                     "cms" + std::to_string(cls));
    m.p = parse("dim 2\nmetric P = " + p).exprs.at(0);
    m.q = parse("dim 2\nmetric Q = " + q).exprs.at(0);
    return m;
}

}  // namespace spraylab
