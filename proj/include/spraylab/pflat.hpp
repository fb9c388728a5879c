#pragma once

// Projectively flat Berwald sprays of constant curvature built from quadratic
// data u(x) = x'Ax + <B,x> + C: G^i = P y^i with P = -(1/2) (ln|u|)_{x^k} y^k,
// and the metric L = [4u y'Ay - (2x'Ay + <B,y>)^2] / (4u^2).

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "spraylab/classify.hpp"
#include "spraylab/dsl.hpp"
#include "spraylab/errors.hpp"
#include "spraylab/geometry.hpp"
#include "spraylab/metrize.hpp"
#include "spraylab/sampling.hpp"

namespace spraylab {

struct QuadraticData {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    double C = 0.0;

    int dim() const { return static_cast<int>(A.rows()); }
};

namespace detail {

inline void validate(const QuadraticData& q) {
    const int n = q.dim();
    if (n < 2 || n > 4) throw DimensionError("quadratic data dimension must be 2..4");
    if (q.A.cols() != n || q.B.size() != n) throw DimensionError("A must be n x n and B of length n");
    if ((q.A - q.A.transpose()).cwiseAbs().maxCoeff() > 0.0) throw ParamError("A must be symmetric");
    if (q.A.isZero(0.0) && q.B.isZero(0.0)) throw ParamError("A = 0 and B = 0 give no projective factor");
}

/// A = 0 uses u = (<B,x> + C)^2, i.e. sigma = -ln|<B,x> + C|.
inline QuadraticData effective(const QuadraticData& q) {
    if (!q.A.isZero(0.0)) return q;
    return QuadraticData{q.B * q.B.transpose(), 2.0 * q.C * q.B, q.C * q.C};
}

inline std::string coefficient(double v) { return "(" + format_number(v) + ")"; }

inline std::string join_sum(const std::vector<std::string>& terms) {
    if (terms.empty()) return "0";
    std::string s;
    for (const auto& t : terms) s += (s.empty() ? "" : " + ") + t;
    return "(" + s + ")";
}

/// sum_ij M_ij a_i b_j for variable prefixes a, b.
inline std::string bilinear(const Eigen::MatrixXd& M, char a, char b) {
    std::vector<std::string> t;
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j)
            if (M(i, j) != 0.0)
                t.push_back(coefficient(M(i, j)) + "*" + a + std::to_string(i + 1) + "*" + b + std::to_string(j + 1));
    return join_sum(t);
}

inline std::string linear(const Eigen::VectorXd& v, char a) {
    std::vector<std::string> t;
    for (int i = 0; i < v.size(); ++i)
        if (v(i) != 0.0) t.push_back(coefficient(v(i)) + "*" + a + std::to_string(i + 1));
    return join_sum(t);
}

inline std::string u_text(const QuadraticData& q) {
    return "(" + bilinear(q.A, 'x', 'x') + " + " + linear(q.B, 'x') + " + " + coefficient(q.C) + ")";
}

/// 2x'Ay + <B,y> = u_{x^k} y^k.
inline std::string du_text(const QuadraticData& q) {
    return "(" + bilinear(2.0 * q.A, 'x', 'y') + " + " + linear(q.B, 'y') + ")";
}

/// Sign making the guard positive on the intended branch: sign(C), else
/// sign(tr A), else +1.
inline double branch_sign(const QuadraticData& q) {
    if (q.C != 0.0) return q.C > 0.0 ? 1.0 : -1.0;
    const double tr = q.A.trace();
    if (tr != 0.0) return tr > 0.0 ? 1.0 : -1.0;
    return 1.0;
}

inline std::string header(const QuadraticData& q, const std::string& name) {
    return "dim " + std::to_string(q.dim()) + "\n# " + name + "\n";
}

inline std::string guard_text(const QuadraticData& q) {
    return "guard = " + coefficient(branch_sign(q)) + "*" + u_text(q) + "\n";
}

}  // namespace detail

inline std::string gen_spray_source(const QuadraticData& q0) {
    detail::validate(q0);
    const QuadraticData q = detail::effective(q0);
    const std::string P = "(-(" + detail::du_text(q) + ")/(2*" + detail::u_text(q) + "))";
    std::string s = detail::header(q, "projectively flat spray from quadratic data");
    for (int i = 1; i <= q.dim(); ++i) s += "spray G" + std::to_string(i) + " = " + P + "*y" + std::to_string(i) + "\n";
    return s + detail::guard_text(q);
}

inline std::string gen_metric_source(const QuadraticData& q0) {
    detail::validate(q0);
    const QuadraticData q = detail::effective(q0);
    const std::string u = detail::u_text(q);
    std::string s = detail::header(q, "metric from quadratic data");
    s += "metric L = (4*" + u + "*" + detail::bilinear(q.A, 'y', 'y') + " - " + detail::du_text(q) + "^2)/(4*" + u + "^2)\n";
    return s + detail::guard_text(q);
}

inline ProblemDef gen_spray(const QuadraticData& q) { return parse(gen_spray_source(q), {}, "pflat_spray"); }
inline ProblemDef gen_metric(const QuadraticData& q) { return parse(gen_metric_source(q), {}, "pflat_metric"); }

struct Admissibility {
    bool value = false;
    bool empirical = false;  // det A = 0: decided by finsler_check on samples
    double margin = 0.0;     // |4C - B'A^{-1}B|, or the worst rank ratio when empirical
};

inline Admissibility admissible(const QuadraticData& q0, const RunConfig& cfg = {}) {
    detail::validate(q0);
    const QuadraticData q = detail::effective(q0);
    Admissibility a;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(q.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    if (sv(q.dim() - 1) >= kRankTol * sv(0)) {
        const double bab = q.B.dot(svd.solve(q.B));
        a.margin = std::abs(4.0 * q.C - bab);
        a.value = !cfg.tol.is_zero(a.margin, std::max(std::abs(4.0 * q.C), std::abs(bab)));
        return a;
    }
    a.empirical = true;
    const SpraySource metric(gen_metric(q0));
    const auto samples = sample_groups(metric, cfg, base_point_count(cfg.points, q.dim()), [&](const PointTangent& p) {
        return finsler_evidence(metric.metric_jet(p, 2), p, cfg.tol);
    });
    FinslerCheck fc;
    for (const auto& g : samples.groups)
        for (const auto& e : g.results) fold(fc, e);
    a.value = fc.ok;
    a.margin = fc.worst_rank_ratio;
    return a;
}

/// Consistency of gen_spray / gen_metric: spray_from_metric(L) = G and Ric = (n-1)L.
struct FamilyCheck {
    double spray_residual = 0.0;
    double ric_residual = 0.0;
    double scale = 0.0;
    int points = 0;
};

inline FamilyCheck family_check(const QuadraticData& q, const RunConfig& cfg) {
    const SpraySource spray(gen_spray(q));
    const SpraySource metric(gen_metric(q));
    const int n = q.dim();
    struct Point {
        double spray, ric, scale;
    };
    const auto samples = sample_groups(spray, cfg, base_point_count(cfg.points, n), [&](const PointTangent& p) {
        const auto G = spray.spray_jets(p, 0);
        const auto GL = metric.spray_jets(p, 0);
        const double L = metric.metric_jet(p, 0).value();
        const double Ric = curvature(spray, p, 2).Ric.value();
        Point r{0.0, std::abs(Ric - (n - 1) * L), std::abs(Ric)};
        for (int i = 0; i < n; ++i) {
            r.spray = std::max(r.spray, std::abs(G[static_cast<std::size_t>(i)].value() - GL[static_cast<std::size_t>(i)].value()));
            r.scale = std::max(r.scale, std::abs(G[static_cast<std::size_t>(i)].value()));
        }
        return r;
    });
    FamilyCheck f;
    for (const auto& g : samples.groups)
        for (const auto& r : g.results) {
            ++f.points;
            f.spray_residual = std::max(f.spray_residual, r.spray);
            f.ric_residual = std::max(f.ric_residual, r.ric);
            f.scale = std::max(f.scale, r.scale);
        }
    return f;
}

/// Projective factor P = G^i y^i / |y|^2 of a spray in projective form.
inline Jet projective_factor(const Connection& c) {
    const int n = c.n;
    Jet num = c.G[0] * c.y[0];
    Jet den = c.y[0] * c.y[0];
    for (int i = 1; i < n; ++i) {
        num += c.G[static_cast<std::size_t>(i)] * c.y[static_cast<std::size_t>(i)];
        den += c.y[static_cast<std::size_t>(i)] * c.y[static_cast<std::size_t>(i)];
    }
    return num / den;
}

struct QuadraticCheck {
    bool ok = false;
    double residual = 0.0;         // max |u_{ijk}| with u = exp(-2 sigma), u(x) = 1
    double scale = 0.0;
    double closed_residual = 0.0;  // max |d_j sigma_i - d_i sigma_j|
    int points = 0;
};

/// Whether exp(-2 sigma), with sigma_i = P_{.i}, is quadratic in x. sigma is
/// rebuilt locally from the x-jet of sigma_i and normalised to sigma(x) = 0.
inline QuadraticCheck quadratic_structure_check(const SpraySource& s, const RunConfig& cfg) {
    const int n = s.dim();
    struct Point {
        double third, scale, curl;
    };
    const auto samples = sample_groups(s, cfg, base_point_count(cfg.points, n), [&](const PointTangent& p) {
        const Connection c = berwald(s.spray_jets(p, cfg.order), p);
        const Jet P = projective_factor(c);
        std::vector<Jet> sigma;
        for (int i = 0; i < n; ++i) sigma.push_back(ydot(P, n, i));
        Point r{0.0, 1.0, 0.0};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                r.curl = std::max(r.curl, std::abs(xpartial(sigma[static_cast<std::size_t>(i)], j).value() -
                                                   xpartial(sigma[static_cast<std::size_t>(j)], i).value()));
        const Jet u = exp(detail::phi_jet(0.0, sigma, n) * -2.0);
        for (int i = 0; i < n; ++i) {
            const Jet ui = xpartial(u, i);
            r.scale = std::max(r.scale, std::abs(ui.value()));
            for (int j = 0; j < n; ++j) {
                const Jet uij = xpartial(ui, j);
                r.scale = std::max(r.scale, std::abs(uij.value()));
                for (int k = 0; k < n; ++k) r.third = std::max(r.third, std::abs(xpartial(uij, k).value()));
            }
        }
        return r;
    });
    QuadraticCheck q;
    for (const auto& g : samples.groups)
        for (const auto& r : g.results) {
            ++q.points;
            q.residual = std::max(q.residual, r.third);
            q.scale = std::max(q.scale, r.scale);
            q.closed_residual = std::max(q.closed_residual, r.curl);
        }
    if (!cfg.tol.is_zero(q.closed_residual, q.scale))
        throw PreconditionError("projective factor is not a closed 1-form in y (max curl " + std::to_string(q.closed_residual) + ")");
    q.ok = cfg.tol.is_zero(q.residual, q.scale);
    return q;
}

/// P_{;k} + P P_{.k} at p; vanishes iff the projective spray G = P y is R-flat.
inline double rflat_projective_residual(const SpraySource& s, const PointTangent& p, int order = kDefaultOrder) {
    const int n = s.dim();
    const Connection c = berwald(s.spray_jets(p, order), p);
    const Jet P = projective_factor(c);
    const TensorField dP = h_cov(scalar_field(n, P), c);
    double r = 0.0;
    for (int k = 0; k < n; ++k)
        r = std::max(r, std::abs(dP.c[static_cast<std::size_t>(k)].value() + P.value() * ydot(P, n, k).value()));
    return r;
}

}  // namespace spraylab
