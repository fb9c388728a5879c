#pragma once

// Structural classification of a spray over a seeded sample set: scalar
// curvature R^i_k = R delta^i_k - tau_k y^i, isotropy, constancy, Berwald,
// projective form and weak isotropy. A property holds for the spray iff it
// holds at every accepted sample.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spraylab/errors.hpp"
#include "spraylab/geometry.hpp"
#include "spraylab/sampling.hpp"

namespace spraylab {

struct Flag {
    bool value = true;
    double residual = 0.0;
};

inline void fold(Flag& into, const Flag& f) {
    into.value = into.value && f.value;
    into.residual = std::max(into.residual, f.residual);
}

inline Flag make_flag(double residual, double scale, const Tolerances& tol) {
    return Flag{tol.is_zero(residual, scale), std::abs(residual)};
}

/// Residual normalised for identity tables.
inline double normalized(double residual, double scale) { return std::abs(residual) / std::max(1.0, std::abs(scale)); }

struct ScalarDecomposition {
    Jet R;
    std::vector<Jet> tau;
    int row = 0;
    double residual = 0.0;  // max |R^i_k - R delta^i_k + tau_k y^i|
};

inline ScalarDecomposition decompose_scalar(const CurvatureJets& cj) {
    const auto& c = cj.conn;
    const int n = c.n;
    ScalarDecomposition d;
    d.R = cj.Ric * (1.0 / (n - 1));
    for (int i = 1; i < n; ++i)
        if (std::abs(c.p.y[static_cast<std::size_t>(i)]) > std::abs(c.p.y[static_cast<std::size_t>(d.row)])) d.row = i;
    const Jet& ys = c.y[static_cast<std::size_t>(d.row)];
    for (int k = 0; k < n; ++k) {
        Jet t = -cj.R.at({d.row, k});
        if (k == d.row) t += d.R;
        d.tau.push_back(t / ys);
    }
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            double r = cj.R.at({i, k}).value() + d.tau[static_cast<std::size_t>(k)].value() * c.p.y[static_cast<std::size_t>(i)];
            if (i == k) r -= d.R.value();
            d.residual = std::max(d.residual, std::abs(r));
        }
    return d;
}

/// Evidence that a scalar S is a (possibly singular) Finsler metric at p:
/// 2-homogeneous in y with a non-degenerate y-Hessian.
struct FinslerEvidence {
    bool ok = false;
    double euler_residual = 0.0;
    double rank_ratio = 0.0;  // smallest / largest singular value of S_{.i.j}/2
    double value = 0.0;
};

inline FinslerEvidence finsler_evidence(const Jet& S, const PointTangent& p, const Tolerances& tol) {
    const int n = p.dim();
    if (S.order() < 2) throw OrderError("finsler check needs a jet of order >= 2");
    FinslerEvidence e;
    e.value = S.value();
    double euler = -2.0 * S.value();
    double scale = std::abs(S.value());
    for (int k = 0; k < n; ++k) {
        const double t = p.y[static_cast<std::size_t>(k)] * ydot(S, n, k).value();
        euler += t;
        scale = std::max(scale, std::abs(t));
    }
    e.euler_residual = std::abs(euler);
    Eigen::MatrixXd h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h(i, j) = 0.5 * ydot(ydot(S, n, i), n, j).value();
    if (!h.allFinite()) return e;
    const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(h).singularValues();
    e.rank_ratio = sv(0) > 0.0 ? sv(n - 1) / sv(0) : 0.0;
    e.ok = tol.is_zero(e.euler_residual, scale) && e.rank_ratio >= kRankTol;
    return e;
}

struct PointAnalysis {
    CurvatureBundle bundle;
    double R = 0.0;
    std::vector<double> tau;
    double scalar_residual = 0.0;
    Flag scalar, isotropic, constant, berwald, projective_form;
    double ric_parallel_residual = 0.0;  // max |Ric_{;i}|
    std::vector<double> rdot_minus_2tau;  // R_{.i} - 2 tau_i
    double rdot_scale = 0.0;
    double projective_P = 0.0;            // G^i y_i / |y|^2 (Euclidean pairing)
    std::map<std::string, double> identities;  // normalised residuals

    // metrization evidence, filled when scalar
    bool R_zero = false;
    double R_tolerance_scale = 0.0;
    FinslerEvidence R_finsler;
    std::vector<double> omega;  // R_{;i}/R when R != 0
    double omega_closed_residual = 0.0;
    double omega_scale = 0.0;
    double ratio_horizontal = 0.0;  // max |(tau_i/R)_{;j}|
    double ratio_vertical = 0.0;    // max |(tau_i/R)_{.j} - (tau_j/R)_{.i}|
    double ratio_scale = 0.0;
    double tau_max = 0.0;
    double tau_scale = 0.0;
};

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
}

inline PointAnalysis analyze_point(const SpraySource& s, const PointTangent& p, const RunConfig& cfg) {
    if (cfg.order < kDefaultOrder) throw ParamError("classification needs jet order >= 4");
    const Tolerances& tol = cfg.tol;
    const CurvatureJets cj = curvature(s, p, cfg.order);
    const auto& c = cj.conn;
    const int n = c.n;
    const double ynorm = norm2(p.y);

    PointAnalysis a;
    a.bundle = bundle(cj);
    const auto& b = a.bundle;
    if (!std::isfinite(b.curvature_scale) || !std::isfinite(b.Ric)) throw DomainError("non-finite curvature");
    a.identities["Rik_y"] = normalized(b.ry_residual, b.curvature_scale * ynorm);
    a.identities["bianchi"] = normalized(b.bianchi_residual, b.bianchi_scale);

    a.berwald = make_flag(max_abs(b.B), max_abs(b.Gamma) / ynorm, tol);
    {
        double r = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                r = std::max(r, std::abs(b.G[static_cast<std::size_t>(i)] * p.y[static_cast<std::size_t>(j)] -
                                         b.G[static_cast<std::size_t>(j)] * p.y[static_cast<std::size_t>(i)]));
        a.projective_form = make_flag(r, max_abs(b.G) * ynorm, tol);
    }
    // P = G^i y^i / |y|^2 as a jet
    Jet P = c.G[0] * c.y[0];
    for (int i = 1; i < n; ++i) P += c.G[static_cast<std::size_t>(i)] * c.y[static_cast<std::size_t>(i)];
    Jet y2 = c.y[0] * c.y[0];
    for (int i = 1; i < n; ++i) y2 += c.y[static_cast<std::size_t>(i)] * c.y[static_cast<std::size_t>(i)];
    P = P / y2;
    a.projective_P = P.value();

    const ScalarDecomposition d = decompose_scalar(cj);
    a.R = d.R.value();
    a.tau = values(d.tau);
    a.scalar_residual = d.residual;
    a.scalar = make_flag(d.residual, b.curvature_scale, tol);
    const double deriv_scale = b.curvature_scale / ynorm;
    a.tau_max = max_abs(a.tau);
    a.tau_scale = deriv_scale;
    if (!a.scalar.value) {
        a.isotropic = a.constant = Flag{false, std::numeric_limits<double>::infinity()};
        return a;
    }

    // isotropy, chi consistency
    std::vector<Jet> rdot;
    for (int i = 0; i < n; ++i) rdot.push_back(ydot(d.R, n, i));
    double iso = 0.0, chi_gap = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rdot[static_cast<std::size_t>(i)].value() - 2.0 * a.tau[static_cast<std::size_t>(i)];
        a.rdot_minus_2tau.push_back(v);
        iso = std::max(iso, std::abs(v));
        chi_gap = std::max(chi_gap, std::abs(b.chi[static_cast<std::size_t>(i)] - (n + 1) * v));
    }
    a.rdot_scale = std::max({max_abs(values(rdot)), 2.0 * a.tau_max, deriv_scale});
    a.isotropic = make_flag(std::max(iso, max_abs(b.chi) / (n + 1)), a.rdot_scale, tol);
    a.identities["chi_consistency"] = normalized(chi_gap, (n + 1) * a.rdot_scale);

    double t0 = -a.R;
    for (int k = 0; k < n; ++k) t0 += a.tau[static_cast<std::size_t>(k)] * p.y[static_cast<std::size_t>(k)];
    a.identities["tau0_minus_R"] = normalized(t0, b.curvature_scale);

    // homogeneity: R of degree 2, tau of degree 1
    {
        double eR = -2.0 * a.R, eT = 0.0;
        for (int k = 0; k < n; ++k) eR += p.y[static_cast<std::size_t>(k)] * rdot[static_cast<std::size_t>(k)].value();
        for (int i = 0; i < n; ++i) {
            double e = -a.tau[static_cast<std::size_t>(i)];
            for (int k = 0; k < n; ++k)
                e += p.y[static_cast<std::size_t>(k)] * ydot(d.tau[static_cast<std::size_t>(i)], n, k).value();
            eT = std::max(eT, std::abs(e));
        }
        a.identities["euler_R"] = normalized(eR, b.curvature_scale);
        a.identities["euler_tau"] = normalized(eT, b.curvature_scale);
    }

    // H-tensor identities
    {
        const TensorField tau_f{n, 0, 1, d.tau};
        const TensorField tdot = v_cov(tau_f);  // tau_{i.j}
        double anti = 0.0, trace_gap = 0.0, hscale = std::max(max_abs(b.Hij), max_abs(b.Hi));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double lhs = b.Hij[static_cast<std::size_t>(i * n + j)] - b.Hij[static_cast<std::size_t>(j * n + i)];
                const double rhs = (n + 1) / 3.0 * (tdot.at({j, i}).value() - tdot.at({i, j}).value());
                anti = std::max(anti, std::abs(lhs - rhs));
                hscale = std::max(hscale, std::abs(tdot.at({i, j}).value()) * (n + 1));
            }
            const double hi = (n + 1) / 3.0 * (rdot[static_cast<std::size_t>(i)].value() + a.tau[static_cast<std::size_t>(i)]);
            trace_gap = std::max(trace_gap, std::abs(b.Hi[static_cast<std::size_t>(i)] - hi));
        }
        a.identities["h_antisymmetry"] = normalized(anti, hscale);
        a.identities["h_trace"] = normalized(trace_gap, std::max(hscale, a.rdot_scale * (n + 1)));
    }

    // constancy: tau_{i;k} = 0, with Ric_{;i} reported alongside
    double tscale = 0.0;
    const TensorField tau_h = h_cov(TensorField{n, 0, 1, d.tau}, c, &tscale);
    a.constant = make_flag(tau_h.max_abs(), tscale, tol);
    a.constant.value = a.constant.value && a.scalar.value;
    double rscale = 0.0;
    const TensorField R_h = h_cov(scalar_field(n, d.R), c, &rscale);  // R_{;i}
    a.ric_parallel_residual = (n - 1) * R_h.max_abs();

    // R_{.i;0} - 3 R_{;i} + tau_{i;0} (n >= 3)
    if (n >= 3) {
        double s5 = rscale;
        const TensorField rdot_h = contract_y(h_cov(TensorField{n, 0, 1, rdot}, c, &s5), c);
        const TensorField tau_h0 = contract_y(tau_h, c);
        double r5 = 0.0;
        for (int i = 0; i < n; ++i)
            r5 = std::max(r5, std::abs(rdot_h.c[static_cast<std::size_t>(i)].value() - 3.0 * R_h.c[static_cast<std::size_t>(i)].value() +
                                       tau_h0.c[static_cast<std::size_t>(i)].value()));
        a.identities["scalar_bianchi"] = normalized(r5, std::max(s5, tscale) * ynorm);
    }

    // projective sprays: R_{.i} - 2 tau_i = 3 (P_{;i} - P_{i;0})
    if (a.projective_form.value) {
        double ps = 0.0;
        const TensorField P_h = h_cov(scalar_field(n, P), c, &ps);
        std::vector<Jet> Pi;
        for (int i = 0; i < n; ++i) Pi.push_back(ydot(P, n, i));
        const TensorField Pi_h0 = contract_y(h_cov(TensorField{n, 0, 1, Pi}, c, &ps), c);
        double r = 0.0;
        for (int i = 0; i < n; ++i)
            r = std::max(r, std::abs(a.rdot_minus_2tau[static_cast<std::size_t>(i)] -
                                     3.0 * (P_h.c[static_cast<std::size_t>(i)].value() - Pi_h0.c[static_cast<std::size_t>(i)].value())));
        a.identities["projective_factor"] = normalized(r, std::max(a.rdot_scale, 3.0 * ps * ynorm));
    }

    // metric inputs: L_{;i} = 0, and R L_{.k} = 2 L tau_k under scalar flag curvature
    if (s.is_metric() && s.shift() == 0.0) {
        const Jet L = s.metric_jet(p, cfg.order);
        double ls = 0.0;
        const TensorField L_h = h_cov(scalar_field(n, L), c, &ls);
        a.identities["L_parallel"] = normalized(L_h.max_abs(), ls);
        double r = 0.0, sc = 0.0;
        for (int k = 0; k < n; ++k) {
            const double lhs = a.R * ydot(L, n, k).value();
            const double rhs = 2.0 * L.value() * a.tau[static_cast<std::size_t>(k)];
            r = std::max(r, std::abs(lhs - rhs));
            sc = std::max({sc, std::abs(lhs), std::abs(rhs)});
        }
        a.identities["flag_curvature_tau"] = normalized(r, sc);
    }

    // metrization evidence
    a.R_tolerance_scale = b.curvature_scale;
    a.R_zero = tol.is_zero(a.R, b.curvature_scale);
    a.R_finsler = finsler_evidence(d.R, p, tol);
    if (!a.R_zero) {
        std::vector<Jet> omega;
        for (int i = 0; i < n; ++i) omega.push_back(R_h.c[static_cast<std::size_t>(i)] / d.R);
        a.omega = values(omega);
        a.omega_scale = rscale / std::abs(a.R);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double curl = xpartial(omega[static_cast<std::size_t>(i)], j).value() -
                                    xpartial(omega[static_cast<std::size_t>(j)], i).value();
                a.omega_closed_residual = std::max(a.omega_closed_residual, std::abs(curl));
                a.omega_scale = std::max(a.omega_scale, std::abs(xpartial(omega[static_cast<std::size_t>(i)], j).value()));
            }
        // (tau_i / R)_{;j} and the vertical antisymmetry
        std::vector<Jet> q;
        for (int i = 0; i < n; ++i) q.push_back(d.tau[static_cast<std::size_t>(i)] / d.R);
        double qs = 0.0;
        const TensorField q_h = h_cov(TensorField{n, 0, 1, q}, c, &qs);
        const TensorField q_v = v_cov(TensorField{n, 0, 1, q});
        a.ratio_horizontal = q_h.max_abs();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                a.ratio_vertical = std::max(a.ratio_vertical, std::abs(q_v.at({i, j}).value() - q_v.at({j, i}).value()));
                qs = std::max(qs, std::abs(q_v.at({i, j}).value()));
            }
        // quotient-rule terms tau_{i;j}/R and tau_i R_{;j}/R^2 (and their vertical analogues) cancel near R = 0
        const double Rv = std::abs(a.R);
        const TensorField tau_v = v_cov(TensorField{n, 0, 1, d.tau});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double ti = std::abs(a.tau[static_cast<std::size_t>(i)]);
                qs = std::max({qs, (std::abs(tau_h.at({i, j}).value()) + tscale) / Rv,
                               ti * (std::abs(R_h.c[static_cast<std::size_t>(j)].value()) + rscale) / (Rv * Rv),
                               std::abs(tau_v.at({i, j}).value()) / Rv,
                               ti * std::abs(ydot(d.R, n, j).value()) / (Rv * Rv)});
            }
        a.ratio_scale = qs;
    }
    return a;
}

/// Least-squares fit of omega_{ir} y^r = R_{.i} - 2 tau_i over the tangent
/// samples of one base point.
struct OmegaFit {
    std::vector<double> x;
    Eigen::MatrixXd omega;
    double fit_residual = 0.0;
    double antisymmetry_residual = 0.0;
    double scale = 0.0;
    bool ok = false;
};

inline OmegaFit fit_weak_isotropy(std::span<const PointTangent> pts, std::span<const std::vector<double>> rhs,
                                  const Tolerances& tol) {
    const int n = pts.front().dim();
    const int m = static_cast<int>(pts.size());
    Eigen::MatrixXd Y(m, n), V(m, n);
    double vscale = 0.0;
    for (int r = 0; r < m; ++r)
        for (int i = 0; i < n; ++i) {
            Y(r, i) = pts[static_cast<std::size_t>(r)].y[static_cast<std::size_t>(i)];
            V(r, i) = rhs[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
            vscale = std::max(vscale, std::abs(V(r, i)));
        }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto sv = svd.singularValues();
    if (m < n || sv(0) == 0.0 || sv(n - 1) < kRankTol * sv(0))
        throw RankError("tangent samples do not span the fibre");
    const Eigen::MatrixXd W = svd.solve(V);  // W(r, i) = omega_{i r}
    OmegaFit f;
    f.x = pts.front().x;
    f.omega = W.transpose();
    f.fit_residual = (Y * W - V).cwiseAbs().maxCoeff();
    f.antisymmetry_residual = (f.omega + f.omega.transpose()).cwiseAbs().maxCoeff();
    double yscale = 0.0;
    for (const auto& p : pts) yscale = std::max(yscale, norm2(p.y));
    f.scale = std::max(vscale, f.omega.cwiseAbs().maxCoeff() * yscale);
    f.ok = tol.is_zero(f.fit_residual, vscale) && tol.is_zero(f.antisymmetry_residual * yscale, f.scale);
    return f;
}

struct ClassificationReport {
    std::string name;
    int dim = 0;
    std::uint64_t seed = 0;
    int count = 0;
    int rejected = 0;
    std::vector<SampleGroup<PointAnalysis>> groups;
    Flag scalar, isotropic, constant, berwald, projective_form, weak_isotropic;
    double ric_parallel_residual = 0.0;
    std::vector<OmegaFit> omega;
    std::map<std::string, double> identities;
    std::vector<std::string> notes;

    template <class F>
    void for_each_point(F&& f) const {
        for (const auto& g : groups)
            for (std::size_t k = 0; k < g.points.size(); ++k) f(g.points[k], g.results[k]);
    }
};

inline ClassificationReport classify(const SpraySource& s, const RunConfig& cfg) {
    if (cfg.points < 1) throw ParamError("points must be >= 1");
    const int n = s.dim();
    ClassificationReport rep;
    rep.name = s.def().name;
    rep.dim = n;
    rep.seed = cfg.seed;
    auto samples = sample_groups(s, cfg, base_point_count(cfg.points, n),
                                 [&](const PointTangent& p) { return analyze_point(s, p, cfg); });
    rep.groups = std::move(samples.groups);
    rep.rejected = samples.rejected;

    rep.for_each_point([&](const PointTangent&, const PointAnalysis& a) {
        ++rep.count;
        fold(rep.scalar, a.scalar);
        fold(rep.isotropic, a.isotropic);
        fold(rep.constant, a.constant);
        fold(rep.berwald, a.berwald);
        fold(rep.projective_form, a.projective_form);
        rep.ric_parallel_residual = std::max(rep.ric_parallel_residual, a.ric_parallel_residual);
        for (const auto& [k, v] : a.identities) rep.identities[k] = std::max(rep.identities[k], v);
    });

    // the projective-factor identity needs G = P y on a neighbourhood, not at an isolated point
    if (!rep.projective_form.value) rep.identities.erase("projective_factor");

    if (!rep.scalar.value) {
        rep.weak_isotropic = Flag{false, std::numeric_limits<double>::infinity()};
        rep.notes.push_back("not of scalar curvature at some sample; isotropy tests do not apply");
    } else {
        for (const auto& g : rep.groups) {
            std::vector<std::vector<double>> rhs;
            for (const auto& a : g.results) rhs.push_back(a.rdot_minus_2tau);
            OmegaFit f = fit_weak_isotropy(g.points, rhs, cfg.tol);
            fold(rep.weak_isotropic, Flag{f.ok, std::max(f.fit_residual, f.antisymmetry_residual)});
            rep.omega.push_back(std::move(f));
        }
    }
    rep.notes.push_back("projective_form is tested in the given chart only");
    return rep;
}

}  // namespace spraylab
