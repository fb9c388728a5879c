#pragma once

// Metrizability decisions for sprays of scalar curvature, with metric
// recovery where a construction exists.
//
// Rule identifiers reported in Verdict::rule:
//   R_vanishes, R_not_finsler, omega_y_dependent, omega_not_closed, omega_zero,
//   omega_nonzero_dim2, omega_nonzero_dim_ge3, ric_vanishes, ric_finsler,
//   ric_not_finsler, R_zero_tau_nonzero, tau_over_R_condition,
//   no_sufficient_condition, not_scalar, recovery_failed.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spraylab/classify.hpp"
#include "spraylab/errors.hpp"
#include "spraylab/geometry.hpp"
#include "spraylab/sampling.hpp"

namespace spraylab {

enum class Outcome { MetrizableLocally, MetrizableWithMetric, NotMetrizable, Inconclusive };

inline std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::MetrizableLocally: return "metrizable_locally";
        case Outcome::MetrizableWithMetric: return "metrizable_with_metric";
        case Outcome::NotMetrizable: return "not_metrizable";
        case Outcome::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

inline bool is_metrizable(Outcome o) { return o == Outcome::MetrizableLocally || o == Outcome::MetrizableWithMetric; }

struct MetricSample {
    PointTangent p;
    double L = 0.0;
};

struct RecoveredMetric {
    std::string form;  // "Ric/(n-1)", "R" or "R/lambda"
    std::vector<double> x0;
    std::vector<MetricSample> samples;
    bool finsler = false;
    double parallel_residual = 0.0;      // max |L_{;i}|
    double reproduction_residual = 0.0;  // max |G_L - G|
    std::function<double(const PointTangent&)> evaluate;
};

struct Verdict {
    Outcome outcome = Outcome::Inconclusive;
    std::string rule;
    double residual = 0.0;
    std::string evidence;
    std::optional<RecoveredMetric> recovered_metric;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> omega_report;  // (x, omega(x))
    std::vector<std::string> notes;
};

struct FinslerCheck {
    bool ok = true;
    int failures = 0;
    double worst_euler = 0.0;
    double worst_rank_ratio = 1.0;
};

inline void fold(FinslerCheck& c, const FinslerEvidence& e) {
    c.ok = c.ok && e.ok;
    if (!e.ok) ++c.failures;
    c.worst_euler = std::max(c.worst_euler, e.euler_residual);
    c.worst_rank_ratio = std::min(c.worst_rank_ratio, e.rank_ratio);
}

/// finsler_check over jets of S (order >= 2) at sample points.
inline FinslerCheck finsler_check(std::span<const std::pair<PointTangent, Jet>> samples, const Tolerances& tol) {
    FinslerCheck c;
    for (const auto& [p, S] : samples) fold(c, finsler_evidence(S, p, tol));
    return c;
}

/// finsler_check of an expression in the chart variables.
inline FinslerCheck finsler_check(const ExprNode& S, std::span<const PointTangent> points, const Tolerances& tol) {
    FinslerCheck c;
    for (const auto& p : points) {
        const auto chart = p.chart();
        const Jet j = lift([&](std::span<const Jet> v) { return evaluate(S, v); }, chart, 2);
        fold(c, finsler_evidence(j, p, tol));
    }
    return c;
}

namespace detail {

inline constexpr int kQuadraturePanels = 16;
inline constexpr std::array<double, 4> kGaussNodes{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                                  0.8611363115940526};
inline constexpr std::array<double, 4> kGaussWeights{0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                                    0.3478548451374538};

}  // namespace detail

using OmegaField = std::function<std::vector<double>(std::span<const double> x)>;

/// lambda(x) = exp of the line integral of omega along the segment x0 -> x
/// (16 panels of 4-point Gauss-Legendre). lambda(x0) = 1.
inline double recover_lambda(const OmegaField& omega, std::span<const double> x0, std::span<const double> x) {
    const std::size_t n = x0.size();
    std::vector<double> dx(n), q(n);
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] - x0[i];
    double phi = 0.0;
    const double h = 1.0 / detail::kQuadraturePanels;
    for (int panel = 0; panel < detail::kQuadraturePanels; ++panel) {
        const double mid = (panel + 0.5) * h;
        for (std::size_t g = 0; g < detail::kGaussNodes.size(); ++g) {
            const double t = mid + 0.5 * h * detail::kGaussNodes[g];
            for (std::size_t i = 0; i < n; ++i) q[i] = x0[i] + t * dx[i];
            const auto w = omega(q);
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += w[i] * dx[i];
            phi += 0.5 * h * detail::kGaussWeights[g] * dot;
        }
    }
    return std::exp(phi);
}

/// omega_i = R_{;i}/R at (x, y_ref); PathError outside the guards or where R = 0.
inline OmegaField omega_field(const SpraySource& s, std::vector<double> y_ref, const Tolerances& tol) {
    return [&s, y_ref = std::move(y_ref), tol](std::span<const double> x) {
        const PointTangent p{{x.begin(), x.end()}, y_ref};
        if (!guards_pass(s, p)) throw PathError("integration path leaves the guarded domain");
        try {
            const CurvatureJets cj = curvature(s, p, 3);
            const int n = s.dim();
            const Jet R = cj.Ric * (1.0 / (n - 1));
            if (tol.is_zero(R.value(), connection_scale(cj.conn))) throw PathError("R vanishes on the integration path");
            const TensorField dR = h_cov(scalar_field(n, R), cj.conn);
            std::vector<double> w;
            for (int i = 0; i < n; ++i) w.push_back(dR.c[static_cast<std::size_t>(i)].value() / R.value());
            return w;
        } catch (const DomainError& e) {
            throw PathError(std::string("integration path hits a singular point: ") + e.what());
        }
    };
}

namespace detail {

/// Jet of Phi = ln(lambda) in x from the x-jet of omega = dPhi; y-coefficients
/// of omega are dropped.
inline Jet phi_jet(double phi0, std::span<const Jet> omega, int n) {
    const auto& space = omega.front().space();
    const int order = omega.front().order() + 1;
    const auto out_space = JetSpace::get(2 * n, order);
    std::vector<double> coeffs(out_space->size(), 0.0);
    coeffs[0] = phi0;
    for (std::size_t pos = 1; pos < out_space->size(); ++pos) {
        const MultiIndex& beta = out_space->index(pos);
        bool pure_x = true;
        for (int v = n; v < 2 * n; ++v) pure_x = pure_x && beta[static_cast<std::size_t>(v)] == 0;
        if (!pure_x) continue;
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            if (beta[static_cast<std::size_t>(i)] == 0) continue;
            MultiIndex g = beta;
            --g[static_cast<std::size_t>(i)];
            s += omega[static_cast<std::size_t>(i)].coefficients()[space->position(g)];
        }
        coeffs[pos] = s / total_order(beta);
    }
    return Jet::from_coefficients(out_space, std::move(coeffs));
}

struct RecoveryCheck {
    FinslerEvidence finsler;
    double L = 0.0;
    double parallel = 0.0;
    double parallel_scale = 0.0;
    double reproduction = 0.0;
    double reproduction_scale = 0.0;
};

/// L = R / lambda at p (lambda given by its value there; omega supplies its
/// x-derivatives), then L_{;i} and spray reproduction.
inline RecoveryCheck check_recovered(const SpraySource& s, const PointTangent& p, const RunConfig& cfg,
                                     std::optional<double> lambda) {
    const int n = s.dim();
    const CurvatureJets cj = curvature(s, p, cfg.order);
    const Jet R = cj.Ric * (1.0 / (n - 1));
    Jet L = R;
    if (lambda) {
        const TensorField dR = h_cov(scalar_field(n, R), cj.conn);
        std::vector<Jet> omega;
        for (int i = 0; i < n; ++i) omega.push_back(dR.c[static_cast<std::size_t>(i)] / R);
        L = R / exp(phi_jet(std::log(*lambda), omega, n));
    }
    RecoveryCheck r;
    r.L = L.value();
    r.finsler = finsler_evidence(L, p, cfg.tol);
    const TensorField dL = h_cov(scalar_field(n, L), cj.conn, &r.parallel_scale);
    r.parallel = dL.max_abs();
    try {
        const auto G = spray_from_metric(L, p);
        for (int i = 0; i < n; ++i) {
            r.reproduction = std::max(r.reproduction, std::abs(G[static_cast<std::size_t>(i)].value() - cj.conn.G[static_cast<std::size_t>(i)].value()));
            r.reproduction_scale = std::max(r.reproduction_scale, std::abs(cj.conn.G[static_cast<std::size_t>(i)].value()));
        }
    } catch (const DegenerateMetric&) {
        r.reproduction = std::numeric_limits<double>::infinity();
    }
    return r;
}

/// Re-verifies a recovered metric at every sample; downgrades the verdict to
/// inconclusive when any check fails.
inline void attach_metric(Verdict& v, const ClassificationReport& rep, const SpraySource& s, const RunConfig& cfg,
                          RecoveredMetric m, const std::function<std::optional<double>(const PointTangent&)>& lambda_at) {
    std::vector<PointTangent> pts;
    rep.for_each_point([&](const PointTangent& p, const PointAnalysis&) { pts.push_back(p); });
    std::vector<RecoveryCheck> checks(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { checks[i] = check_recovered(s, pts[i], cfg, lambda_at(pts[i])); });
    bool ok = true;
    m.finsler = true;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& c = checks[i];
        m.samples.push_back({pts[i], c.L});
        m.finsler = m.finsler && c.finsler.ok;
        m.parallel_residual = std::max(m.parallel_residual, c.parallel);
        m.reproduction_residual = std::max(m.reproduction_residual, c.reproduction);
        ok = ok && c.finsler.ok && cfg.tol.is_zero(c.parallel, c.parallel_scale) &&
             c.reproduction <= cfg.tol.abs + cfg.tol.rel * c.reproduction_scale;
    }
    if (!ok) {
        v.notes.push_back("recovered metric " + m.form + " failed re-verification (finsler=" + (m.finsler ? "true" : "false") +
                          ", max|L_;i|=" + std::to_string(m.parallel_residual) +
                          ", max|G_L - G|=" + std::to_string(m.reproduction_residual) + ")");
        v.outcome = Outcome::Inconclusive;
        v.rule = "recovery_failed";
    }
    v.recovered_metric = std::move(m);
}

inline RecoveredMetric metric_from_R(const SpraySource& s, const RunConfig& cfg, std::string form,
                                     std::optional<OmegaField> omega, std::vector<double> x0) {
    RecoveredMetric m;
    m.form = std::move(form);
    m.x0 = x0;
    m.evaluate = [&s, cfg, omega, x0](const PointTangent& p) {
        const double R = curvature(s, p, 2).Ric.value() / (s.dim() - 1);
        return omega ? R / recover_lambda(*omega, x0, p.x) : R;
    };
    return m;
}

}  // namespace detail

/// Isotropic sprays.
inline Verdict verdict_isotropic(const ClassificationReport& rep, const SpraySource& s, const RunConfig& cfg) {
    if (!rep.isotropic.value) throw PreconditionError("verdict_isotropic needs isotropic curvature on all samples");
    const Tolerances& tol = cfg.tol;
    const int n = rep.dim;
    Verdict v;
    v.notes.push_back("R = 0 is judged on " + std::to_string(rep.count) + " samples");

    bool all_zero = true;
    double worst_R = 0.0;
    FinslerCheck fc;
    rep.for_each_point([&](const PointTangent&, const PointAnalysis& a) {
        all_zero = all_zero && a.R_zero;
        worst_R = std::max(worst_R, std::abs(a.R));
        fold(fc, a.R_finsler);
    });
    if (all_zero) {
        v.outcome = Outcome::MetrizableLocally;
        v.rule = "R_vanishes";
        v.residual = worst_R;
        v.evidence = "max |R| = " + std::to_string(worst_R);
        return v;
    }
    if (!fc.ok) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "R_not_finsler";
        v.residual = fc.worst_rank_ratio;
        v.evidence = "R fails the Finsler check at " + std::to_string(fc.failures) + " samples (min rank ratio " +
                     std::to_string(fc.worst_rank_ratio) + ", max Euler residual " + std::to_string(fc.worst_euler) + ")";
        return v;
    }

    // omega = R_{;i}/R: y-independence per base point, closedness, vanishing
    double spread = 0.0, curl = 0.0, wmax = 0.0;
    bool y_indep = true, closed = true;
    for (const auto& g : rep.groups) {
        const auto ref = std::find_if(g.results.begin(), g.results.end(), [](const PointAnalysis& a) { return !a.omega.empty(); });
        if (ref == g.results.end()) continue;
        const auto& w0 = ref->omega;
        double gscale = 0.0;
        for (const auto& a : g.results) gscale = std::max({gscale, max_abs(a.omega), a.omega_scale});
        for (const auto& a : g.results) {
            if (a.omega.empty()) continue;
            double d = 0.0;
            for (int i = 0; i < n; ++i) d = std::max(d, std::abs(a.omega[static_cast<std::size_t>(i)] - w0[static_cast<std::size_t>(i)]));
            spread = std::max(spread, d);
            y_indep = y_indep && tol.is_zero(d, gscale);
            curl = std::max(curl, a.omega_closed_residual);
            closed = closed && tol.is_zero(a.omega_closed_residual, a.omega_scale);
            wmax = std::max(wmax, max_abs(a.omega));
        }
        v.omega_report.emplace_back(g.x, w0);
    }
    if (!y_indep) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "omega_y_dependent";
        v.residual = spread;
        v.evidence = "R_{;i}/R varies with y at fixed x by up to " + std::to_string(spread);
        return v;
    }
    if (!closed) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "omega_not_closed";
        v.residual = curl;
        v.evidence = "max |d_j omega_i - d_i omega_j| = " + std::to_string(curl);
        return v;
    }
    bool omega_zero = true;
    rep.for_each_point([&](const PointTangent&, const PointAnalysis& a) {
        omega_zero = omega_zero && tol.is_zero(max_abs(a.omega), a.omega_scale);
    });
    const auto& first = rep.groups.front();
    if (omega_zero) {
        v.outcome = Outcome::MetrizableWithMetric;
        v.rule = "omega_zero";
        v.residual = wmax;
        v.evidence = "omega = 0; L = R has flag curvature 1";
        detail::attach_metric(v, rep, s, cfg, detail::metric_from_R(s, cfg, "R", std::nullopt, first.x),
                              [](const PointTangent&) { return std::optional<double>{}; });
        return v;
    }
    if (n >= 3) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "omega_nonzero_dim_ge3";
        v.residual = wmax;
        v.evidence = "closed omega != 0 is possible only in dimension 2";
        return v;
    }
    v.outcome = Outcome::MetrizableWithMetric;
    v.rule = "omega_nonzero_dim2";
    v.residual = wmax;
    v.evidence = "omega closed and nonzero; L = R/lambda with lambda = exp(int omega)";
    const OmegaField omega = omega_field(s, first.points.front().y, tol);
    auto m = detail::metric_from_R(s, cfg, "R/lambda", omega, first.x);
    detail::attach_metric(v, rep, s, cfg, std::move(m), [&](const PointTangent& p) {
        return std::optional<double>(recover_lambda(omega, first.x, p.x));
    });
    return v;
}

/// Constant-curvature sprays.
inline Verdict verdict_constant(const ClassificationReport& rep, const SpraySource& s, const RunConfig& cfg) {
    if (!rep.constant.value) throw PreconditionError("verdict_constant needs constant curvature on all samples");
    Verdict v;
    bool all_zero = true;
    double worst = 0.0;
    FinslerCheck fc;
    rep.for_each_point([&](const PointTangent&, const PointAnalysis& a) {
        all_zero = all_zero && a.R_zero;
        worst = std::max(worst, std::abs(a.R) * (rep.dim - 1));
        fold(fc, a.R_finsler);
    });
    if (all_zero) {
        v.outcome = Outcome::MetrizableLocally;
        v.rule = "ric_vanishes";
        v.residual = worst;
        v.evidence = "max |Ric| = " + std::to_string(worst);
        v.notes.push_back("Ric = 0 is judged on " + std::to_string(rep.count) + " samples");
        return v;
    }
    if (!fc.ok) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "ric_not_finsler";
        v.residual = fc.worst_rank_ratio;
        v.evidence = "Ric fails the Finsler check at " + std::to_string(fc.failures) + " samples (min rank ratio " +
                     std::to_string(fc.worst_rank_ratio) + ")";
        return v;
    }
    v.outcome = Outcome::MetrizableWithMetric;
    v.rule = "ric_finsler";
    v.evidence = "Ric is a Finsler metric; L = Ric/(n-1) has flag curvature 1";
    detail::attach_metric(v, rep, s, cfg, detail::metric_from_R(s, cfg, "Ric/(n-1)", std::nullopt, rep.groups.front().x),
                          [](const PointTangent&) { return std::optional<double>{}; });
    return v;
}

/// Sufficient conditions for non-metrizability of scalar sprays.
inline Verdict nonmetrizable_scalar(const ClassificationReport& rep, const RunConfig& cfg) {
    if (!rep.scalar.value) throw PreconditionError("nonmetrizable_scalar needs scalar curvature on all samples");
    const Tolerances& tol = cfg.tol;
    Verdict v;
    bool all_zero = true, tau_zero = true, ratio_nonzero = false;
    double tmax = 0.0, ratio_res = 0.0;
    rep.for_each_point([&](const PointTangent&, const PointAnalysis& a) {
        all_zero = all_zero && a.R_zero;
        tau_zero = tau_zero && tol.is_zero(a.tau_max, a.tau_scale);
        tmax = std::max(tmax, a.tau_max);
        if (!a.R_zero) {
            const double r = std::max(a.ratio_horizontal, a.ratio_vertical);
            ratio_res = std::max(ratio_res, r);
            ratio_nonzero = ratio_nonzero || !tol.is_zero(r, a.ratio_scale);
        }
    });
    if (all_zero && !tau_zero) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "R_zero_tau_nonzero";
        v.residual = tmax;
        v.evidence = "R = 0 on samples while max |tau| = " + std::to_string(tmax);
        return v;
    }
    if (all_zero) {
        v.outcome = Outcome::MetrizableLocally;
        v.rule = "R_vanishes";
        v.evidence = "R^i_k = 0 on samples";
        return v;
    }
    if (ratio_nonzero) {
        v.outcome = Outcome::NotMetrizable;
        v.rule = "tau_over_R_condition";
        v.residual = ratio_res;
        v.evidence = "(tau_i/R)_{;j} or the antisymmetric part of (tau_i/R)_{.j} is nonzero (max " + std::to_string(ratio_res) + ")";
        return v;
    }
    v.outcome = Outcome::Inconclusive;
    v.rule = "no_sufficient_condition";
    v.residual = ratio_res;
    v.evidence = "no sufficient condition for non-metrizability fires";
    return v;
}

/// Chooses the decision procedure from the classification.
inline Verdict metrize(const ClassificationReport& rep, const SpraySource& s, const RunConfig& cfg) {
    if (rep.constant.value) return verdict_constant(rep, s, cfg);
    if (rep.isotropic.value) return verdict_isotropic(rep, s, cfg);
    if (rep.scalar.value) return nonmetrizable_scalar(rep, cfg);
    Verdict v;
    v.rule = "not_scalar";
    v.residual = rep.scalar.residual;
    v.evidence = "not of scalar curvature; no decision procedure applies";
    return v;
}

struct ShiftResult {
    double lambda = 0.0;          // flag curvature of L
    double lambda_spread = 0.0;
    double c = 0.0;
    double rbar_residual = 0.0;   // max |Rbar - (lambda + c^2) L|
    bool rule_metrizable = false;
    bool agrees = false;
    ClassificationReport report;
    Verdict verdict;
};

/// Shifted spray G^i + c sqrt(L) y^i of a metric of constant flag curvature.
inline ShiftResult projective_shift(const ProblemDef& metric, double c, const RunConfig& cfg) {
    if (metric.kind != ProblemKind::Metric) throw PreconditionError("projective_shift needs a metric input");
    const SpraySource base(metric);
    const int n = base.dim();
    struct Base {
        double L, R;
        FinslerEvidence fe;
    };
    const auto samples = sample_groups(base, cfg, base_point_count(cfg.points, n), [&](const PointTangent& p) {
        const CurvatureJets cj = curvature(base, p, 2);
        const Jet L = base.metric_jet(p, 2);
        if (!(L.value() > 0.0)) throw PreconditionError("projective shift needs L > 0 on samples");
        return Base{L.value(), cj.Ric.value() / (n - 1), finsler_evidence(L, p, cfg.tol)};
    });
    ShiftResult out;
    out.c = c;
    std::vector<double> lambdas;
    for (const auto& g : samples.groups)
        for (const auto& b : g.results) {
            if (!b.fe.ok) throw PreconditionError("L fails the Finsler check");
            lambdas.push_back(b.R / b.L);
        }
    const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
    out.lambda = 0.5 * (*lo + *hi);
    out.lambda_spread = *hi - *lo;
    if (!cfg.tol.is_zero(out.lambda_spread, std::abs(out.lambda)))
        throw PreconditionError("L does not have constant flag curvature (spread " + std::to_string(out.lambda_spread) + ")");
    if (std::abs(out.lambda) <= cfg.tol.abs) out.lambda = 0.0;

    const SpraySource shifted(metric, c);
    out.report = classify(shifted, cfg);
    out.report.for_each_point([&](const PointTangent& p, const PointAnalysis& a) {
        const double L = base.metric_jet(p, 0).value();
        out.rbar_residual = std::max(out.rbar_residual, std::abs(a.R - (out.lambda + c * c) * L));
    });
    out.verdict = metrize(out.report, shifted, cfg);
    out.rule_metrizable = c == 0.0 || cfg.tol.is_zero(out.lambda + c * c, 1.0);
    out.agrees = out.verdict.outcome != Outcome::Inconclusive && is_metrizable(out.verdict.outcome) == out.rule_metrizable;
    return out;
}

}  // namespace spraylab
