#pragma once

// Fixture corpus: "<name>.spray" problem text plus "<name>.json" expectations.
//
// Expectation keys: description, flags{name: bool}, verdict{outcome, rule},
// metric_induced, box{var: [lo, hi]}, checks[]. Check kinds:
//   witness_metric{metric}           L_{;i} = 0 under the spray and L is Finsler
//   recovered_metric{metric, up_to_constant?}
//   omega{omega: [exprs in x]}       reported omega of the isotropic verdict
//   scalar_values{x, y, R, tau?}
//   nonmetrizable_scalar{outcome}
//   riemann_zero
//   quadratic_structure{value}
//   cms_omega{class, p, q, param}    fitted omega_12 against the closed form
//   flag_ode                         |lambda'' + eps I lambda'| <= 1e-6

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "spraylab/classify.hpp"
#include "spraylab/dim2.hpp"
#include "spraylab/dsl.hpp"
#include "spraylab/errors.hpp"
#include "spraylab/metrize.hpp"
#include "spraylab/pflat.hpp"
#include "spraylab/sampling.hpp"

#ifndef SPRAYLAB_CORPUS_DIR
#define SPRAYLAB_CORPUS_DIR "corpus"
#endif

namespace spraylab {

/// SPRAYLAB_CORPUS overrides the compiled-in directory.
inline std::filesystem::path corpus_dir() {
    if (const char* env = std::getenv("SPRAYLAB_CORPUS"); env && *env) return env;
    return SPRAYLAB_CORPUS_DIR;
}

inline std::vector<std::string> fixture_names() {
    std::vector<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(corpus_dir()))
        if (e.path().extension() == ".spray") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

struct Fixture {
    std::string name;
    std::string description;
    std::string source;
    ProblemDef def;
    nlohmann::json expect;
    std::map<std::string, Interval> box;
    bool metric_induced = false;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw UnknownFixture("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

inline Fixture load_fixture(const std::string& name, const std::map<std::string, double>& consts = {}) {
    const auto dir = corpus_dir();
    const auto spray = dir / (name + ".spray");
    if (name.empty() || name.find('/') != std::string::npos || !std::filesystem::exists(spray))
        throw UnknownFixture("unknown fixture '" + name + "'");
    Fixture f;
    f.name = name;
    f.source = detail::read_file(spray);
    f.def = parse(f.source, consts, name);
    const auto json_path = dir / (name + ".json");
    f.expect = std::filesystem::exists(json_path) ? nlohmann::json::parse(detail::read_file(json_path)) : nlohmann::json::object();
    f.description = f.expect.value("description", "");
    f.metric_induced = f.expect.value("metric_induced", f.def.kind == ProblemKind::Metric);
    if (f.expect.contains("box"))
        for (const auto& [k, v] : f.expect["box"].items()) f.box[k] = Interval{v.at(0).get<double>(), v.at(1).get<double>()};
    return f;
}

/// Fixture box entries fill variables the caller left unset.
inline RunConfig fixture_config(const Fixture& f, RunConfig cfg) {
    for (const auto& [k, v] : f.box) cfg.box.emplace(k, v);
    return cfg;
}

struct FixtureOutcome {
    std::string name;
    bool pass = true;
    std::vector<std::string> mismatches;
    RunConfig cfg;
    std::shared_ptr<const SpraySource> source;  // the verdict's recovered metric refers to it
    ClassificationReport report;
    Verdict verdict;
};

namespace detail {

inline ExprPtr scalar_expr(const std::string& text, int n) { return parse("dim " + std::to_string(n) + "\nmetric E = " + text).exprs.at(0); }

inline bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

inline std::string fmt(double v) {
    std::ostringstream o;
    o.precision(12);
    o << v;
    return o.str();
}

/// Fixture checks that need a metric expression L: parallel under the spray and Finsler.
inline void check_witness(FixtureOutcome& o, const nlohmann::json& c) {
    const SpraySource& s = *o.source;
    const int n = s.dim();
    const ExprPtr L = scalar_expr(c.at("metric").get<std::string>(), n);
    double worst = 0.0;
    int bad = 0, finsler_bad = 0;
    o.report.for_each_point([&](const PointTangent& p, const PointAnalysis&) {
        const Connection conn = berwald(s.spray_jets(p, 2), p);
        const Jet Lj = lift([&](std::span<const Jet> v) { return evaluate(*L, v); }, p.chart(), 2);
        double scale = 0.0;
        const TensorField d = h_cov(scalar_field(n, Lj.truncated(1)), conn, &scale);
        worst = std::max(worst, d.max_abs());
        if (!o.cfg.tol.is_zero(d.max_abs(), scale)) ++bad;
        if (!finsler_evidence(Lj, p, o.cfg.tol).ok) ++finsler_bad;
    });
    if (bad) o.mismatches.push_back("witness metric: L_;i != 0 at " + std::to_string(bad) + " samples (max " + fmt(worst) + ")");
    if (finsler_bad) o.mismatches.push_back("witness metric fails the Finsler check at " + std::to_string(finsler_bad) + " samples");
}

inline void check_recovered_metric(FixtureOutcome& o, const nlohmann::json& c) {
    if (!o.verdict.recovered_metric) {
        o.mismatches.push_back("recovered metric: verdict carries no metric");
        return;
    }
    const int n = o.source->dim();
    const ExprPtr L = scalar_expr(c.at("metric").get<std::string>(), n);
    const bool up_to_constant = c.value("up_to_constant", false);
    const auto& samples = o.verdict.recovered_metric->samples;
    double k = 1.0;
    if (up_to_constant && !samples.empty()) k = samples.front().L / evaluate_real(*L, samples.front().p.chart());
    double worst = 0.0;
    for (const auto& m : samples) {
        const double want = k * evaluate_real(*L, m.p.chart());
        worst = std::max(worst, std::abs(m.L - want) / std::max(1.0, std::abs(want)));
    }
    if (worst > 1e-8) o.mismatches.push_back("recovered metric differs from " + c.at("metric").get<std::string>() + " (rel " + fmt(worst) + ")");
}

inline void check_omega(FixtureOutcome& o, const nlohmann::json& c) {
    const int n = o.source->dim();
    std::vector<ExprPtr> w;
    for (const auto& e : c.at("omega")) w.push_back(scalar_expr(e.get<std::string>(), n));
    if (o.verdict.omega_report.empty()) {
        o.mismatches.push_back("omega: verdict reports no omega");
        return;
    }
    double worst = 0.0;
    for (const auto& [x, om] : o.verdict.omega_report) {
        std::vector<double> chart(x);
        chart.resize(static_cast<std::size_t>(2 * n), 1.0);
        for (int i = 0; i < n; ++i) {
            const double want = evaluate_real(*w[static_cast<std::size_t>(i)], chart);
            worst = std::max(worst, std::abs(om[static_cast<std::size_t>(i)] - want) / std::max(1.0, std::abs(want)));
        }
    }
    if (worst > 1e-6) o.mismatches.push_back("omega differs from the expected 1-form (rel " + fmt(worst) + ")");
}

inline void check_scalar_values(FixtureOutcome& o, const nlohmann::json& c) {
    const PointTangent p{c.at("x").get<std::vector<double>>(), c.at("y").get<std::vector<double>>()};
    const PointAnalysis a = analyze_point(*o.source, p, o.cfg);
    const double R = c.at("R").get<double>();
    if (!close(a.R, R, 1e-8)) o.mismatches.push_back("R at the reference point is " + fmt(a.R) + ", expected " + fmt(R));
    if (c.contains("tau")) {
        const auto tau = c.at("tau").get<std::vector<double>>();
        for (std::size_t k = 0; k < tau.size() && k < a.tau.size(); ++k)
            if (!close(a.tau[k], tau[k], 1e-8))
                o.mismatches.push_back("tau_" + std::to_string(k + 1) + " is " + fmt(a.tau[k]) + ", expected " + fmt(tau[k]));
    }
}

inline void check_cms_omega(FixtureOutcome& o, const nlohmann::json& c) {
    const CmsMetric m = gen_cms_metric(c.at("class").get<int>(), c.at("p").get<std::string>(), c.at("q").get<std::string>(),
                                       c.value("param", 0.0));
    double worst_def = 0.0;
    o.report.for_each_point([&](const PointTangent& p, const PointAnalysis&) {
        const auto chart = p.chart();
        const double a = evaluate_real(o.source->def().metric(), chart), b = evaluate_real(m.metric.metric(), chart);
        worst_def = std::max(worst_def, std::abs(a - b) / std::max(1.0, std::abs(b)));
    });
    if (worst_def > 1e-12) o.mismatches.push_back("fixture metric differs from the generated class metric");
    if (!o.report.weak_isotropic.value) o.mismatches.push_back("cms: weak isotropy fails");
    double worst = 0.0;
    for (const auto& f : o.report.omega) {
        const double w = m.omega12(f.x);
        worst = std::max(worst, std::abs(f.omega(0, 1) - w) / std::max(1e-3, std::abs(w)));
    }
    if (worst > 1e-6) o.mismatches.push_back("fitted omega_12 differs from the closed form (rel " + fmt(worst) + ")");
}

inline void check_flag_ode(FixtureOutcome& o) {
    double worst = 0.0;
    o.report.for_each_point([&](const PointTangent& p, const PointAnalysis&) {
        worst = std::max(worst, flag_ode_residual(*o.source, p, o.cfg));
    });
    if (worst > 1e-6) o.mismatches.push_back("flag curvature ODE residual " + fmt(worst));
}

inline void run_check(FixtureOutcome& o, const nlohmann::json& c) {
    const std::string kind = c.at("kind").get<std::string>();
    if (kind == "witness_metric") {
        check_witness(o, c);
    } else if (kind == "recovered_metric") {
        check_recovered_metric(o, c);
    } else if (kind == "omega") {
        check_omega(o, c);
    } else if (kind == "scalar_values") {
        check_scalar_values(o, c);
    } else if (kind == "nonmetrizable_scalar") {
        const std::string got = to_string(nonmetrizable_scalar(o.report, o.cfg).outcome);
        if (got != c.at("outcome").get<std::string>())
            o.mismatches.push_back("nonmetrizable_scalar gives " + got + ", expected " + c.at("outcome").get<std::string>());
    } else if (kind == "riemann_zero") {
        double worst = 0.0, scale = 0.0;
        o.report.for_each_point([&](const PointTangent&, const PointAnalysis& a) {
            worst = std::max(worst, max_abs(a.bundle.R));
            scale = std::max(scale, a.bundle.curvature_scale);
        });
        if (!o.cfg.tol.is_zero(worst, scale)) o.mismatches.push_back("R^i_k is not zero (max " + fmt(worst) + ")");
    } else if (kind == "quadratic_structure") {
        const bool want = c.at("value").get<bool>();
        try {
            const bool got = quadratic_structure_check(*o.source, o.cfg).ok;
            if (got != want) o.mismatches.push_back(std::string("quadratic structure is ") + (got ? "true" : "false"));
        } catch (const PreconditionError& e) {
            o.mismatches.push_back(std::string("quadratic structure: ") + e.what());
        }
    } else if (kind == "cms_omega") {
        check_cms_omega(o, c);
    } else if (kind == "flag_ode") {
        check_flag_ode(o);
    } else {
        throw ParamError("unknown check kind '" + kind + "'");
    }
}

inline const Flag* flag_by_name(const ClassificationReport& r, const std::string& name) {
    if (name == "scalar") return &r.scalar;
    if (name == "isotropic") return &r.isotropic;
    if (name == "constant") return &r.constant;
    if (name == "berwald") return &r.berwald;
    if (name == "projective_form") return &r.projective_form;
    if (name == "weak_isotropic") return &r.weak_isotropic;
    return nullptr;
}

}  // namespace detail

/// Identity residuals above this bound count as fixture mismatches.
inline constexpr double kIdentityBound = 1e-8;

inline FixtureOutcome run_fixture(const Fixture& f, const RunConfig& base = {}) {
    FixtureOutcome o;
    o.name = f.name;
    o.cfg = fixture_config(f, base);
    o.source = std::make_shared<const SpraySource>(f.def);
    o.report = classify(*o.source, o.cfg);
    o.verdict = metrize(o.report, *o.source, o.cfg);

    if (f.expect.contains("flags"))
        for (const auto& [k, v] : f.expect["flags"].items()) {
            const Flag* flag = detail::flag_by_name(o.report, k);
            if (!flag) throw ParamError("unknown flag '" + k + "' in fixture " + f.name);
            if (flag->value != v.get<bool>())
                o.mismatches.push_back("flag " + k + " is " + (flag->value ? "true" : "false") + " (residual " +
                                       detail::fmt(flag->residual) + ")");
        }
    if (f.expect.contains("verdict")) {
        const auto& v = f.expect["verdict"];
        const std::string outcome = to_string(o.verdict.outcome);
        if (v.contains("outcome") && v["outcome"].get<std::string>() != outcome)
            o.mismatches.push_back("verdict " + outcome + " (" + o.verdict.rule + "), expected " + v["outcome"].get<std::string>());
        if (v.contains("rule") && v["rule"].get<std::string>() != o.verdict.rule)
            o.mismatches.push_back("rule " + o.verdict.rule + ", expected " + v["rule"].get<std::string>());
    }
    for (const auto& [k, r] : o.report.identities)
        if (!(r <= kIdentityBound)) o.mismatches.push_back("identity " + k + " residual " + detail::fmt(r));
    if (f.metric_induced && o.verdict.outcome == Outcome::NotMetrizable)
        o.mismatches.push_back("metric-induced spray judged not metrizable");
    if (f.expect.contains("checks"))
        for (const auto& c : f.expect["checks"]) {
            try {
                detail::run_check(o, c);
            } catch (const ParamError&) {
                throw;
            } catch (const Error& e) {
                o.mismatches.push_back("check " + c.value("kind", std::string("?")) + " raised: " + e.what());
            }
        }
    o.pass = o.mismatches.empty();
    return o;
}

inline FixtureOutcome run_fixture(const std::string& name, const RunConfig& base = {}) { return run_fixture(load_fixture(name), base); }

}  // namespace spraylab
