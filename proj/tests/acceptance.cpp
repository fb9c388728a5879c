// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <sstream>

#include "spraylab/spraylab.hpp"

using namespace spraylab;

namespace {

struct Check {
    bool pass = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& why) {
        if (!cond) {
            pass = false;
            detail << " [" << why << "]";
        }
    }
};

double rel_vec(std::span<const double> got, std::span<const double> want) {
    double diff = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        diff = std::max(diff, std::abs(got[i] - want[i]));
        mag = std::max(mag, std::abs(want[i]));
    }
    return diff / mag;
}

RunConfig with_points(int points, std::uint64_t seed = 7) {
    RunConfig c;
    c.points = points;
    c.seed = seed;
    return c;
}

void oracle_agreement(Check& o) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int components = 0;
    for (const auto& name : fixture_names()) {
        const auto f = load_fixture(name);
        const SpraySource s(f.def);
        const auto c = oracle_compare(s, fixture_config(f, with_points(32)));
        o.require(c.points == 32, name + ": " + std::to_string(c.points) + " points");
        for (const auto& st : c.stats) {
            components += st.components;
            worst = std::max(worst, st.worst_ratio);
            o.require(st.failures == 0, name + " " + st.tensor + ": " + std::to_string(st.failures) + " failures");
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < 10.0, "runtime over 10 s");
    o.detail << components << " components, worst |jet-fd|/bound " << worst << ", " << secs << " s";
}

void ex72_reproduction(Check& o) {
    const auto f = load_fixture("ex7.2");
    const SpraySource s(f.def);
    const RunConfig cfg = fixture_config(f, with_points(64));
    const auto rep = classify(s, cfg);
    double worst_R = 0.0, worst_dR = 0.0;
    int points = 0;
    rep.for_each_point([&](const PointTangent& p, const PointAnalysis& a) {
        ++points;
        const double y1 = p.y[0], y2 = p.y[1], ny = std::hypot(y1, y2);
        const double R = ny * ny;
        worst_R = std::max(worst_R, std::abs(a.R - R) / R);
        const std::vector<double> want{y2 * ny, -y1 * ny};
        const std::vector<double> got{a.omega.at(0) * a.R, a.omega.at(1) * a.R};
        worst_dR = std::max(worst_dR, rel_vec(got, want));
    });
    const auto v = metrize(rep, s, cfg);
    o.require(points == 64, std::to_string(points) + " points");
    o.require(worst_R <= 1e-8, "R relative error");
    o.require(worst_dR <= 1e-8, "R_;i relative error");
    o.require(v.outcome == Outcome::NotMetrizable && v.rule == "omega_y_dependent",
              "verdict " + to_string(v.outcome) + "/" + v.rule);
    o.detail << "max rel err R " << worst_R << ", R_;i " << worst_dR << "; " << to_string(v.outcome) << " [" << v.rule << "]";
}

void ex73_sweep(Check& o) {
    for (double c : {0.5, 1.0, 2.0, 3.0}) {
        const auto f = load_fixture("ex7.3", {{"c", c}});
        const SpraySource s(f.def);
        const RunConfig cfg = fixture_config(f, with_points(64));
        const auto rep = classify(s, cfg);
        const auto v = metrize(rep, s, cfg);
        o.detail << "c=" << c << ": " << to_string(v.outcome) << "; ";
        o.require(is_metrizable(v.outcome) == (c == 2.0), "c=" + std::to_string(c));
        if (c != 2.0) continue;
        if (!v.recovered_metric) {
            o.require(false, "no recovered metric at c=2");
            continue;
        }
        double worst = 0.0;
        for (const auto& m : v.recovered_metric->samples) {
            const double r2 = m.p.x[0] * m.p.x[0] + m.p.x[1] * m.p.x[1];
            const double want = -4.0 * (m.p.y[0] * m.p.y[0] + m.p.y[1] * m.p.y[1]) / ((1 - r2) * (1 - r2));
            worst = std::max(worst, std::abs(m.L - want) / std::abs(want));
        }
        o.require(!v.recovered_metric->samples.empty(), "no metric samples");
        o.require(worst <= 1e-8, "recovered L differs");
        o.detail << "L = " << v.recovered_metric->form << ", max rel err vs -4|y|^2/(1-|x|^2)^2 " << worst << "; ";
    }
}

QuadraticData quadratic(std::initializer_list<double> A, std::initializer_list<double> B, double C) {
    const int n = static_cast<int>(B.size());
    QuadraticData q{Eigen::MatrixXd(n, n), Eigen::VectorXd(n), C};
    auto a = A.begin();
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) q.A(i, k) = *a++;
    auto b = B.begin();
    for (int i = 0; i < n; ++i) q.B(i) = *b++;
    return q;
}

void pflat_round_trip(Check& o) {
    std::vector<QuadraticData> cases;
    for (const auto& A : {std::initializer_list<double>{1, 0, 0, 1}, {2, 0.5, 0.5, 1}, {1, 0, 0, -1}})
        for (const auto& [b1, b2, C] : {std::tuple{0.0, 0.0, 1.0}, {0.3, -0.2, 1.5}, {-0.5, 0.4, -0.75}})
            cases.push_back(quadratic(A, {b1, b2}, C));
    cases.push_back(quadratic({1, 0.2, 0, 0.2, 1.5, 0, 0, 0, 2}, {0.1, 0, -0.2}, 1.0));
    const RunConfig cfg = with_points(64);
    double spray_res = 0.0, ric_res = 0.0;
    int ok = 0;
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto& q = cases[k];
        const std::string tag = "case " + std::to_string(k);
        if (!admissible(q, cfg).value) {
            o.require(false, tag + " not admissible");
            continue;
        }
        const auto fam = family_check(q, cfg);
        const double sr = fam.spray_residual / std::max(1.0, fam.scale);
        spray_res = std::max(spray_res, sr);
        ric_res = std::max(ric_res, fam.ric_residual);
        const SpraySource s(gen_spray(q));
        const auto rep = classify(s, cfg);
        const auto v = metrize(rep, s, cfg);
        const bool flags = rep.berwald.value && rep.projective_form.value && rep.isotropic.value && rep.constant.value;
        const bool verdict = v.outcome == Outcome::MetrizableWithMetric && v.recovered_metric &&
                             v.recovered_metric->form == "Ric/(n-1)";
        o.require(sr <= 1e-8, tag + " spray residual");
        o.require(fam.ric_residual <= 1e-8, tag + " Ric residual");
        o.require(flags, tag + " flags");
        o.require(verdict, tag + " verdict " + to_string(v.outcome));
        ok += sr <= 1e-8 && fam.ric_residual <= 1e-8 && flags && verdict;
    }
    o.detail << ok << "/" << cases.size() << " cases, max spray residual " << spray_res << ", max Ric residual " << ric_res;
}

void negative_structure(Check& o) {
    const auto f = load_fixture("pflat_exp");
    const SpraySource s(f.def);
    const RunConfig cfg = fixture_config(f, with_points(64));
    const auto q = quadratic_structure_check(s, cfg);
    const auto v = metrize(classify(s, cfg), s, cfg);
    o.require(!q.ok, "quadratic structure check passed");
    o.require(v.outcome == Outcome::NotMetrizable, "verdict " + to_string(v.outcome));
    o.detail << "max |u_ijk| " << q.residual << " (scale " << q.scale << "); " << to_string(v.outcome) << " [" << v.rule << "]";
}

void identity_suite(Check& o) {
    std::map<std::string, double> worst;
    std::map<std::string, int> seen;
    for (const auto& name : fixture_names()) {
        const auto r = run_fixture(name);
        for (const auto& [k, v] : r.report.identities) {
            worst[k] = std::max(worst[k], v);
            ++seen[k];
        }
        if (!r.report.scalar.value) continue;
        for (const char* k : {"bianchi", "chi_consistency", "Rik_y", "tau0_minus_R"})
            o.require(r.report.identities.contains(k), name + " lacks " + k);
        if (r.report.dim >= 3) o.require(r.report.identities.contains("scalar_bianchi"), name + " lacks scalar_bianchi");
    }
    o.require(seen["projective_factor"] > 0, "projective_factor never evaluated");
    for (const auto& [k, v] : worst) {
        o.require(v <= 1e-8, k);
        o.detail << k << " " << v << " (" << seen[k] << "); ";
    }
}

void cms_classes(Check& o) {
    for (const char* name : {"cms19", "cms20", "cms21"}) {
        const auto f = load_fixture(name);
        nlohmann::json params;
        for (const auto& c : f.expect.at("checks"))
            if (c.at("kind") == "cms_omega") params = c;
        const CmsMetric m = gen_cms_metric(params.at("class").get<int>(), params.at("p").get<std::string>(),
                                           params.at("q").get<std::string>(), params.value("param", 0.0));
        const SpraySource s(f.def);
        const RunConfig cfg = fixture_config(f, with_points(64));
        const auto rep = classify(s, cfg);
        double omega = 0.0, ode = 0.0;
        for (const auto& w : rep.omega) {
            const double want = m.omega12(w.x);
            omega = std::max(omega, std::abs(w.omega(0, 1) - want) / std::max(1e-3, std::abs(want)));
        }
        rep.for_each_point([&](const PointTangent& p, const PointAnalysis&) { ode = std::max(ode, flag_ode_residual(s, p, cfg)); });
        o.require(rep.weak_isotropic.value, std::string(name) + " not weakly isotropic");
        o.require(!rep.omega.empty(), std::string(name) + " no fitted omega");
        o.require(omega <= 1e-6, std::string(name) + " omega_12");
        o.require(ode <= 1e-6, std::string(name) + " flag ODE");
        o.detail << name << ": omega_12 rel " << omega << ", flag ODE " << ode << "; ";
    }
}

void projective_shift_grid(Check& o) {
    const ProblemDef flat = parse("dim 2\nmetric L = y1^2 + y2^2\n", {}, "euclidean");
    const ProblemDef sphere = load_fixture("sphere2").def;
    const RunConfig cfg = with_points(64);
    for (const auto& [lambda, c] : {std::pair{0.0, 0.0}, {0.0, 1.0}, {1.0, 2.0}}) {
        const auto r = projective_shift(lambda == 0.0 ? flat : sphere, c, cfg);
        const bool rule = lambda == -c * c || c == 0.0;
        o.require(std::abs(r.lambda - lambda) <= 1e-8, "lambda " + std::to_string(r.lambda));
        o.require(r.rule_metrizable == rule, "rule");
        o.require(r.agrees, "engine disagrees at c=" + std::to_string(c));
        o.detail << "(" << lambda << "," << c << "): " << to_string(r.verdict.outcome) << " rule "
                 << (rule ? "metrizable" : "not metrizable") << "; ";
    }
}

void soundness(Check& o) {
    int runs = 0;
    for (const auto& name : fixture_names()) {
        const auto f = load_fixture(name);
        const bool example = name.rfind("ex7.", 0) == 0;
        for (std::uint64_t seed : {7u, 1234u, 987654u}) {
            const auto r = run_fixture(f, with_points(64, seed));
            ++runs;
            if (f.metric_induced)
                o.require(r.verdict.outcome != Outcome::NotMetrizable, name + " judged not metrizable");
            if (example) o.require(r.pass, name + " seed " + std::to_string(seed));
        }
    }
    o.detail << runs << " fixture runs";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"curvature oracle agreement", oracle_agreement},
        {"isotropic spray with y-dependent omega", ex72_reproduction},
        {"constant-curvature family sweep", ex73_sweep},
        {"projectively flat round trip", pflat_round_trip},
        {"negative structure check", negative_structure},
        {"identity suite", identity_suite},
        {"constant main scalar classes", cms_classes},
        {"projective shift rule", projective_shift_grid},
        {"soundness across seeds", soundness},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check o;
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        all = all && o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail.str() << std::endl;
    }
    return all ? 0 : 1;
}
