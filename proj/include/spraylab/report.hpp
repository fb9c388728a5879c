#pragma once

// JSON reports. Keys: config, points[], classification{flag:{value,residual}},
// verdict{outcome,rule,evidence,recovered_metric?}, identities{name:residual}.

#include <json.hpp>
#include <string>

#include "spraylab/classify.hpp"
#include "spraylab/metrize.hpp"
#include "spraylab/sampling.hpp"

namespace spraylab {

using json = nlohmann::ordered_json;

/// Non-finite residuals become strings so that reports stay valid JSON.
inline json number(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline json numbers(std::span<const double> v) {
    json a = json::array();
    for (double e : v) a.push_back(number(e));
    return a;
}

inline json to_json(const RunConfig& c) {
    json box = json::object();
    for (const auto& [k, iv] : c.box) box[k] = {iv.lo, iv.hi};
    return {{"points", c.points},   {"seed", c.seed},       {"order", c.order},         {"tol_abs", c.tol.abs},
            {"tol_rel", c.tol.rel}, {"fd_step", c.fd_step}, {"max_attempt_factor", c.max_attempt_factor}, {"box", box}};
}

inline json to_json(const Flag& f) { return {{"value", f.value}, {"residual", number(f.residual)}}; }

inline json point_json(const PointTangent& p, const PointAnalysis& a) {
    const auto& b = a.bundle;
    json j{{"x", p.x},
           {"y", p.y},
           {"Ric", number(b.Ric)},
           {"R", number(a.R)},
           {"tau", numbers(a.tau)},
           {"R_ik", numbers(b.R)},
           {"chi", numbers(b.chi)},
           {"scalar_residual", number(a.scalar_residual)},
           {"bianchi_residual", number(b.bianchi_residual)},
           {"ry_residual", number(b.ry_residual)}};
    if (!a.omega.empty()) j["omega"] = numbers(a.omega);
    return j;
}

inline json classification_json(const ClassificationReport& r) {
    json omega = json::array();
    for (const auto& f : r.omega) {
        json m = json::array();
        for (int i = 0; i < f.omega.rows(); ++i) {
            json row = json::array();
            for (int k = 0; k < f.omega.cols(); ++k) row.push_back(number(f.omega(i, k)));
            m.push_back(row);
        }
        omega.push_back({{"x", f.x},
                         {"omega", m},
                         {"fit_residual", number(f.fit_residual)},
                         {"antisymmetry_residual", number(f.antisymmetry_residual)}});
    }
    return {{"name", r.name},
            {"dim", r.dim},
            {"accepted", r.count},
            {"rejected", r.rejected},
            {"base_points", r.groups.size()},
            {"scalar", to_json(r.scalar)},
            {"isotropic", to_json(r.isotropic)},
            {"constant", to_json(r.constant)},
            {"berwald", to_json(r.berwald)},
            {"projective_form", to_json(r.projective_form)},
            {"weak_isotropic", to_json(r.weak_isotropic)},
            {"ric_parallel_residual", number(r.ric_parallel_residual)},
            {"weak_isotropy_fits", omega},
            {"notes", r.notes}};
}

inline json identities_json(const ClassificationReport& r) {
    json j = json::object();
    for (const auto& [k, v] : r.identities) j[k] = number(v);
    return j;
}

inline json points_json(const ClassificationReport& r) {
    json a = json::array();
    r.for_each_point([&](const PointTangent& p, const PointAnalysis& pa) { a.push_back(point_json(p, pa)); });
    return a;
}

inline json to_json(const Verdict& v) {
    json j{{"outcome", to_string(v.outcome)}, {"rule", v.rule}, {"residual", number(v.residual)}, {"evidence", v.evidence}};
    if (v.recovered_metric) {
        const auto& m = *v.recovered_metric;
        json samples = json::array();
        for (const auto& s : m.samples) samples.push_back({{"x", s.p.x}, {"y", s.p.y}, {"L", number(s.L)}});
        j["recovered_metric"] = {{"form", m.form},
                                 {"x0", m.x0},
                                 {"finsler", m.finsler},
                                 {"parallel_residual", number(m.parallel_residual)},
                                 {"reproduction_residual", number(m.reproduction_residual)},
                                 {"samples", samples}};
    }
    if (!v.omega_report.empty()) {
        json w = json::array();
        for (const auto& [x, o] : v.omega_report) w.push_back({{"x", x}, {"omega", numbers(o)}});
        j["omega_report"] = w;
    }
    j["notes"] = v.notes;
    return j;
}

/// Full report for a classification and an optional verdict.
inline json make_report(const RunConfig& cfg, const std::string& input, const ClassificationReport& r, const Verdict* v) {
    json cfg_json = to_json(cfg);
    cfg_json["input"] = input;
    json j{{"config", cfg_json}, {"points", points_json(r)}, {"classification", classification_json(r)}};
    if (v) j["verdict"] = to_json(*v);
    j["identities"] = identities_json(r);
    return j;
}

}  // namespace spraylab
