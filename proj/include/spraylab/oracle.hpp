#pragma once

// Finite-difference reconstruction of R^i_k, chi_i and B^i_hjk from plain
// evaluations of G^i with fourth-order central stencils. Spray inputs are
// evaluated without jets in long double; metric inputs supply G^i values
// through the order-0 metric pipeline.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spraylab/dsl.hpp"
#include "spraylab/finite_difference.hpp"
#include "spraylab/geometry.hpp"
#include "spraylab/sampling.hpp"

namespace spraylab {

struct OracleTensors {
    std::vector<double> R;    // R^i_k
    std::vector<double> chi;  // chi_i
    std::vector<double> B;    // B^i_hjk
};

using OracleReal = long double;
inline constexpr double kOracleFdStep = 1e-3;        // spray inputs, evaluated in long double
inline constexpr double kOracleMetricFdStep = 5e-3;  // metric inputs, G^i from the double-precision metric pipeline

inline double default_oracle_step(const SpraySource& s) { return s.is_metric() ? kOracleMetricFdStep : kOracleFdStep; }
using OracleFunction = std::function<OracleReal(std::span<const OracleReal>)>;

/// Real-valued G^i(x, y) for component i.
inline OracleFunction real_spray_component(const SpraySource& s, int i) {
    const int n = s.dim();
    if (!s.is_metric()) {
        const ExprPtr e = s.def().exprs[static_cast<std::size_t>(i)];
        return [e](std::span<const OracleReal> v) { return basic_evaluate_real<OracleReal>(*e, v); };
    }
    return [&s, n, i](std::span<const OracleReal> v) -> OracleReal {
        PointTangent p{{v.begin(), v.begin() + n}, {v.begin() + n, v.end()}};
        return s.spray_jets(p, 0)[static_cast<std::size_t>(i)].value();
    };
}

class FdSpray {
public:
    FdSpray(const SpraySource& s, const PointTangent& p, double h) : n_(s.dim()), h_(h) {
        for (double c : p.chart()) chart_.push_back(c);
        for (int i = 0; i < n_; ++i) g_.push_back(real_spray_component(s, i));
    }

    /// d^alpha G^i with alpha given as a list of chart variables.
    double d(int i, std::initializer_list<int> vars) {
        MultiIndex alpha(static_cast<std::size_t>(2 * n_), 0);
        for (int v : vars) ++alpha[static_cast<std::size_t>(v)];
        auto key = std::make_pair(i, alpha);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        const auto& g = g_[static_cast<std::size_t>(i)];
        const std::span<const OracleReal> at(chart_);
        const double v = static_cast<double>(total_order(alpha) == 0 ? g(at) : basic_fd_partial<OracleReal>(g, at, alpha, h_, 4));
        cache_.emplace(std::move(key), v);
        return v;
    }

    int x(int k) const { return k; }
    int y(int k) const { return n_ + k; }

private:
    int n_;
    std::vector<OracleReal> chart_;
    OracleReal h_;
    std::vector<OracleFunction> g_;
    std::map<std::pair<int, MultiIndex>, double> cache_;
};

inline OracleTensors fd_oracle(const SpraySource& s, const PointTangent& p, std::optional<double> step = {}) {
    const int n = s.dim();
    FdSpray f(s, p, step.value_or(default_oracle_step(s)));
    auto Y = [&](int k) { return f.y(k); };
    auto X = [&](int k) { return f.x(k); };
    const auto& y = p.y;
    OracleTensors o;

    // R^i_k and its y-derivatives, by the product rule on the defining formula
    auto R = [&](int i, int k) {
        double r = 2.0 * f.d(i, {X(k)});
        for (int j = 0; j < n; ++j) {
            r -= y[static_cast<std::size_t>(j)] * f.d(i, {X(j), Y(k)});
            r += 2.0 * f.d(j, {}) * f.d(i, {Y(j), Y(k)});
            r -= f.d(i, {Y(j)}) * f.d(j, {Y(k)});
        }
        return r;
    };
    auto dR = [&](int i, int k, int m) {
        double r = 2.0 * f.d(i, {X(k), Y(m)}) - f.d(i, {X(m), Y(k)});
        for (int j = 0; j < n; ++j) {
            r -= y[static_cast<std::size_t>(j)] * f.d(i, {X(j), Y(k), Y(m)});
            r += 2.0 * f.d(j, {Y(m)}) * f.d(i, {Y(j), Y(k)});
            r += 2.0 * f.d(j, {}) * f.d(i, {Y(j), Y(k), Y(m)});
            r -= f.d(i, {Y(j), Y(m)}) * f.d(j, {Y(k)});
            r -= f.d(i, {Y(j)}) * f.d(j, {Y(k), Y(m)});
        }
        return r;
    };
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) o.R.push_back(R(i, k));
    for (int i = 0; i < n; ++i) {
        double c = 0.0;
        for (int m = 0; m < n; ++m) c += 2.0 * dR(m, i, m) + dR(m, m, i);
        o.chi.push_back(c);
    }
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) o.B.push_back(f.d(i, {Y(a), Y(b), Y(c)}));
    return o;
}

/// Worst jet-vs-oracle disagreement for one tensor; a component passes when
/// |jet - fd| <= max(floor, rel * |jet|).
struct OracleStat {
    std::string tensor;
    int components = 0;
    int failures = 0;
    double worst_diff = 0.0;
    double worst_ratio = 0.0;  // max |jet - fd| / bound
    double max_magnitude = 0.0;
};

struct OracleComparison {
    int points = 0;
    int rejected = 0;
    std::vector<OracleStat> stats;  // R, chi, B

    bool ok() const {
        for (const auto& s : stats)
            if (s.failures) return false;
        return true;
    }
};

inline constexpr double kOracleFloor = 1e-5;
inline constexpr double kOracleRel = 1e-4;

/// Compares jet R^i_k, chi_i and B^i_hjk with fd_oracle at cfg.points samples.
inline OracleComparison oracle_compare(const SpraySource& s, const RunConfig& cfg, std::optional<double> step = {}) {
    struct Pair {
        CurvatureBundle jet;
        OracleTensors fd;
    };
    const int n = s.dim();
    const auto samples = sample_groups(s, cfg, base_point_count(cfg.points, n), [&](const PointTangent& p) {
        return Pair{bundle(curvature(s, p, 3)), fd_oracle(s, p, step)};
    });
    OracleComparison out;
    out.rejected = samples.rejected;
    out.stats = {{"R"}, {"chi"}, {"B"}};
    auto fold = [](OracleStat& st, const std::vector<double>& jet, const std::vector<double>& fd) {
        for (std::size_t k = 0; k < jet.size(); ++k) {
            const double d = std::abs(jet[k] - fd[k]);
            const double bound = std::max(kOracleFloor, kOracleRel * std::abs(jet[k]));
            ++st.components;
            if (!(d <= bound)) ++st.failures;
            st.worst_diff = std::max(st.worst_diff, d);
            st.worst_ratio = std::max(st.worst_ratio, d / bound);
            st.max_magnitude = std::max(st.max_magnitude, std::abs(jet[k]));
        }
    };
    for (const auto& g : samples.groups)
        for (const auto& r : g.results) {
            if (out.points >= cfg.points) break;
            ++out.points;
            fold(out.stats[0], r.jet.R, r.fd.R);
            fold(out.stats[1], r.jet.chi, r.fd.chi);
            fold(out.stats[2], r.jet.B, r.fd.B);
        }
    return out;
}

}  // namespace spraylab
