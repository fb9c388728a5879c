#pragma once

// Tensor calculus of a spray at one point of TM, carried out on jets.
//
// Index conventions: N^i_j = G^i_{.j}, Gamma^i_jk = G^i_{.j.k}, B^i_hjk its
// y-derivative; delta_j = d_j - N^r_j dot_r. Tensors are stored row-major with
// the upper indices first.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spraylab/dsl.hpp"
#include "spraylab/errors.hpp"
#include "spraylab/jet.hpp"

namespace spraylab {

inline constexpr int kDefaultOrder = 4;
inline constexpr double kRankTol = 1e-8;
inline constexpr double kGuardThreshold = 1e-6;

struct Tolerances {
    double abs = 1e-8;
    double rel = 1e-6;

    bool is_zero(double residual, double scale) const { return std::abs(residual) <= abs + rel * std::abs(scale); }
};

struct PointTangent {
    std::vector<double> x;
    std::vector<double> y;

    int dim() const { return static_cast<int>(x.size()); }

    std::vector<double> chart() const {
        std::vector<double> c = x;
        c.insert(c.end(), y.begin(), y.end());
        return c;
    }
};

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

inline std::vector<double> values(std::span<const Jet> jets) {
    std::vector<double> out;
    out.reserve(jets.size());
    for (const auto& j : jets) out.push_back(j.value());
    return out;
}

inline double max_abs_value(std::span<const Jet> jets) {
    double m = 0.0;
    for (const auto& j : jets) m = std::max(m, std::abs(j.value()));
    return m;
}

/// Jets of y^1..y^n over the 2n chart variables.
inline std::vector<Jet> tangent_jets(const PointTangent& p, int order) {
    const auto c = p.chart();
    const int n = p.dim();
    auto space = JetSpace::get(2 * n, order);
    std::vector<Jet> y;
    for (int i = 0; i < n; ++i) y.push_back(Jet::variable(space, n + i, c[static_cast<std::size_t>(n + i)]));
    return y;
}

inline Jet ydot(const Jet& f, int n, int i) { return f.derivative(n + i); }
inline Jet xpartial(const Jet& f, int i) { return f.derivative(i); }

/// Tensor of jets with `upper` contravariant and `lower` covariant slots.
struct TensorField {
    int n = 0;
    int upper = 0;
    int lower = 0;
    std::vector<Jet> c;

    int rank() const { return upper + lower; }

    static std::size_t extent(int n, int rank) {
        std::size_t s = 1;
        for (int r = 0; r < rank; ++r) s *= static_cast<std::size_t>(n);
        return s;
    }

    std::size_t flat(std::span<const int> idx) const {
        std::size_t f = 0;
        for (int i : idx) f = f * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
        return f;
    }

    const Jet& at(std::initializer_list<int> idx) const { return c[flat(std::span<const int>(idx.begin(), idx.size()))]; }

    std::vector<int> unflatten(std::size_t f) const {
        std::vector<int> idx(static_cast<std::size_t>(rank()));
        for (int s = rank() - 1; s >= 0; --s) {
            idx[static_cast<std::size_t>(s)] = static_cast<int>(f % static_cast<std::size_t>(n));
            f /= static_cast<std::size_t>(n);
        }
        return idx;
    }

    std::vector<double> values() const { return spraylab::values(c); }
    double max_abs() const { return max_abs_value(c); }
    int order() const {
        int k = kMaxJetOrder;
        for (const auto& e : c) k = std::min(k, e.order());
        return k;
    }
};

inline TensorField scalar_field(int n, Jet s) { return TensorField{n, 0, 0, {std::move(s)}}; }

/// Berwald connection data of a spray at p.
struct Connection {
    int n = 0;
    PointTangent p;
    std::vector<Jet> y;      // y^i
    std::vector<Jet> G;      // G^i
    std::vector<Jet> N;      // N^i_j, index i*n+j
    std::vector<Jet> Gamma;  // Gamma^i_jk, index (i*n+j)*n+k
    std::vector<Jet> B;      // B^i_hjk, index ((i*n+h)*n+j)*n+k

    const Jet& n_at(int i, int j) const { return N[static_cast<std::size_t>(i * n + j)]; }
    const Jet& gamma(int i, int j, int k) const { return Gamma[static_cast<std::size_t>((i * n + j) * n + k)]; }
};

inline Connection berwald(std::vector<Jet> G, const PointTangent& p) {
    const int n = p.dim();
    Connection c;
    c.n = n;
    c.p = p;
    c.y = tangent_jets(p, G.front().order());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c.N.push_back(ydot(G[static_cast<std::size_t>(i)], n, j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                c.Gamma.push_back(k < j ? c.gamma(i, k, j) : ydot(c.n_at(i, j), n, k));
    if (G.front().order() >= 3) {
        for (int i = 0; i < n; ++i)
            for (int h = 0; h < n; ++h)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) c.B.push_back(ydot(c.gamma(i, h, j), n, k));
    }
    c.G = std::move(G);
    return c;
}

/// delta_j S = d_j S - N^r_j dot_r S.
inline Jet delta(const Connection& c, const Jet& s, int j) {
    Jet r = xpartial(s, j);
    for (int k = 0; k < c.n; ++k) r -= c.n_at(k, j) * ydot(s, c.n, k);
    return r;
}

/// Horizontal covariant derivative; appends one covariant slot. When
/// `term_scale` is given it receives the largest value among the summands.
inline TensorField h_cov(const TensorField& t, const Connection& c, double* term_scale = nullptr) {
    const int n = c.n;
    if (t.order() < 1) throw OrderError("horizontal derivative needs a jet of order >= 1");
    TensorField out{n, t.upper, t.lower + 1, {}};
    out.c.reserve(t.c.size() * static_cast<std::size_t>(n));
    double scale = 0.0;
    auto track = [&](const Jet& term) {
        scale = std::max(scale, std::abs(term.value()));
        return term;
    };
    for (std::size_t f = 0; f < t.c.size(); ++f) {
        const auto idx = t.unflatten(f);
        for (int j = 0; j < n; ++j) {
            Jet v = track(xpartial(t.c[f], j));
            for (int k = 0; k < n; ++k) v -= track(c.n_at(k, j) * ydot(t.c[f], n, k));
            for (int s = 0; s < t.rank(); ++s) {
                auto other = idx;
                for (int r = 0; r < n; ++r) {
                    other[static_cast<std::size_t>(s)] = r;
                    const Jet& tr = t.c[t.flat(other)];
                    if (s < t.upper)
                        v += track(tr * c.gamma(idx[static_cast<std::size_t>(s)], r, j));
                    else
                        v -= track(tr * c.gamma(r, idx[static_cast<std::size_t>(s)], j));
                }
            }
            out.c.push_back(std::move(v));
        }
    }
    if (term_scale) *term_scale = std::max(*term_scale, scale);
    return out;
}

/// Vertical derivative; appends one covariant slot.
inline TensorField v_cov(const TensorField& t) {
    const int n = t.n;
    if (t.order() < 1) throw OrderError("vertical derivative needs a jet of order >= 1");
    TensorField out{n, t.upper, t.lower + 1, {}};
    for (const auto& e : t.c)
        for (int j = 0; j < n; ++j) out.c.push_back(ydot(e, n, j));
    return out;
}

/// Contraction of the last slot with y.
inline TensorField contract_y(const TensorField& t, const Connection& c) {
    const int n = c.n;
    TensorField out{n, t.upper, t.lower - 1, {}};
    for (std::size_t f = 0; f < t.c.size(); f += static_cast<std::size_t>(n)) {
        Jet s = t.c[f] * c.y[0];
        for (int j = 1; j < n; ++j) s += t.c[f + static_cast<std::size_t>(j)] * c.y[static_cast<std::size_t>(j)];
        out.c.push_back(std::move(s));
    }
    return out;
}

struct MetricJets {
    JetMatrix g;     // g_ij = L_{.i.j}/2
    JetMatrix ginv;  // g^ij
    std::vector<Jet> y_low;  // y_i = L_{.i}/2
    double identity_residual = 0.0;  // max |y_i - g_ij y^j|
};

/// Fundamental tensor of L at p. Throws DegenerateMetric when g is singular
/// relative to kRankTol.
inline MetricJets metric_tensor(const Jet& L, const PointTangent& p) {
    const int n = p.dim();
    if (L.order() < 2) throw OrderError("metric tensor needs L at order >= 2");
    MetricJets m;
    m.g.n = n;
    for (int i = 0; i < n; ++i) m.y_low.push_back(0.5 * ydot(L, n, i));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.g.a.push_back(ydot(m.y_low[static_cast<std::size_t>(i)], n, j));
    const Eigen::MatrixXd g0 = m.g.values();
    if (!g0.allFinite()) throw DomainError("non-finite metric tensor");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g0);
    const auto sv = svd.singularValues();
    if (sv(0) == 0.0 || sv(n - 1) < kRankTol * sv(0))
        throw DegenerateMetric("fundamental tensor is degenerate (singular value ratio " +
                               std::to_string(sv(0) == 0.0 ? 0.0 : sv(n - 1) / sv(0)) + ")");
    m.ginv = inverse(m.g);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += g0(i, j) * p.y[static_cast<std::size_t>(j)];
        m.identity_residual = std::max(m.identity_residual, std::abs(s - m.y_low[static_cast<std::size_t>(i)].value()));
    }
    return m;
}

/// G^i = g^il (L_{x^k y^l} y^k - L_{x^l}) / 4; result order is L.order() - 2.
inline std::vector<Jet> spray_from_metric(const Jet& L, const PointTangent& p) {
    const int n = p.dim();
    const MetricJets m = metric_tensor(L, p);
    const auto y = tangent_jets(p, L.order());
    std::vector<Jet> w;
    for (int l = 0; l < n; ++l) {
        const Jet ly = ydot(L, n, l);
        Jet s = -xpartial(L, l);
        for (int k = 0; k < n; ++k) s += xpartial(ly, k) * y[static_cast<std::size_t>(k)];
        w.push_back(std::move(s));
    }
    std::vector<Jet> G;
    for (int i = 0; i < n; ++i) {
        Jet s = m.ginv(i, 0) * w[0];
        for (int l = 1; l < n; ++l) s += m.ginv(i, l) * w[static_cast<std::size_t>(l)];
        G.push_back(0.25 * s);
    }
    return G;
}

/// A spray given by a problem definition: n coefficient expressions, or a
/// metric whose induced spray is used, optionally shifted by c*sqrt(L)*y^i.
class SpraySource {
public:
    explicit SpraySource(ProblemDef def, double shift = 0.0) : def_(std::move(def)), shift_(shift) {
        if (shift_ != 0.0 && def_.kind != ProblemKind::Metric)
            throw PreconditionError("a projective shift needs a metric input");
    }

    int dim() const { return def_.dim; }
    const ProblemDef& def() const { return def_; }
    double shift() const { return shift_; }
    bool is_metric() const { return def_.kind == ProblemKind::Metric; }

    Jet metric_jet(const PointTangent& p, int order) const {
        if (!is_metric()) throw PreconditionError("problem defines a spray, not a metric");
        const auto c = p.chart();
        return lift([&](std::span<const Jet> v) { return evaluate(def_.metric(), v); }, c, order);
    }

    std::vector<Jet> spray_jets(const PointTangent& p, int order) const {
        const auto c = p.chart();
        if (order < 0 || order > kMaxJetOrder - 2) throw OrderError("spray order " + std::to_string(order) + " out of range");
        if (!is_metric()) {
            const auto vars = chart_variables(c, order);
            std::vector<Jet> G;
            for (const auto& e : def_.exprs) G.push_back(evaluate(*e, vars));
            return G;
        }
        const Jet L = metric_jet(p, order + 2);
        auto G = spray_from_metric(L, p);
        if (shift_ != 0.0) {
            const Jet F = sqrt(L.truncated(order));
            const auto y = tangent_jets(p, order);
            for (int i = 0; i < dim(); ++i) G[static_cast<std::size_t>(i)] += shift_ * F * y[static_cast<std::size_t>(i)];
        }
        return G;
    }

    /// Smallest guard value at p (plain evaluation); +inf without guards.
    double min_guard(const PointTangent& p) const {
        const auto c = p.chart();
        double m = std::numeric_limits<double>::infinity();
        for (const auto& g : def_.guards) m = std::min(m, evaluate_real(*g, c));
        return m;
    }

private:
    ProblemDef def_;
    double shift_;
};

/// R^i_k = 2 d_k G^i - y^j d_j N^i_k + 2 G^j Gamma^i_jk - N^i_j N^j_k.
inline TensorField riemann(const Connection& c) {
    const int n = c.n;
    TensorField R{n, 1, 1, {}};
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            Jet r = 2.0 * xpartial(c.G[static_cast<std::size_t>(i)], k);
            for (int j = 0; j < n; ++j) {
                r -= c.y[static_cast<std::size_t>(j)] * xpartial(c.n_at(i, k), j);
                r += 2.0 * c.G[static_cast<std::size_t>(j)] * c.gamma(i, j, k);
                r -= c.n_at(i, j) * c.n_at(j, k);
            }
            R.c.push_back(std::move(r));
        }
    return R;
}

inline Jet trace(const TensorField& t) {
    Jet s = t.c[0];
    for (int i = 1; i < t.n; ++i) s += t.c[static_cast<std::size_t>(i * t.n + i)];
    return s;
}

/// R^i_jk = (R^i_{k.j} - R^i_{j.k}) / 3.
inline TensorField curvature_3tensor(const TensorField& R) {
    const int n = R.n;
    const TensorField dR = v_cov(R);  // R^i_{k.j} at (i,k,j)
    TensorField out{n, 1, 2, {}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) out.c.push_back((dR.at({i, k, j}) - dR.at({i, j, k})) * (1.0 / 3.0));
    return out;
}

/// chi_i = 2 R^m_{i.m} + Ric_{.i}, built from the 2-tensor R^m_i.
inline std::vector<Jet> chi(const TensorField& R) {
    const int n = R.n;
    const TensorField dR = v_cov(R);
    const Jet ric = trace(R);
    std::vector<Jet> out;
    for (int i = 0; i < n; ++i) {
        Jet s = ydot(ric, n, i);
        for (int m = 0; m < n; ++m) s += 2.0 * dR.at({m, i, m});
        out.push_back(std::move(s));
    }
    return out;
}

struct HTensors {
    TensorField H4;   // H^i_jkl
    TensorField Hij;  // H_ij = H^m_ijm
    TensorField Hi;   // H_i = (n H_0i + H_i0)/(n-1)
};

inline HTensors h_tensors(const TensorField& R, const Connection& c) {
    const int n = R.n;
    const TensorField d2 = v_cov(v_cov(R));  // R^i_{l.j.k} at (i,l,j,k)
    HTensors h{{n, 1, 3, {}}, {n, 0, 2, {}}, {n, 0, 1, {}}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) h.H4.c.push_back((d2.at({i, l, j, k}) - d2.at({i, k, j, l})) * (1.0 / 3.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Jet s = h.H4.at({0, i, j, 0});
            for (int m = 1; m < n; ++m) s += h.H4.at({m, i, j, m});
            h.Hij.c.push_back(std::move(s));
        }
    for (int i = 0; i < n; ++i) {
        Jet h0i = c.y[0] * h.Hij.at({0, i});
        Jet hi0 = h.Hij.at({i, 0}) * c.y[0];
        for (int j = 1; j < n; ++j) {
            h0i += c.y[static_cast<std::size_t>(j)] * h.Hij.at({j, i});
            hi0 += h.Hij.at({i, j}) * c.y[static_cast<std::size_t>(j)];
        }
        h.Hi.c.push_back((static_cast<double>(n) * h0i + hi0) * (1.0 / (n - 1)));
    }
    return h;
}

/// Curvature jets of a spray at one point.
struct CurvatureJets {
    Connection conn;
    TensorField R;  // R^i_k
    Jet Ric;
};

inline CurvatureJets curvature(const SpraySource& s, const PointTangent& p, int order = kDefaultOrder) {
    if (p.dim() != s.dim()) throw DimensionError("point dimension does not match the spray");
    CurvatureJets cj{berwald(s.spray_jets(p, order), p), {}, {}};
    for (const auto& g : cj.conn.G)
        if (!g.all_finite()) throw DomainError("non-finite spray jet");
    cj.R = riemann(cj.conn);
    cj.Ric = trace(cj.R);
    return cj;
}

/// Values of all tensors at one point plus the identities that hold for
/// every spray.
struct CurvatureBundle {
    int n = 0;
    PointTangent p;
    std::vector<double> G, N, Gamma, B, R;
    double Ric = 0.0;
    std::vector<double> chi, H4, Hij, Hi;
    double ry_residual = 0.0;        // max_i |R^i_k y^k|
    double bianchi_residual = 0.0;   // max_k |R^m_{k;m} + R^m_{km;0} - R^m_{m;k}|
    double bianchi_scale = 0.0;
    double curvature_scale = 0.0;    // magnitude of the terms that build R^i_k
};

inline double connection_scale(const Connection& c) {
    double dg = 0.0;
    for (const auto& g : c.G)
        for (int k = 0; k < c.n; ++k) dg = std::max(dg, std::abs(xpartial(g, k).value()));
    const double nmax = max_abs_value(c.N);
    return dg + nmax * nmax + max_abs_value(c.G) * max_abs_value(c.Gamma) + max_abs(c.p.y) * dg;
}

inline CurvatureBundle bundle(const CurvatureJets& cj) {
    const auto& c = cj.conn;
    const int n = c.n;
    CurvatureBundle b;
    b.n = n;
    b.p = c.p;
    b.G = values(c.G);
    b.N = values(c.N);
    b.Gamma = values(c.Gamma);
    b.B = values(c.B);
    b.R = cj.R.values();
    b.Ric = cj.Ric.value();
    b.chi = values(chi(cj.R));
    b.curvature_scale = connection_scale(c);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += b.R[static_cast<std::size_t>(i * n + k)] * c.p.y[static_cast<std::size_t>(k)];
        b.ry_residual = std::max(b.ry_residual, std::abs(s));
    }
    if (cj.R.order() >= 2) {
        const HTensors h = h_tensors(cj.R, c);
        b.H4 = h.H4.values();
        b.Hij = h.Hij.values();
        b.Hi = h.Hi.values();

        const TensorField dR = h_cov(cj.R, c);                                    // R^m_{k;j}
        const TensorField d3 = contract_y(h_cov(curvature_3tensor(cj.R), c), c);  // R^m_{kl;0}
        for (int k = 0; k < n; ++k) {
            double s = 0.0, scale = 0.0;
            for (int m = 0; m < n; ++m) {
                const double t1 = dR.at({m, k, m}).value();
                const double t2 = d3.at({m, k, m}).value();
                const double t3 = dR.at({m, m, k}).value();
                s += t1 + t2 - t3;
                scale = std::max({scale, std::abs(t1), std::abs(t2), std::abs(t3)});
            }
            b.bianchi_residual = std::max(b.bianchi_residual, std::abs(s));
            b.bianchi_scale = std::max(b.bianchi_scale, scale);
        }
    }
    return b;
}

}  // namespace spraylab
