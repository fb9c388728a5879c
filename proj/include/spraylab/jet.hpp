#pragma once

/**
 * @file jet.hpp
 * @brief Truncated multivariate Taylor arithmetic.
 *
 * A Jet holds every Taylor coefficient f_alpha = d^alpha f / alpha! of a scalar
 * at a fixed center, for all multi-indices |alpha| <= K. Coefficients are
 * stored densely in graded-lex order, so the coefficients of a lower order
 * form a prefix of the higher-order layout. That makes truncation a resize and
 * lets jets of different orders interoperate: a binary operation produces a
 * jet of the smaller order.
 *
 * Differentiating a jet of order K yields an exact jet of order K-1 of the
 * derivative, which is how all tensor derivatives downstream are taken.
 *
 * @code
 * auto space = spraylab::JetSpace::get(2, 3);
 * auto x = spraylab::Jet::variable(space, 0, 0.5);
 * auto y = spraylab::Jet::variable(space, 1, 2.0);
 * auto f = exp(x) * y;
 * double fxy = f.partial({1, 1});   // exp(0.5)
 * @endcode
 */

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spraylab/errors.hpp"

namespace spraylab {

inline constexpr int kMaxJetVars = 8;
inline constexpr int kMaxJetOrder = 10;

/// Exponent tuple over the jet variables. Total order is the sum.
using MultiIndex = std::vector<int>;

inline int total_order(const MultiIndex& alpha) {
    return std::accumulate(alpha.begin(), alpha.end(), 0);
}

inline double factorial(int k) {
    double r = 1.0;
    for (int i = 2; i <= k; ++i) r *= i;
    return r;
}

/// alpha! = prod alpha_v!
inline double multi_factorial(const MultiIndex& alpha) {
    double r = 1.0;
    for (int a : alpha) r *= factorial(a);
    return r;
}

/// Shared index tables for all jets with the same variable count and order.
class JetSpace {
public:
    struct ProductTerm {
        std::uint32_t a;
        std::uint32_t b;
        std::uint32_t out;
    };

    struct DerivativeTerm {
        std::uint32_t source;
        double factor;
    };

    /// Returns the cached space; thread-safe.
    static std::shared_ptr<const JetSpace> get(int nvars, int order) {
        if (nvars < 1 || nvars > kMaxJetVars)
            throw std::invalid_argument("jet variable count out of range: " + std::to_string(nvars));
        if (order < 0 || order > kMaxJetOrder)
            throw OrderError("jet order " + std::to_string(order) + " outside [0, " + std::to_string(kMaxJetOrder) + "]");
        static std::mutex mutex;
        static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
        std::lock_guard lock(mutex);
        auto& slot = cache[{nvars, order}];
        if (!slot) slot = std::shared_ptr<const JetSpace>(new JetSpace(nvars, order));
        return slot;
    }

    int nvars() const noexcept { return nvars_; }
    int order() const noexcept { return order_; }
    std::size_t size() const noexcept { return indices_.size(); }

    /// Number of coefficients with total order <= k (a prefix of the layout).
    std::size_t prefix(int k) const noexcept {
        if (k < 0) return 0;
        return prefix_[static_cast<std::size_t>(std::min(k, order_))];
    }

    const MultiIndex& index(std::size_t pos) const { return indices_.at(pos); }

    std::size_t position(const MultiIndex& alpha) const {
        if (static_cast<int>(alpha.size()) != nvars_)
            throw std::invalid_argument("multi-index has wrong length");
        if (total_order(alpha) > order_)
            throw OrderError("multi-index order " + std::to_string(total_order(alpha)) + " exceeds jet order " +
                             std::to_string(order_));
        return lookup_.at(encode(alpha));
    }

    /// Product terms whose output position lies below prefix(k), sorted by output.
    std::span<const ProductTerm> product_terms(int k) const {
        return {products_.data(), product_count_[static_cast<std::size_t>(std::clamp(k, 0, order_))]};
    }

    /// For the derivative along `var`: entry t gives the source coefficient and
    /// factor for output position t < prefix(order - 1).
    std::span<const DerivativeTerm> derivative_terms(int var) const {
        return derivatives_.at(static_cast<std::size_t>(var));
    }

private:
    JetSpace(int nvars, int order) : nvars_(nvars), order_(order) {
        MultiIndex current(static_cast<std::size_t>(nvars), 0);
        for (int k = 0; k <= order; ++k) {
            enumerate(k, 0, current);
            prefix_.push_back(indices_.size());
        }
        for (std::size_t i = 0; i < indices_.size(); ++i) lookup_[encode(indices_[i])] = i;

        for (std::size_t a = 0; a < indices_.size(); ++a) {
            const int oa = total_order(indices_[a]);
            for (std::size_t b = 0; b < prefix(order - oa); ++b) {
                MultiIndex sum = indices_[a];
                for (int v = 0; v < nvars; ++v) sum[v] += indices_[b][v];
                products_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                     static_cast<std::uint32_t>(lookup_.at(encode(sum)))});
            }
        }
        std::stable_sort(products_.begin(), products_.end(),
                         [](const ProductTerm& l, const ProductTerm& r) { return l.out < r.out; });
        for (int k = 0; k <= order; ++k) {
            const auto limit = prefix(k);
            product_count_.push_back(static_cast<std::size_t>(
                std::partition_point(products_.begin(), products_.end(),
                                     [limit](const ProductTerm& t) { return t.out < limit; }) -
                products_.begin()));
        }

        derivatives_.resize(static_cast<std::size_t>(nvars));
        for (int v = 0; v < nvars; ++v) {
            for (std::size_t t = 0; t < prefix(order - 1); ++t) {
                MultiIndex up = indices_[t];
                up[v] += 1;
                derivatives_[v].push_back({static_cast<std::uint32_t>(lookup_.at(encode(up))),
                                           static_cast<double>(up[v])});
            }
        }
    }

    // Graded-lex: within one total order, earlier variables get larger exponents first.
    void enumerate(int remaining, int var, MultiIndex& current) {
        if (var == nvars_ - 1) {
            current[var] = remaining;
            indices_.push_back(current);
            current[var] = 0;
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[var] = e;
            enumerate(remaining - e, var + 1, current);
        }
        current[var] = 0;
    }

    static std::uint64_t encode(const MultiIndex& alpha) {
        std::uint64_t key = 0;
        for (int a : alpha) key = (key << 8) | static_cast<std::uint64_t>(a);
        return key;
    }

    int nvars_;
    int order_;
    std::vector<MultiIndex> indices_;
    std::vector<std::size_t> prefix_;
    std::unordered_map<std::uint64_t, std::size_t> lookup_;
    std::vector<ProductTerm> products_;
    std::vector<std::size_t> product_count_;
    std::vector<std::vector<DerivativeTerm>> derivatives_;
};

using JetSpacePtr = std::shared_ptr<const JetSpace>;

class Jet {
public:
    Jet() = default;

    static Jet constant(JetSpacePtr space, double value) {
        Jet j(std::move(space));
        j.c_[0] = value;
        return j;
    }

    /// The coordinate function of variable `var`, centered at `center`.
    static Jet variable(JetSpacePtr space, int var, double center) {
        if (var < 0 || var >= space->nvars()) throw std::invalid_argument("jet variable index out of range");
        Jet j(std::move(space));
        j.c_[0] = center;
        if (j.order() >= 1) {
            MultiIndex e(static_cast<std::size_t>(j.nvars()), 0);
            e[static_cast<std::size_t>(var)] = 1;
            j.c_[j.space_->position(e)] = 1.0;
        }
        return j;
    }

    static Jet from_coefficients(JetSpacePtr space, std::vector<double> coeffs) {
        if (coeffs.size() != space->size()) throw std::invalid_argument("coefficient count does not match jet space");
        Jet j;
        j.space_ = std::move(space);
        j.c_ = std::move(coeffs);
        return j;
    }

    bool valid() const noexcept { return static_cast<bool>(space_); }
    const JetSpacePtr& space() const noexcept { return space_; }
    int order() const noexcept { return space_->order(); }
    int nvars() const noexcept { return space_->nvars(); }
    double value() const noexcept { return c_[0]; }
    std::span<const double> coefficients() const noexcept { return c_; }

    double coeff(const MultiIndex& alpha) const { return c_[space_->position(alpha)]; }

    /// d^alpha f at the center.
    double partial(const MultiIndex& alpha) const { return coeff(alpha) * multi_factorial(alpha); }

    Jet truncated(int k) const {
        if (k > order()) throw OrderError("cannot raise jet order by truncation");
        if (k == order()) return *this;
        Jet r(JetSpace::get(nvars(), k));
        std::copy_n(c_.begin(), r.c_.size(), r.c_.begin());
        return r;
    }

    /// Exact jet of d f / d var, one order lower.
    Jet derivative(int var) const {
        if (order() < 1) throw OrderError("jet order exhausted: cannot differentiate an order-0 jet");
        Jet r(JetSpace::get(nvars(), order() - 1));
        const auto terms = space_->derivative_terms(var);
        for (std::size_t t = 0; t < r.c_.size(); ++t) r.c_[t] = terms[t].factor * c_[terms[t].source];
        return r;
    }

    bool all_finite() const noexcept {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
    }

    Jet operator-() const {
        Jet r = *this;
        for (double& v : r.c_) v = -v;
        return r;
    }

    Jet& operator+=(double s) {
        c_[0] += s;
        return *this;
    }
    Jet& operator-=(double s) {
        c_[0] -= s;
        return *this;
    }
    Jet& operator*=(double s) {
        for (double& v : c_) v *= s;
        return *this;
    }
    Jet& operator/=(double s) {
        if (s == 0.0) throw DomainError("jet division by zero scalar");
        for (double& v : c_) v /= s;
        return *this;
    }

    Jet& operator+=(const Jet& o) {
        *this = combine(*this, o, 1.0);
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        *this = combine(*this, o, -1.0);
        return *this;
    }
    Jet& operator*=(const Jet& o) {
        *this = multiply(*this, o);
        return *this;
    }

    friend Jet operator+(Jet a, double s) { return a += s; }
    friend Jet operator+(double s, Jet a) { return a += s; }
    friend Jet operator-(Jet a, double s) { return a -= s; }
    friend Jet operator-(double s, const Jet& a) { return (-a) += s; }
    friend Jet operator*(Jet a, double s) { return a *= s; }
    friend Jet operator*(double s, Jet a) { return a *= s; }
    friend Jet operator/(Jet a, double s) { return a /= s; }

    friend Jet operator+(const Jet& a, const Jet& b) { return combine(a, b, 1.0); }
    friend Jet operator-(const Jet& a, const Jet& b) { return combine(a, b, -1.0); }
    friend Jet operator*(const Jet& a, const Jet& b) { return multiply(a, b); }
    friend Jet operator/(const Jet& a, const Jet& b);
    friend Jet operator/(double s, const Jet& b);

    /// f(u) = sum_k taylor[k] (u - u0)^k, where taylor holds f^(k)(u0)/k!.
    friend Jet compose(const Jet& u, std::span<const double> taylor) {
        Jet h = u;
        h.c_[0] = 0.0;
        const int k_max = std::min<int>(u.order(), static_cast<int>(taylor.size()) - 1);
        Jet r = Jet::constant(u.space_, taylor[static_cast<std::size_t>(k_max)]);
        for (int k = k_max - 1; k >= 0; --k) {
            r = multiply(r, h);
            r.c_[0] += taylor[static_cast<std::size_t>(k)];
        }
        return r;
    }

private:
    explicit Jet(JetSpacePtr space) : space_(std::move(space)), c_(space_->size(), 0.0) {}

    static const JetSpacePtr& lower(const Jet& a, const Jet& b) {
        if (!a.space_ || !b.space_) throw std::invalid_argument("operation on an empty jet");
        if (a.nvars() != b.nvars()) throw std::invalid_argument("jets over different variable sets");
        return a.order() <= b.order() ? a.space_ : b.space_;
    }

    static Jet combine(const Jet& a, const Jet& b, double sign) {
        Jet r(lower(a, b));
        for (std::size_t t = 0; t < r.c_.size(); ++t) r.c_[t] = a.c_[t] + sign * b.c_[t];
        return r;
    }

    static Jet multiply(const Jet& a, const Jet& b) {
        Jet r(lower(a, b));
        // Tables of the bigger space cover the smaller prefix as well.
        const auto& tables = a.order() >= b.order() ? a.space_ : b.space_;
        for (const auto& t : tables->product_terms(r.order())) r.c_[t.out] += a.c_[t.a] * b.c_[t.b];
        return r;
    }

    JetSpacePtr space_;
    std::vector<double> c_;
};

namespace detail {

inline constexpr double kDomainEps = 1e-12;

// Taylor coefficients of v^a about v0 > 0 (or any v0 != 0 for integer a).
inline std::vector<double> power_series(double v0, double a, int order) {
    std::vector<double> t(static_cast<std::size_t>(order) + 1);
    double binom = 1.0;
    for (int k = 0; k <= order; ++k) {
        t[static_cast<std::size_t>(k)] = binom * std::pow(v0, a - k);
        binom *= (a - k) / (k + 1);
    }
    return t;
}

}  // namespace detail

inline Jet reciprocal(const Jet& v) {
    if (std::abs(v.value()) <= detail::kDomainEps || !std::isfinite(v.value()))
        throw DomainError("division by a jet whose value part is zero");
    return compose(v, detail::power_series(v.value(), -1.0, v.order()));
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

inline Jet sqrt(const Jet& u) {
    if (!(u.value() > 0.0)) throw DomainError("sqrt of a jet with non-positive value part");
    return compose(u, detail::power_series(u.value(), 0.5, u.order()));
}

inline Jet exp(const Jet& u) {
    std::vector<double> t(static_cast<std::size_t>(u.order()) + 1);
    const double e = std::exp(u.value());
    for (int k = 0; k <= u.order(); ++k) t[static_cast<std::size_t>(k)] = e / factorial(k);
    return compose(u, t);
}

inline Jet log(const Jet& u) {
    const double u0 = u.value();
    if (!(u0 > 0.0)) throw DomainError("ln of a jet with non-positive value part");
    std::vector<double> t(static_cast<std::size_t>(u.order()) + 1);
    t[0] = std::log(u0);
    for (int k = 1; k <= u.order(); ++k) t[static_cast<std::size_t>(k)] = ((k % 2) ? 1.0 : -1.0) / (k * std::pow(u0, k));
    return compose(u, t);
}

/// sign(u0) * u; undefined within 1e-12 of zero.
inline Jet abs(const Jet& u) {
    if (std::abs(u.value()) <= detail::kDomainEps) throw DomainError("abs of a jet at (numerical) zero");
    return u.value() > 0.0 ? u : -u;
}

inline Jet sin(const Jet& u) {
    std::vector<double> t(static_cast<std::size_t>(u.order()) + 1);
    const double s = std::sin(u.value()), c = std::cos(u.value());
    const std::array<double, 4> cycle{s, c, -s, -c};
    for (int k = 0; k <= u.order(); ++k) t[static_cast<std::size_t>(k)] = cycle[static_cast<std::size_t>(k % 4)] / factorial(k);
    return compose(u, t);
}

inline Jet cos(const Jet& u) {
    std::vector<double> t(static_cast<std::size_t>(u.order()) + 1);
    const double s = std::sin(u.value()), c = std::cos(u.value());
    const std::array<double, 4> cycle{c, -s, -c, s};
    for (int k = 0; k <= u.order(); ++k) t[static_cast<std::size_t>(k)] = cycle[static_cast<std::size_t>(k % 4)] / factorial(k);
    return compose(u, t);
}

inline Jet atan(const Jet& u) {
    // atan' = 1/(1+u^2); expand that univariately and integrate term by term.
    const double u0 = u.value();
    const int order = u.order();
    const double q0 = 1.0 + u0 * u0, q1 = 2.0 * u0;
    std::vector<double> inv(static_cast<std::size_t>(order) + 1, 0.0);
    for (int j = 0; j <= order; ++j) {
        double acc = (j == 0) ? 1.0 : 0.0;
        if (j >= 1) acc -= q1 * inv[static_cast<std::size_t>(j - 1)];
        if (j >= 2) acc -= inv[static_cast<std::size_t>(j - 2)];
        inv[static_cast<std::size_t>(j)] = acc / q0;
    }
    std::vector<double> t(static_cast<std::size_t>(order) + 1);
    t[0] = std::atan(u0);
    for (int k = 1; k <= order; ++k) t[static_cast<std::size_t>(k)] = inv[static_cast<std::size_t>(k - 1)] / k;
    return compose(u, t);
}

inline Jet pow(const Jet& u, int e) {
    if (e < 0) return pow(reciprocal(u), -e);
    Jet result = Jet::constant(u.space(), 1.0);
    Jet base = u;
    while (e > 0) {
        if (e & 1) result *= base;
        e >>= 1;
        if (e) base *= base;
    }
    return result;
}

/// u^a for real a, via the binomial series; needs u0 > 0 unless a is an integer.
inline Jet pow(const Jet& u, double a) {
    if (a == std::round(a) && std::abs(a) < 1e9) return pow(u, static_cast<int>(a));
    if (!(u.value() > 0.0)) throw DomainError("non-integer power of a jet with non-positive value part");
    return compose(u, detail::power_series(u.value(), a, u.order()));
}

/// Jets of all 2n chart variables (x^1..x^n, y^1..y^n) at `center`.
inline std::vector<Jet> chart_variables(std::span<const double> center, int order) {
    auto space = JetSpace::get(static_cast<int>(center.size()), order);
    std::vector<Jet> vars;
    vars.reserve(center.size());
    for (std::size_t v = 0; v < center.size(); ++v) vars.push_back(Jet::variable(space, static_cast<int>(v), center[v]));
    return vars;
}

/// Lifts a jet-polymorphic callable `f(span<const Jet>) -> Jet` at `center`.
template <class F>
Jet lift(F&& f, std::span<const double> center, int order) {
    if (order < 0 || order > kMaxJetOrder)
        throw OrderError("lift order " + std::to_string(order) + " outside [0, " + std::to_string(kMaxJetOrder) + "]");
    const auto vars = chart_variables(center, order);
    return f(std::span<const Jet>(vars));
}

/// d^alpha f(center), through a jet of order |alpha|.
template <class F>
double partial(F&& f, std::span<const double> center, const MultiIndex& alpha) {
    return lift(std::forward<F>(f), center, total_order(alpha)).partial(alpha);
}

enum class VariableGroup { X, Y };

/// |sum_v v * df/dv - degree * f| over the x- or y-half of the 2n variables.
template <class F>
double euler_check(F&& f, std::span<const double> center, VariableGroup group, int degree) {
    const Jet j = lift(std::forward<F>(f), center, 1);
    const std::size_t n = center.size() / 2;
    const std::size_t first = group == VariableGroup::X ? 0 : n;
    double s = -degree * j.value();
    for (std::size_t v = first; v < first + n; ++v) {
        MultiIndex e(center.size(), 0);
        e[v] = 1;
        s += center[v] * j.coeff(e);
    }
    return std::abs(s);
}

/// Square jet matrix (row-major), used for g_ij and its inverse.
struct JetMatrix {
    int n = 0;
    std::vector<Jet> a;

    Jet& operator()(int i, int j) { return a[static_cast<std::size_t>(i * n + j)]; }
    const Jet& operator()(int i, int j) const { return a[static_cast<std::size_t>(i * n + j)]; }

    Eigen::MatrixXd values() const {
        Eigen::MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = (*this)(i, j).value();
        return m;
    }
};

inline JetMatrix multiply(const JetMatrix& l, const JetMatrix& r) {
    JetMatrix out{l.n, {}};
    out.a.reserve(l.a.size());
    for (int i = 0; i < l.n; ++i)
        for (int j = 0; j < l.n; ++j) {
            Jet s = l(i, 0) * r(0, j);
            for (int k = 1; k < l.n; ++k) s += l(i, k) * r(k, j);
            out.a.push_back(std::move(s));
        }
    return out;
}

/// Inverse of a jet matrix. The value part is inverted by partial-pivot LU;
/// higher orders follow from the Neumann series of M = M0 (I + M0^-1 E),
/// which is exact because E (the non-constant part) is nilpotent.
inline JetMatrix inverse(const JetMatrix& m) {
    const Eigen::MatrixXd m0 = m.values();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m0);
    const double det = lu.determinant();
    if (!std::isfinite(det) || std::abs(det) <= detail::kDomainEps * std::pow(std::max(1.0, m0.cwiseAbs().maxCoeff()), m.n))
        throw DomainError("singular jet matrix");
    const Eigen::MatrixXd inv0 = lu.inverse();
    int order = kMaxJetOrder;
    for (const auto& e : m.a) order = std::min(order, e.order());
    const auto space = JetSpace::get(m.a.front().nvars(), order);

    JetMatrix base{m.n, {}};
    JetMatrix nil{m.n, {}};
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) {
            base.a.push_back(Jet::constant(space, inv0(i, j)));
            Jet e = m(i, j).truncated(space->order());
            e -= m0(i, j);
            nil.a.push_back(std::move(e));
        }
    // step = -M0^-1 E
    JetMatrix step = multiply(base, nil);
    for (auto& e : step.a) e = -e;
    JetMatrix result = base;
    JetMatrix term = base;
    for (int k = 1; k <= space->order(); ++k) {
        term = multiply(step, term);
        for (std::size_t t = 0; t < result.a.size(); ++t) result.a[t] += term.a[t];
    }
    return result;
}

}  // namespace spraylab
