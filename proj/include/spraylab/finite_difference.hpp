#pragma once

// Central finite differences: the independent oracle for every jet-computed
// derivative. Deliberately plain (no extrapolation) and independent of jet.hpp.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "spraylab/errors.hpp"

namespace spraylab {

inline constexpr double kDefaultFdStep = 1e-3;

using RealFunction = std::function<double(std::span<const double>)>;

namespace detail {

struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;  // already divided by the h-independent denominator
};

/// Central stencil for the k-th derivative with O(h^accuracy) error (accuracy 2 or 4).
inline const Stencil& central_stencil(int k, int accuracy = 2) {
    static const Stencil s1{{-1, 1}, {-0.5, 0.5}};
    static const Stencil s2{{-1, 0, 1}, {1.0, -2.0, 1.0}};
    static const Stencil s3{{-2, -1, 1, 2}, {-0.5, 1.0, -1.0, 0.5}};
    static const Stencil s4{{-2, -1, 0, 1, 2}, {1.0, -4.0, 6.0, -4.0, 1.0}};
    static const Stencil q1{{-2, -1, 1, 2}, {1.0 / 12, -2.0 / 3, 2.0 / 3, -1.0 / 12}};
    static const Stencil q2{{-2, -1, 0, 1, 2}, {-1.0 / 12, 4.0 / 3, -2.5, 4.0 / 3, -1.0 / 12}};
    static const Stencil q3{{-3, -2, -1, 1, 2, 3}, {0.125, -1.0, 1.625, -1.625, 1.0, -0.125}};
    static const Stencil q4{{-3, -2, -1, 0, 1, 2, 3}, {-1.0 / 6, 2.0, -6.5, 28.0 / 3, -6.5, 2.0, -1.0 / 6}};
    if (accuracy == 4) {
        switch (k) {
            case 1: return q1;
            case 2: return q2;
            case 3: return q3;
            case 4: return q4;
            default: throw std::invalid_argument("no stencil for this multiplicity");
        }
    }
    if (accuracy != 2) throw std::invalid_argument("stencil accuracy must be 2 or 4");
    switch (k) {
        case 1: return s1;
        case 2: return s2;
        case 3: return s3;
        case 4: return s4;
        default: throw std::invalid_argument("no stencil for this multiplicity");
    }
}

}  // namespace detail

/// Central-difference estimate of d^alpha f(p), |alpha| <= 4, accumulated in
/// `Real`. The error is O(h^accuracy) per differentiated variable. Throws
/// DomainError when a stencil point is outside the domain of f (non-finite value).
template <class Real, class F>
Real basic_fd_partial(F&& f, std::span<const Real> p, std::span<const int> alpha, Real h, int accuracy = 2) {
    if (alpha.size() != p.size()) throw std::invalid_argument("multi-index length does not match point");
    if (std::accumulate(alpha.begin(), alpha.end(), 0) > 4)
        throw std::invalid_argument("fd_partial supports total order <= 4");

    std::vector<std::size_t> vars;
    for (std::size_t v = 0; v < alpha.size(); ++v)
        if (alpha[v] > 0) vars.push_back(v);

    std::vector<Real> q(p.begin(), p.end());
    Real scale = 1;
    for (std::size_t v : vars)
        for (int k = 0; k < alpha[v]; ++k) scale *= h;

    // Tensor-product stencil over the differentiated variables.
    Real sum = 0;
    std::function<void(std::size_t, Real)> walk = [&](std::size_t level, Real weight) {
        if (level == vars.size()) {
            const Real value = f(std::span<const Real>(q));
            if (!std::isfinite(value)) throw DomainError("finite-difference stencil left the domain");
            sum += weight * value;
            return;
        }
        const std::size_t v = vars[level];
        const auto& st = detail::central_stencil(alpha[v], accuracy);
        for (std::size_t s = 0; s < st.offsets.size(); ++s) {
            q[v] = p[v] + st.offsets[s] * h;
            walk(level + 1, weight * static_cast<Real>(st.weights[s]));
        }
        q[v] = p[v];
    };
    walk(0, Real(1));
    return sum / scale;
}

inline double fd_partial(const RealFunction& f, std::span<const double> p, std::span<const int> alpha,
                         double h = kDefaultFdStep) {
    return basic_fd_partial<double>(f, p, alpha, h);
}

}  // namespace spraylab
