#pragma once

// Seeded sampling of point-tangent pairs. Points come in groups: one base
// point x with 2n tangent vectors, so that y-dependence can be tested at fixed
// x. Candidates are drawn sequentially and evaluated in parallel; the result
// depends only on the seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "spraylab/errors.hpp"
#include "spraylab/geometry.hpp"

namespace spraylab {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SampleBox {
    std::vector<Interval> x;
    std::vector<Interval> y;
    double min_y_norm = 0.1;
};

struct RunConfig {
    int points = 64;
    std::uint64_t seed = 7;
    int order = kDefaultOrder;
    Tolerances tol;
    double fd_step = 1e-3;
    std::map<std::string, Interval> box;  // per-variable overrides, keys "x1".."yn"
    int max_attempt_factor = 10;
};

inline SampleBox resolve_box(const RunConfig& cfg, int n) {
    SampleBox b;
    b.x.assign(static_cast<std::size_t>(n), Interval{-0.8, 0.8});
    b.y.assign(static_cast<std::size_t>(n), Interval{-1.0, 1.0});
    for (const auto& [name, iv] : cfg.box) {
        if (name.size() < 2 || (name[0] != 'x' && name[0] != 'y'))
            throw ParamError("box variable must be x<k> or y<k>, got '" + name + "'");
        const int k = std::stoi(name.substr(1));
        if (k < 1 || k > n) throw DimensionError("box variable " + name + " out of range");
        if (!(iv.lo < iv.hi)) throw ParamError("empty box interval for " + name);
        (name[0] == 'x' ? b.x : b.y)[static_cast<std::size_t>(k - 1)] = iv;
    }
    return b;
}

/// Number of base points so that groups of 2n tangent vectors cover `points`.
inline int base_point_count(int points, int n) { return (points + 2 * n - 1) / (2 * n); }

class Sampler {
public:
    Sampler(SampleBox box, std::uint64_t seed) : box_(std::move(box)), rng_(seed) {}

    double uniform(const Interval& iv) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return iv.lo + (iv.hi - iv.lo) * u;
    }

    std::vector<double> draw_x() {
        std::vector<double> x;
        for (const auto& iv : box_.x) x.push_back(uniform(iv));
        return x;
    }

    /// Tangent vector with Euclidean norm at least min_y_norm.
    std::vector<double> draw_y() {
        for (;;) {
            std::vector<double> y;
            double s = 0.0;
            for (const auto& iv : box_.y) {
                y.push_back(uniform(iv));
                s += y.back() * y.back();
            }
            if (std::sqrt(s) >= box_.min_y_norm) return y;
        }
    }

private:
    SampleBox box_;
    std::mt19937_64 rng_;
};

/// Runs body(i) for i in [0, count) on a small worker pool.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    const std::size_t workers =
        std::min<std::size_t>(count, std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class T>
struct SampleGroup {
    std::vector<double> x;
    std::vector<PointTangent> points;
    std::vector<T> results;
};

template <class T>
struct GroupedSamples {
    std::vector<SampleGroup<T>> groups;
    int rejected = 0;  // rejected point-tangent candidates
    int attempts = 0;  // drawn groups
};

/// True when p passes every guard of the spray (threshold kGuardThreshold).
inline bool guards_pass(const SpraySource& s, const PointTangent& p) {
    try {
        return s.min_guard(p) > kGuardThreshold;
    } catch (const DomainError&) {
        return false;
    }
}

/// Independent stream for candidate group `index`.
inline std::uint64_t group_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Draws groups until `groups_needed` are accepted. Each candidate group has
/// its own random stream: a base point x, then tangent vectors drawn until 2n
/// pass the guards and `eval` (up to max_attempt_factor * 2n draws). DomainError,
/// DegenerateMetric and NegativeMetric count as rejections.
template <class Eval>
auto sample_groups(const SpraySource& s, const RunConfig& cfg, int groups_needed, Eval&& eval)
    -> GroupedSamples<decltype(eval(std::declval<const PointTangent&>()))> {
    using T = decltype(eval(std::declval<const PointTangent&>()));
    const int n = s.dim();
    const int per_group = 2 * n;
    const SampleBox box = resolve_box(cfg, n);
    GroupedSamples<T> out;
    const int max_groups = std::max(1, cfg.max_attempt_factor * groups_needed);
    const int max_draws = std::max(1, cfg.max_attempt_factor * per_group);

    struct Candidate {
        SampleGroup<T> group;
        int rejected = 0;
        bool ok = false;
    };
    auto run = [&](std::uint64_t index) {
        Candidate c;
        Sampler sampler(box, group_seed(cfg.seed, index));
        c.group.x = sampler.draw_x();
        for (int draw = 0; draw < max_draws && static_cast<int>(c.group.points.size()) < per_group; ++draw) {
            PointTangent p{c.group.x, sampler.draw_y()};
            if (!guards_pass(s, p)) {
                ++c.rejected;
                continue;
            }
            try {
                c.group.results.push_back(eval(p));
                c.group.points.push_back(std::move(p));
            } catch (const DomainError&) {
                ++c.rejected;
            } catch (const DegenerateMetric&) {
                ++c.rejected;
            } catch (const NegativeMetric&) {
                ++c.rejected;
            }
        }
        c.ok = static_cast<int>(c.group.points.size()) == per_group;
        return c;
    };

    while (static_cast<int>(out.groups.size()) < groups_needed) {
        const int remaining = groups_needed - static_cast<int>(out.groups.size());
        const int batch = std::min(max_groups - out.attempts, remaining);
        if (batch <= 0)
            throw SamplingExhausted("accepted " + std::to_string(out.groups.size()) + " of " + std::to_string(groups_needed) +
                                    " base points after " + std::to_string(out.attempts) + " attempts");
        std::vector<Candidate> cand(static_cast<std::size_t>(batch));
        const auto first = static_cast<std::uint64_t>(out.attempts);
        parallel_for(cand.size(), [&](std::size_t i) { cand[i] = run(first + i); });
        for (auto& c : cand) {
            ++out.attempts;
            out.rejected += c.rejected;
            if (c.ok) {
                out.groups.push_back(std::move(c.group));
            } else {
                out.rejected += static_cast<int>(c.group.points.size());
            }
        }
    }
    return out;
}

}  // namespace spraylab
