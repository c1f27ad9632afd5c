#pragma once

#include <algorithm>
#include <limits>
#include <random>
#include <vector>

#include "dramcal/bvls.hpp"

namespace testing {

struct LsqInstance {
    dramcal::Matrix a;
    std::vector<double> y;
    std::vector<dramcal::Interval> bounds;
};

// Gaussian A, a target drawn partly outside the box so that some bounds bind,
// and finite boxes of random width (optionally one-sided).
inline LsqInstance random_instance(std::size_t m, std::size_t n, std::mt19937_64& rng, bool allow_infinite = true) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LsqInstance p{dramcal::Matrix(m, n), std::vector<double>(m), std::vector<dramcal::Interval>(n)};
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) p.a(r, c) = g(rng);
    std::vector<double> target(n);
    for (auto& t : target) t = 2.0 * g(rng);
    for (std::size_t r = 0; r < m; ++r) {
        double s = 0.1 * g(rng);
        for (std::size_t c = 0; c < n; ++c) s += p.a(r, c) * target[c];
        p.y[r] = s;
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (auto& b : p.bounds) {
        b.lower = -1.5 + 2.0 * u(rng);
        b.upper = b.lower + 0.1 + 2.0 * u(rng);
        if (allow_infinite) {
            const double roll = u(rng);
            if (roll < 0.1) b.lower = -inf;
            else if (roll < 0.2) b.upper = inf;
        }
    }
    return p;
}

inline double objective(const dramcal::Matrix& a, const std::vector<double>& y, const std::vector<double>& x) {
    const auto ax = a.multiply(x);
    double s = 0;
    for (std::size_t r = 0; r < y.size(); ++r) s += (ax[r] - y[r]) * (ax[r] - y[r]);
    return 0.5 * s;
}

// Minimum of the objective over a steps x steps grid spanning a finite 2-D box.
inline double grid_min_2d(const LsqInstance& p, int steps = 2000) {
    double best = std::numeric_limits<double>::infinity();
    const auto& b0 = p.bounds[0];
    const auto& b1 = p.bounds[1];
    std::vector<double> x(2);
    for (int i = 0; i < steps; ++i) {
        x[0] = b0.lower + (b0.upper - b0.lower) * i / (steps - 1);
        for (int j = 0; j < steps; ++j) {
            x[1] = b1.lower + (b1.upper - b1.lower) * j / (steps - 1);
            double s = 0;
            for (std::size_t r = 0; r < p.y.size(); ++r) {
                const double d = p.a(r, 0) * x[0] + p.a(r, 1) * x[1] - p.y[r];
                s += d * d;
            }
            best = std::min(best, 0.5 * s);
        }
    }
    return best;
}

// Exact optimum of a 2-variable box-constrained problem: the minimiser is the
// interior stationary point, a clamped 1-D minimiser on one of the four edges,
// or a corner. Every candidate is feasible, so the smallest objective wins.
inline double exact_min_2d(const LsqInstance& p) {
    double g00 = 0, g01 = 0, g11 = 0, h0 = 0, h1 = 0;
    for (std::size_t r = 0; r < p.y.size(); ++r) {
        g00 += p.a(r, 0) * p.a(r, 0);
        g01 += p.a(r, 0) * p.a(r, 1);
        g11 += p.a(r, 1) * p.a(r, 1);
        h0 += p.a(r, 0) * p.y[r];
        h1 += p.a(r, 1) * p.y[r];
    }
    const auto& b = p.bounds;
    auto inside = [&](double v, int k) { return v >= b[k].lower && v <= b[k].upper; };
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](double x0, double x1) { best = std::min(best, objective(p.a, p.y, {x0, x1})); };
    const double det = g00 * g11 - g01 * g01;
    if (det > 0) {
        const double x0 = (g11 * h0 - g01 * h1) / det;
        const double x1 = (g00 * h1 - g01 * h0) / det;
        if (inside(x0, 0) && inside(x1, 1)) consider(x0, x1);
    }
    for (double x1 : {b[1].lower, b[1].upper}) {
        if (g00 > 0) consider(std::clamp((h0 - g01 * x1) / g00, b[0].lower, b[0].upper), x1);
        for (double x0 : {b[0].lower, b[0].upper}) consider(x0, x1);
    }
    for (double x0 : {b[0].lower, b[0].upper})
        if (g11 > 0) consider(x0, std::clamp((h1 - g01 * x0) / g11, b[1].lower, b[1].upper));
    return best;
}

}  // namespace testing
