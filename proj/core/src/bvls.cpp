#include "dramcal/bvls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dramcal/error.hpp"

namespace dramcal {

namespace {

constexpr const char* kStage = "calibrate";

enum class State { Free, Lower, Upper };

double abs_tolerance(const Matrix& a, std::span<const double> y, double rel_tol) {
    const auto aty = a.multiply_transposed(y);
    double m = 0;
    for (double v : aty) m = std::max(m, std::abs(v));
    if (m > 0) return rel_tol * m;
    // y orthogonal to range(A): fall back to the matrix scale.
    double fro = 0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (double v : a.row(r)) fro += v * v;
    return rel_tol * std::max(fro, std::numeric_limits<double>::min());
}

void check_inputs(const Matrix& a, std::span<const double> y, std::span<const Interval> bounds) {
    if (a.rows() == 0 || a.cols() == 0) throw ValidationError(kStage, "empty least-squares matrix");
    if (y.size() != a.rows()) throw ValidationError(kStage, "right-hand side length does not match matrix rows");
    if (bounds.size() != a.cols()) throw ValidationError(kStage, "one bound interval per column required");
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (double v : a.row(r))
            if (!std::isfinite(v)) throw NonFinite(kStage, "matrix contains a non-finite entry");
        if (!std::isfinite(y[r])) throw NonFinite(kStage, "right-hand side contains a non-finite entry");
    }
    for (const auto& b : bounds) {
        if (std::isnan(b.lower) || std::isnan(b.upper) || b.lower > b.upper ||
            b.lower == std::numeric_limits<double>::infinity() || b.upper == -std::numeric_limits<double>::infinity())
            throw ValidationError(kStage, "invalid bound interval");
    }
}

}  // namespace

std::string_view bound_status_name(BoundStatus s) {
    switch (s) {
        case BoundStatus::Interior: return "interior";
        case BoundStatus::AtLower: return "at-lower";
        case BoundStatus::AtUpper: return "at-upper";
        case BoundStatus::Fixed: return "fixed";
    }
    return "?";
}

KktReport kkt_report(const Matrix& a, std::span<const double> y, std::span<const double> x,
                     std::span<const Interval> bounds, double rel_tol) {
    auto r = a.multiply(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    const auto g = a.multiply_transposed(r);

    KktReport rep;
    rep.tol = abs_tolerance(a, y, rel_tol);
    for (std::size_t j = 0; j < x.size(); ++j) {
        KktEntry e;
        e.gradient = g[j];
        double excess = 0;
        if (bounds[j].lower == bounds[j].upper) {
            e.status = BoundStatus::Fixed;
        } else if (x[j] <= bounds[j].lower) {
            e.status = BoundStatus::AtLower;
            excess = -g[j] - rep.tol;
        } else if (x[j] >= bounds[j].upper) {
            e.status = BoundStatus::AtUpper;
            excess = g[j] - rep.tol;
        } else {
            e.status = BoundStatus::Interior;
            excess = std::abs(g[j]) - rep.tol;
        }
        e.satisfied = excess <= 0;
        rep.max_violation = std::max(rep.max_violation, excess);
        rep.satisfied = rep.satisfied && e.satisfied;
        rep.entries.push_back(e);
    }
    return rep;
}

BvlsResult solve_bvls(const Matrix& a, std::span<const double> y, std::span<const Interval> bounds,
                      const BvlsOptions& options) {
    check_inputs(a, y, bounds);
    const auto m = static_cast<Eigen::Index>(a.rows());
    const auto n = a.cols();

    // Work on unit-norm columns; x_scaled = x * norm.
    Eigen::MatrixXd as(m, static_cast<Eigen::Index>(n));
    Eigen::VectorXd yv(m);
    std::vector<double> scale(n, 1.0);
    for (Eigen::Index r = 0; r < m; ++r) {
        yv(r) = y[static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < n; ++c) as(r, static_cast<Eigen::Index>(c)) = a(static_cast<std::size_t>(r), c);
    }
    for (std::size_t c = 0; c < n; ++c) {
        const double norm = as.col(static_cast<Eigen::Index>(c)).norm();
        if (norm > 0) {
            scale[c] = norm;
            as.col(static_cast<Eigen::Index>(c)) /= norm;
        }
    }
    std::vector<double> lo(n), hi(n), thr(n);
    const double tol = abs_tolerance(a, y, options.rel_tol);
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = bounds[j].lower * scale[j];
        hi[j] = bounds[j].upper * scale[j];
        // Release threshold in scaled units, with margin for the final check.
        thr[j] = 0.25 * tol / scale[j];
    }

    std::vector<State> state(n);
    std::vector<bool> fixed(n, false);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (lo[j] == hi[j]) {
            fixed[j] = true;
            state[j] = State::Lower;
            x(jj) = lo[j];
        } else if (std::isfinite(lo[j])) {
            state[j] = State::Lower;
            x(jj) = lo[j];
        } else if (std::isfinite(hi[j])) {
            state[j] = State::Upper;
            x(jj) = hi[j];
        } else {
            state[j] = State::Free;
            x(jj) = 0;
        }
    }

    // Moves the free variables toward the free-subspace least-squares optimum,
    // pinning any that hit a bound. Returns false without moving anything if
    // `released` would immediately return to its bound.
    auto optimize_free = [&](std::ptrdiff_t released) -> bool {
        bool first = true;
        while (true) {
            std::vector<std::size_t> free;
            for (std::size_t j = 0; j < n; ++j)
                if (state[j] == State::Free) free.push_back(j);
            if (free.empty()) return true;

            Eigen::VectorXd rhs = yv;
            for (std::size_t j = 0; j < n; ++j)
                if (state[j] != State::Free) rhs -= as.col(static_cast<Eigen::Index>(j)) * x(static_cast<Eigen::Index>(j));
            Eigen::MatrixXd af(m, static_cast<Eigen::Index>(free.size()));
            for (std::size_t k = 0; k < free.size(); ++k)
                af.col(static_cast<Eigen::Index>(k)) = as.col(static_cast<Eigen::Index>(free[k]));
            const Eigen::VectorXd z = af.completeOrthogonalDecomposition().solve(rhs);

            double alpha = 1.0;
            std::ptrdiff_t limiting = -1;
            for (std::size_t k = 0; k < free.size(); ++k) {
                const auto j = free[k];
                const double xj = x(static_cast<Eigen::Index>(j));
                const double zj = z(static_cast<Eigen::Index>(k));
                double step = 1.0;
                if (zj < lo[j]) step = (lo[j] - xj) / (zj - xj);
                else if (zj > hi[j]) step = (hi[j] - xj) / (zj - xj);
                else continue;
                step = std::clamp(step, 0.0, 1.0);
                if (step < alpha || limiting < 0) {
                    alpha = step;
                    limiting = static_cast<std::ptrdiff_t>(j);
                }
            }
            if (limiting < 0) {
                for (std::size_t k = 0; k < free.size(); ++k)
                    x(static_cast<Eigen::Index>(free[k])) = z(static_cast<Eigen::Index>(k));
                return true;
            }
            if (first && limiting == released && alpha <= 0) return false;
            first = false;

            for (std::size_t k = 0; k < free.size(); ++k) {
                const auto j = free[k];
                const auto jj = static_cast<Eigen::Index>(j);
                const double zj = z(static_cast<Eigen::Index>(k));
                x(jj) += alpha * (zj - x(jj));
                const double eps = 1e-14 * (1.0 + std::abs(x(jj)));
                const bool hit_lo = zj < lo[j] && (static_cast<std::ptrdiff_t>(j) == limiting || x(jj) - lo[j] <= eps);
                const bool hit_hi = zj > hi[j] && (static_cast<std::ptrdiff_t>(j) == limiting || hi[j] - x(jj) <= eps);
                if (hit_lo) {
                    x(jj) = lo[j];
                    state[j] = State::Lower;
                } else if (hit_hi) {
                    x(jj) = hi[j];
                    state[j] = State::Upper;
                }
            }
        }
    };

    const std::size_t max_iter = options.max_iterations ? options.max_iterations : 20 * (n + 1) * (n + 1);
    BvlsResult result;
    result.converged = true;
    optimize_free(-1);

    std::vector<bool> excluded(n, false);
    std::size_t iter = 0;
    while (true) {
        if (iter >= max_iter) {
            result.converged = false;
            break;
        }
        ++iter;
        const Eigen::VectorXd w = as.transpose() * (yv - as * x);  // negative gradient
        std::ptrdiff_t best = -1;
        double best_v = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (fixed[j] || excluded[j]) continue;
            const double wj = w(static_cast<Eigen::Index>(j));
            double v = 0;
            if (state[j] == State::Lower && wj > thr[j]) v = wj;
            else if (state[j] == State::Upper && wj < -thr[j]) v = -wj;
            else continue;
            if (v > best_v) {
                best_v = v;
                best = static_cast<std::ptrdiff_t>(j);
            }
        }
        if (best < 0) break;

        const auto b = static_cast<std::size_t>(best);
        const State previous = state[b];
        state[b] = State::Free;
        if (optimize_free(best)) {
            std::fill(excluded.begin(), excluded.end(), false);
        } else {
            state[b] = previous;
            excluded[b] = true;
        }
    }

    result.iterations = iter;
    result.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double v = x(static_cast<Eigen::Index>(j)) / scale[j];
        result.x[j] = std::clamp(v, bounds[j].lower, bounds[j].upper);
        if (state[j] == State::Lower) result.x[j] = bounds[j].lower;
        if (state[j] == State::Upper) result.x[j] = bounds[j].upper;
    }
    auto r = a.multiply(result.x);
    double obj = 0;
    for (std::size_t i = 0; i < r.size(); ++i) obj += (r[i] - y[i]) * (r[i] - y[i]);
    result.objective = 0.5 * obj;
    result.kkt = kkt_report(a, y, result.x, bounds, options.rel_tol);
    return result;
}

}  // namespace dramcal
