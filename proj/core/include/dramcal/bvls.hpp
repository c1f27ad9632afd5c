#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dramcal/device_spec.hpp"
#include "dramcal/matrix.hpp"

namespace dramcal {

enum class BoundStatus { Interior, AtLower, AtUpper, Fixed };
std::string_view bound_status_name(BoundStatus s);

struct KktEntry {
    BoundStatus status = BoundStatus::Interior;
    double gradient = 0;  // component of A^T (A x - y)
    bool satisfied = true;
};

struct KktReport {
    std::vector<KktEntry> entries;
    double tol = 0;             // absolute tolerance used
    double max_violation = 0;   // largest signed-condition excess over 0
    bool satisfied = true;
};

// Optimality of x for min 1/2 |A x - y|^2 s.t. bounds, with the absolute
// tolerance `rel_tol * |A^T y|_inf`: interior |g| <= tol, at lower g >= -tol,
// at upper g <= tol.
KktReport kkt_report(const Matrix& a, std::span<const double> y, std::span<const double> x,
                     std::span<const Interval> bounds, double rel_tol = 1e-8);

struct BvlsOptions {
    double rel_tol = 1e-8;
    std::size_t max_iterations = 0;  // 0: 20 * (n + 1)^2
};

struct BvlsResult {
    std::vector<double> x;
    double objective = 0;  // 1/2 |A x - y|^2
    KktReport kkt;
    std::size_t iterations = 0;
    bool converged = true;  // false when the iteration limit was hit
};

// Bounded-variable least squares by an active-set method: variables are
// partitioned into free and bound sets, the free subproblem is solved in the
// least-squares sense (minimum norm when rank deficient), and variables are
// released one at a time by largest KKT violation. Columns are scaled to unit
// norm internally. Infinite bounds are allowed.
//
// Throws NonFinite for non-finite A or y and ValidationError for malformed
// bounds. On the iteration limit the best iterate is returned with
// converged = false.
BvlsResult solve_bvls(const Matrix& a, std::span<const double> y, std::span<const Interval> bounds,
                      const BvlsOptions& options = {});

}  // namespace dramcal
