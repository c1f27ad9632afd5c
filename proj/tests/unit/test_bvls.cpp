#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "bvls_oracles.hpp"
#include "dramcal/bvls.hpp"
#include "dramcal/error.hpp"

using namespace dramcal;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool feasible(const std::vector<double>& x, const std::vector<Interval>& b) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < b[i].lower || x[i] > b[i].upper) return false;
    return true;
}

}  // namespace

TEST_CASE("one-dimensional clamp at the upper bound") {
    const Matrix a{{1.0}};
    const std::vector<double> y{5.0};
    const std::vector<Interval> b{{0.0, 3.0}};
    const auto r = solve_bvls(a, y, b);
    CHECK(r.x[0] == 3.0);
    CHECK(r.kkt.entries[0].status == BoundStatus::AtUpper);
    CHECK(r.kkt.satisfied);
}

TEST_CASE("interior optimum of an identity system") {
    const Matrix a{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const std::vector<double> y{1, 2, 3};
    const std::vector<Interval> b(3, Interval{0.0, 10.0});
    const auto r = solve_bvls(a, y, b);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.x[i] == doctest::Approx(i + 1.0).epsilon(1e-14));
        CHECK(r.kkt.entries[i].status == BoundStatus::Interior);
        CHECK(std::abs(r.kkt.entries[i].gradient) < 1e-12);
    }
    CHECK(r.objective < 1e-24);
}

TEST_CASE("fixed variables stay fixed") {
    const Matrix a{{1, 1}, {1, -1}, {2, 0.5}};
    const std::vector<double> y{3, 1, 4};
    const std::vector<Interval> b{{0.25, 0.25}, {-kInf, kInf}};
    const auto r = solve_bvls(a, y, b);
    CHECK(r.x[0] == 0.25);
    CHECK(r.kkt.entries[0].status == BoundStatus::Fixed);
    CHECK(r.kkt.satisfied);
}

TEST_CASE("random 7x5 instances beat random feasible points and the clipped solution") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        auto p = testing::random_instance(7, 5, rng, false);
        for (auto& b : p.bounds) b = {0.0, 2.0};
        const auto r = solve_bvls(p.a, p.y, p.bounds);
        REQUIRE(r.kkt.satisfied);
        REQUIRE(feasible(r.x, p.bounds));
        const double f = testing::objective(p.a, p.y, r.x);
        std::vector<double> x(5);
        for (int k = 0; k < 100000; ++k) {
            for (auto& v : x) v = 2.0 * u(rng);
            REQUIRE(f <= testing::objective(p.a, p.y, x) + 1e-12);
        }
        // Clip the unconstrained solution (free bounds) into the box.
        std::vector<Interval> free(5, Interval{-kInf, kInf});
        auto xu = solve_bvls(p.a, p.y, free).x;
        for (auto& v : xu) v = std::clamp(v, 0.0, 2.0);
        CHECK(f <= testing::objective(p.a, p.y, xu) + 1e-12);
    }
}

TEST_CASE("KKT holds on random instances of several shapes") {
    std::mt19937_64 rng(7);
    for (auto [m, n] : {std::pair{3, 2}, {7, 5}, {20, 6}, {4, 6}}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto p = testing::random_instance(m, n, rng);
            const auto r = solve_bvls(p.a, p.y, p.bounds);
            INFO("shape " << m << "x" << n << " trial " << trial);
            REQUIRE(r.converged);
            REQUIRE(r.kkt.satisfied);
            REQUIRE(feasible(r.x, p.bounds));
        }
    }
}

TEST_CASE("two-variable optimum agrees with a grid scan") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto p = testing::random_instance(3, 2, rng, false);
        const auto r = solve_bvls(p.a, p.y, p.bounds);
        const double grid = testing::grid_min_2d(p, 500);
        CHECK(r.objective <= grid * (1 + 1e-6) + 1e-15);
    }
}

TEST_CASE("shrinking the box never lowers the optimum") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = testing::random_instance(7, 5, rng, false);
        const auto wide = solve_bvls(p.a, p.y, p.bounds);
        for (auto& b : p.bounds) {
            const double mid = 0.5 * (b.lower + b.upper);
            b = {mid - 0.25 * (b.upper - b.lower), mid + 0.25 * (b.upper - b.lower)};
        }
        const auto narrow = solve_bvls(p.a, p.y, p.bounds);
        CHECK(narrow.objective >= wide.objective * (1 - 1e-12) - 1e-15);
    }
}

TEST_CASE("rank-deficient columns are handled") {
    const Matrix a{{1, 1, 0}, {2, 2, 1}, {3, 3, 0}, {4, 4, 1}};
    const std::vector<double> y{2, 5, 6, 9};
    const std::vector<Interval> b(3, Interval{0.0, 10.0});
    const auto r = solve_bvls(a, y, b);
    CHECK(r.kkt.satisfied);
    CHECK(r.x[0] + r.x[1] == doctest::Approx(2.0));
    CHECK(r.x[2] == doctest::Approx(1.0));
}

TEST_CASE("zero column leaves its variable at a bound") {
    const Matrix a{{1, 0}, {2, 0}};
    const std::vector<double> y{1, 2};
    const std::vector<Interval> b{{0, 5}, {0.5, 1.0}};
    const auto r = solve_bvls(a, y, b);
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] >= 0.5);
    CHECK(r.x[1] <= 1.0);
    CHECK(r.kkt.satisfied);
}

TEST_CASE("identical problems give bit-identical answers") {
    std::mt19937_64 rng(5);
    const auto p = testing::random_instance(20, 6, rng);
    const auto r1 = solve_bvls(p.a, p.y, p.bounds);
    const auto r2 = solve_bvls(p.a, p.y, p.bounds);
    CHECK(r1.x == r2.x);
    CHECK(r1.objective == r2.objective);
}

TEST_CASE("input validation") {
    const Matrix a{{1.0, 2.0}};
    CHECK_THROWS_AS(solve_bvls(a, std::vector<double>{std::nan("")}, std::vector<Interval>(2)), NonFinite);
    CHECK_THROWS_AS(solve_bvls(a, std::vector<double>{1.0}, std::vector<Interval>{{1, 0}, {0, 1}}), ValidationError);
    CHECK_THROWS(solve_bvls(a, std::vector<double>{1.0, 2.0}, std::vector<Interval>(2)));
    CHECK_THROWS(solve_bvls(a, std::vector<double>{1.0}, std::vector<Interval>(1)));
}

TEST_CASE("kkt_report flags a non-optimal point") {
    const Matrix a{{1.0}};
    const std::vector<double> y{5.0};
    const std::vector<Interval> b{{0.0, 10.0}};
    const auto rep = kkt_report(a, y, std::vector<double>{1.0}, b);
    CHECK_FALSE(rep.satisfied);
    CHECK(rep.entries[0].gradient == doctest::Approx(-4.0));
}
