#include <doctest.h>

#include <cmath>
#include <numbers>

#include "vaultopt/adaptive.hpp"
#include "vaultopt/oracles.hpp"

using namespace vaultopt;

TEST_SUITE("oracles") {

TEST_CASE("uniform disk: frozen objective and apex") {
    const double p = 1.0, R = 1.0;
    const AnalyticSolution ref = analytic_disk_uniform(p, R);
    const double sq5 = std::sqrt(5.0);
    CHECK(ref.Z == doctest::Approx(2.0 * std::numbers::pi / sq5).epsilon(1e-14));
    CHECK(ref.Z == doctest::Approx(2.8099258924162904).epsilon(1e-14));
    // Apex elevation z(0) = w(0)/2 = sqrt(5)/3 * R.
    CHECK(ref.z(Vec2(0, 0)) == doctest::Approx(sq5 / 3.0).epsilon(1e-14));
    CHECK(ref.w_tilde(0.0) == doctest::Approx(2.0 * sq5 / 3.0).epsilon(1e-14));
    // Rim values vanish.
    CHECK(ref.z(Vec2(R, 0)) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(ref.w_tilde(R) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(ref.u_r(R) == doctest::Approx(0.0).epsilon(1e-14));
    // Outside the rim the membrane is flat.
    CHECK(ref.z(Vec2(2 * R, 0)) == doctest::Approx(0.0).epsilon(1e-14));
    // z depends on |x| only.
    CHECK(ref.z(Vec2(0.3, 0.4)) == doctest::Approx(ref.z(Vec2(-0.5, 0.0))).epsilon(1e-14));

    // Scaling laws: Z = (2 pi / sqrt 5) p R^3.
    CHECK(analytic_disk_uniform(3.0, 1.0).Z == doctest::Approx(3.0 * ref.Z).epsilon(1e-12));
    CHECK(analytic_disk_uniform(1.0, 2.0).Z == doctest::Approx(8.0 * ref.Z).epsilon(1e-12));

    CHECK_THROWS_AS(analytic_disk_uniform(0.0, 1.0), Error);
    CHECK_THROWS_AS(analytic_disk_uniform(1.0, -1.0), Error);
}

TEST_CASE("uniform disk: field identities hold pointwise") {
    const double p = 2.0, R = 1.5;
    const AnalyticSolution ref = analytic_disk_uniform(p, R);
    const double sq5 = std::sqrt(5.0);
    for (double r : {0.15, 0.5, 0.9, 1.25, 1.4999}) {
        // Closed forms: w(r) = 2 sqrt5/(3R^2) (R^3 - r^3), sigma = p R^2/(2 sqrt5 r),
        // q = -p r / 2, u = r - r^5 / R^4.
        CHECK(ref.w_tilde(r) ==
              doctest::Approx(2.0 * sq5 / (3.0 * R * R) * (R * R * R - r * r * r))
                  .epsilon(1e-13));
        CHECK(ref.sigma_rr(r) ==
              doctest::Approx(p * R * R / (2.0 * sq5 * r)).epsilon(1e-13));
        CHECK(ref.q_r(r) == doctest::Approx(-0.5 * p * r).epsilon(1e-13));
        CHECK(ref.u_r(r) ==
              doctest::Approx(r - r * r * r * r * r / (R * R * R * R)).epsilon(1e-13));

        const double wp = -2.0 * sq5 * r * r / (R * R);   // w'(r)
        const double sp = -p * R * R / (2.0 * sq5 * r * r); // sigma'(r)
        const double up = 1.0 - 5.0 * r * r * r * r / (R * R * R * R); // u'(r)
        // Horizontal equilibrium: sigma' + sigma / r = 0.
        CHECK(sp + ref.sigma_rr(r) / r == doctest::Approx(0.0).epsilon(1e-12));
        // Vertical equilibrium: -(q' + q/r) = p with q' = -p/2.
        CHECK(-(ref.q_r(r) / r - 0.5 * p) == doctest::Approx(p).epsilon(1e-12));
        // Shear identity: q = sigma w' / 2.
        CHECK(ref.q_r(r) == doctest::Approx(0.5 * ref.sigma_rr(r) * wp).epsilon(1e-12));
        // Two-point optimality in the radial direction: w'^2/4 + u' = 1.
        CHECK(0.25 * wp * wp + up == doctest::Approx(1.0).epsilon(1e-12));
        // z is half the dual elevation.
        CHECK(ref.z(Vec2(r, 0.0)) == doctest::Approx(0.5 * ref.w_tilde(r)).epsilon(1e-13));
    }
}

TEST_CASE("point load: cone over the support circle") {
    const double P = 2.0, R = 1.0;
    const Vec2 x0(0.5, 0.0);
    const AnalyticSolution ref = analytic_point_load(P, x0, R);
    const double sag = std::sqrt(R * R - x0.squaredNorm());
    CHECK(ref.Z == doctest::Approx(2.0 * P * sag).epsilon(1e-14));
    CHECK(ref.z(x0) == doctest::Approx(sag).epsilon(1e-13));
    // Affine along every ray from the apex to the rim, zero at the rim.
    for (double ang : {0.0, 1.0, 2.5, 4.0}) {
        const Vec2 dir(std::cos(ang), std::sin(ang));
        // Rim point along the ray from x0.
        const double b = x0.dot(dir);
        const double t_rim = -b + std::sqrt(b * b + R * R - x0.squaredNorm());
        const Vec2 rim = x0 + t_rim * dir;
        CHECK(rim.norm() == doctest::Approx(R).epsilon(1e-12));
        CHECK(ref.z(rim) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(ref.z(x0 + 0.5 * t_rim * dir) == doctest::Approx(0.5 * sag).epsilon(1e-12));
    }
    // Central load: Z = 2 P R.
    CHECK(analytic_point_load(P, Vec2(0, 0), R).Z == doctest::Approx(2.0 * P * R).epsilon(1e-14));

    CHECK_THROWS_AS(analytic_point_load(0.0, Vec2(0, 0), R), Error);
    CHECK_THROWS_AS(analytic_point_load(P, Vec2(0, 0), 0.0), Error);
    CHECK_THROWS_AS(analytic_point_load(P, Vec2(1.0, 0.0), 1.0), Error);
}

TEST_CASE("full ground-structure reference: deterministic and guarded") {
    const PolygonDomain dom = PolygonDomain::rectangle(1.0, 1.0);
    const NodeGrid grid = build_grid(dom, 0.5);
    Eigen::VectorXd f(1);
    f[0] = -1.0;
    const double z1 = full_gs_reference_solve(grid, dom, f, Metric{});
    const double z2 = full_gs_reference_solve(grid, dom, f, Metric{});
    CHECK(z1 == z2); // bitwise deterministic
    // Center point load on the unit square: two crossing bars of length 1/2
    // on either axis give Z = 2 P r with r = 1/2.
    CHECK(z1 == doctest::Approx(1.0).epsilon(1e-7));

    // Member adding agrees with the exhaustive reference.
    AdaptiveOptions opts;
    const AdaptiveResult res = member_adding_solve(grid, dom, Metric{}, f, opts);
    CHECK(std::abs(res.solution.Z - z1) <= 1e-6);

    // The guard rejects grids too large for an exhaustive solve.
    const NodeGrid big = build_grid(dom, 1.0 / 30.0);
    CHECK(big.node_count() > 500);
    Eigen::VectorXd fb = Eigen::VectorXd::Zero(big.free_count());
    CHECK_THROWS_AS(full_gs_reference_solve(big, dom, fb, Metric{}), Error);
}

TEST_CASE("reference solve handles a support-dominated grid") {
    // Coarse disk: few interior nodes, zero load. The reference must return
    // exactly the zero design rather than fail on the degenerate program.
    const PolygonDomain disk = PolygonDomain::regular_polygon(16, 1.0);
    const NodeGrid grid = build_grid(disk, 0.9);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(grid.free_count());
    const double z = full_gs_reference_solve(grid, disk, f, Metric{});
    CHECK(std::abs(z) <= 1e-8);
}

} // TEST_SUITE("oracles")
