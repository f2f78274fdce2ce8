#include <doctest.h>

#include <cmath>

#include "vaultopt/assembly.hpp"

using namespace vaultopt;

namespace {

NodeGrid unit_square_grid(double h) {
    return build_grid(PolygonDomain::rectangle(1.0, 1.0), h);
}

} // namespace

TEST_SUITE("assembly") {

TEST_CASE("metric lengths for a slanted reference plane") {
    Metric metric;
    CHECK_FALSE(metric.slanted());
    CHECK(metric.length(Vec2(3.0, 4.0)) == doctest::Approx(5.0).epsilon(1e-15));

    metric.grad_z0 = Vec2(-0.2, 0.5);
    CHECK(metric.slanted());
    // |dx|^2 + (g.dx)^2 for the three lattice directions.
    CHECK(metric.length(Vec2(1.0, 0.0)) == doctest::Approx(std::sqrt(1.04)).epsilon(1e-15));
    CHECK(metric.length(Vec2(0.0, 1.0)) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
    CHECK(metric.length(Vec2(1.0, 1.0)) == doctest::Approx(std::sqrt(2.09)).epsilon(1e-15));
    CHECK(metric.z0(Vec2(2.0, 1.0)) == doctest::Approx(0.1).epsilon(1e-12));

    const NodeGrid grid = unit_square_grid(0.5);
    const PolygonDomain dom = PolygonDomain::rectangle(1.0, 1.0);
    for (const Member& m : neighbor_members(grid, dom)) {
        const Vec2 dx = grid.nodes[static_cast<size_t>(m.i_plus)] -
                        grid.nodes[static_cast<size_t>(m.i_minus)];
        CHECK(member_length(m, grid, metric) ==
              doctest::Approx(metric.length(dx)).epsilon(1e-15));
    }
}

TEST_CASE("area and line loads follow the trapezoid-free lumping rules") {
    const NodeGrid grid = unit_square_grid(0.5); // one free node: the center
    LoadSpec spec;
    spec.area_loads = {-2.0, -1.0};
    Eigen::VectorXd f = discretize_load(spec, grid);
    REQUIRE(f.size() == 1);
    CHECK(f[0] == doctest::Approx(-3.0 * 0.25).epsilon(1e-15)); // v * h^2

    // Axis line load through the center: t*h per node on the segment.
    spec = LoadSpec{};
    spec.line_loads = {{Vec2(0.0, 0.5), Vec2(1.0, 0.5), -4.0}};
    std::vector<std::string> warnings;
    f = discretize_load(spec, grid, &warnings);
    CHECK(f[0] == doctest::Approx(-4.0 * 0.5).epsilon(1e-15));
    CHECK(warnings.size() == 2); // the two boundary endpoints are supports

    // Diagonal line load: t*sqrt(2)*h per node.
    spec = LoadSpec{};
    spec.line_loads = {{Vec2(0.0, 0.0), Vec2(1.0, 1.0), -4.0}};
    f = discretize_load(spec, grid);
    CHECK(f[0] == doctest::Approx(-4.0 * std::sqrt(2.0) * 0.5).epsilon(1e-15));
}

TEST_CASE("point loads must hit a node; support hits are dropped with warning") {
    const NodeGrid grid = unit_square_grid(0.5);
    LoadSpec spec;
    spec.point_loads = {{Vec2(0.5, 0.5), -1.0}, {Vec2(0.5, 0.5), -0.25}};
    Eigen::VectorXd f = discretize_load(spec, grid);
    CHECK(f[0] == doctest::Approx(-1.25).epsilon(1e-15)); // loads accumulate

    spec.point_loads = {{Vec2(0.3, 0.4), -1.0}};
    CHECK_THROWS_AS(discretize_load(spec, grid), LoadOffNode);

    spec.point_loads = {{Vec2(0.0, 0.0), -1.0}}; // corner support
    std::vector<std::string> warnings;
    f = discretize_load(spec, grid, &warnings);
    CHECK(f[0] == 0.0);
    CHECK(warnings.size() == 1);
}

TEST_CASE("assembled rows carry metric cosines with the slant component") {
    const PolygonDomain dom = PolygonDomain::rectangle(1.0, 1.0);
    const NodeGrid grid = build_grid(dom, 0.5);
    Metric metric;
    metric.grad_z0 = Vec2(-0.2, 0.5);
    LoadSpec spec;
    spec.point_loads = {{Vec2(0.5, 0.5), -1.0}};
    const Eigen::VectorXd f = discretize_load(spec, grid);
    const std::vector<Member> members = neighbor_members(grid, dom);
    const ConicProgram prog = assemble_program(grid, members, f, metric, 0.0);

    REQUIRE(prog.member_count() == 20);
    CHECK(prog.n_free == 1);
    CHECK(prog.eps_perturb == 0.0);
    CHECK(prog.f.size() == 1);
    CHECK(prog.f[0] == -1.0);
    for (size_t k = 0; k < prog.rows.size(); ++k) {
        const ProgramRow& row = prog.rows[k];
        const Member& m = members[k];
        CHECK(row.id == m.id);
        const Vec2 dx = grid.nodes[static_cast<size_t>(m.i_plus)] -
                        grid.nodes[static_cast<size_t>(m.i_minus)];
        const double l = metric.length(dx);
        CHECK(row.l == doctest::Approx(l).epsilon(1e-15));
        CHECK(row.l_eff == row.l);
        CHECK(row.c1 == doctest::Approx(dx.x() / l).epsilon(1e-15));
        CHECK(row.c2 == doctest::Approx(dx.y() / l).epsilon(1e-15));
        // Metric cosines plus the slant cosine form a unit vector.
        const double c3 = metric.grad_z0.dot(dx) / l;
        CHECK(row.c1 * row.c1 + row.c2 * row.c2 + c3 * c3 ==
              doctest::Approx(1.0).epsilon(1e-14));
        // Free endpoint maps: -1 exactly at supports.
        CHECK(row.free_minus == grid.free_of_node[static_cast<size_t>(m.i_minus)]);
        CHECK(row.free_plus == grid.free_of_node[static_cast<size_t>(m.i_plus)]);
    }
}

TEST_CASE("eps_perturb shortens every effective length") {
    const PolygonDomain dom = PolygonDomain::rectangle(1.0, 1.0);
    const NodeGrid grid = build_grid(dom, 0.5);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(1, -1.0);
    const std::vector<Member> members = neighbor_members(grid, dom);
    const double eps = 1e-3;
    const ConicProgram prog = assemble_program(grid, members, f, Metric{}, eps);
    CHECK(prog.eps_perturb == eps);
    for (const ProgramRow& row : prog.rows) {
        CHECK(row.l_eff == doctest::Approx(row.l - eps).epsilon(1e-15));
        CHECK(row.l_eff > 0.0);
    }
    CHECK_THROWS_AS(assemble_program(grid, {}, f, Metric{}, 0.0), EmptyActiveSet);
}

TEST_CASE("archgrid filter keeps exactly the axis-aligned members") {
    const PolygonDomain dom = PolygonDomain::rectangle(1.0, 1.0);
    const NodeGrid grid = build_grid(dom, 0.5);
    const std::vector<Member> members = neighbor_members(grid, dom);
    const std::vector<Member> axis = archgrid_filter(members);
    CHECK(axis.size() == 12);
    for (const Member& m : axis) {
        const Vec2 dx = grid.nodes[static_cast<size_t>(m.i_plus)] -
                        grid.nodes[static_cast<size_t>(m.i_minus)];
        CHECK(std::min(dx.x() * dx.x(), dx.y() * dx.y()) <=
              1e-24 * (dx.x() * dx.x() + dx.y() * dx.y()));
    }
}

} // TEST_SUITE("assembly")
