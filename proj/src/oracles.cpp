#include "vaultopt/oracles.hpp"

#include <cmath>

#include "vaultopt/errors.hpp"

namespace vaultopt {

AnalyticSolution analytic_disk_uniform(double p, double R) {
    if (!(p > 0.0) || !(R > 0.0)) throw Error("analytic_disk_uniform: need p > 0 and R > 0");
    AnalyticSolution sol;
    const double sqrt5 = std::sqrt(5.0);
    sol.Z = 2.0 * M_PI / sqrt5 * p * R * R * R;
    const double wc = 2.0 * sqrt5 / 3.0 / (R * R);
    sol.w_tilde = [wc, R](double r) { return wc * (R * R * R - r * r * r); };
    sol.z = [wc, R](const Vec2& x) {
        const double r = std::min(x.norm(), R);
        return 0.5 * wc * (R * R * R - r * r * r);
    };
    sol.sigma_rr = [p, R, sqrt5](double r) { return p * R * R / (2.0 * sqrt5 * r); };
    sol.q_r = [p](double r) { return -0.5 * p * r; };
    sol.u_r = [R](double r) { return r - std::pow(r, 5) / std::pow(R, 4); };
    return sol;
}

AnalyticSolution analytic_point_load(double P, const Vec2& x0, double R) {
    if (!(P > 0.0) || !(R > 0.0)) throw Error("analytic_point_load: need P > 0 and R > 0");
    if (!(x0.norm() < R)) throw Error("analytic_point_load: the load must act inside the disk");
    AnalyticSolution sol;
    const double s = std::sqrt(R * R - x0.squaredNorm());
    sol.Z = 2.0 * P * s;
    // unit-apex cone over the disk with apex above x0: h(x0) = 1, h = 0 on the
    // rim, affine along every ray from x0
    sol.z = [x0, R, s](const Vec2& x) {
        const Vec2 d = x - x0;
        const double dn = d.norm();
        if (dn == 0.0) return s;
        const Vec2 th = d / dn;
        const double proj = x0.dot(th);
        const double rho = -proj + std::sqrt(std::max(R * R - x0.squaredNorm() + proj * proj, 0.0));
        return s * std::max(1.0 - dn / rho, 0.0);
    };
    return sol;
}

double full_gs_reference_solve(const NodeGrid& grid, const PolygonDomain& domain,
                               const Eigen::VectorXd& f, const Metric& metric) {
    if (grid.node_count() > 500)
        throw Error("full_gs_reference_solve: grid too large to materialize the full "
                    "ground structure");
    const std::vector<Member> members = full_members(grid, domain);
    const ConicProgram program = assemble_program(grid, members, f, metric, 0.0);
    SolverOptions opts;
    const SocpSolution sol = solve(program, opts);
    if (sol.status != SolveStatus::Optimal)
        throw NumericalFailure("full_gs_reference_solve: direct solve did not reach Optimal");
    const KktReport rep = kkt_residuals(program, sol);
    if (rep.max_all() > 100.0 * opts.tol)
        throw NumericalFailure("full_gs_reference_solve: optimality conditions violated, max " +
                               std::to_string(rep.max_all()));
    return sol.Z;
}

} // namespace vaultopt
