#pragma once

#include <functional>

#include "vaultopt/geometry.hpp"
#include "vaultopt/socp.hpp"

namespace vaultopt {

// Closed-form reference solution on the disk of radius R.
struct AnalyticSolution {
    double Z = 0.0;
    std::function<double(const Vec2&)> z;        // optimal elevation (tension sign)
    std::function<double(double)> w_tilde;       // radial dual elevation w(r)
    std::function<double(double)> sigma_rr;      // radial stress resultant
    std::function<double(double)> q_r;           // radial vertical shear
    std::function<double(double)> u_r;           // radial in-plane dual field
};

// Uniform pressure p on the disk of radius R.
AnalyticSolution analytic_disk_uniform(double p, double R);

// Single vertical point load P at x0, |x0| < R.
AnalyticSolution analytic_point_load(double P, const Vec2& x0, double R);

// Reference objective over the fully materialized ground structure: a direct
// solve with no member adding whose optimality conditions are then checked
// exhaustively over every member. Only sensible on small grids.
double full_gs_reference_solve(const NodeGrid& grid, const PolygonDomain& domain,
                               const Eigen::VectorXd& f, const Metric& metric);

} // namespace vaultopt
