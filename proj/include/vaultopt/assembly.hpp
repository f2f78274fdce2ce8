#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "vaultopt/geometry.hpp"

namespace vaultopt {

// Slanted-boundary metric induced by the affine reference plane z0(x) = g.x:
// squared member length |dx|^2 + (g.dx)^2. The Euclidean case is g = 0.
struct Metric {
    Vec2 grad_z0{0.0, 0.0};
    bool slanted() const { return grad_z0.x() != 0.0 || grad_z0.y() != 0.0; }
    double length(const Vec2& dx) const {
        const double s = grad_z0.dot(dx);
        return std::sqrt(dx.squaredNorm() + s * s);
    }
    double z0(const Vec2& x) const { return grad_z0.dot(x); }
};

double member_length(const Member& m, const NodeGrid& grid, const Metric& metric);

struct PointLoad {
    Vec2 at;
    double magnitude; // signed, positive = upward
};

// Uniform line load along a lattice-axis or +-45 degree segment.
struct LineLoad {
    Vec2 from, to;
    double intensity; // signed force per unit length, positive = upward
};

struct LoadSpec {
    std::vector<PointLoad> point_loads;
    std::vector<LineLoad> line_loads;
    // Uniform area loads over the whole domain (intensities add).
    std::vector<double> area_loads;
};

// Nodal load vector over free nodes. Rules: area load v adds v*h^2 at every
// free node; a line load t adds t*h (axis) or t*sqrt(2)*h (diagonal) at every
// node on the segment; point loads must hit a node within 1e-9*h. Loads
// falling on support nodes are dropped with a warning.
Eigen::VectorXd discretize_load(const LoadSpec& spec, const NodeGrid& grid,
                                std::vector<std::string>* warnings = nullptr);

// One member row of the assembled program. Free endpoint indices are -1 for
// supports (the corresponding matrix entries are eliminated a priori).
// c1/c2 are metric direction cosines dx/l_metric, so the row of B1/B2 reads
// (B u)_k = (u(plus) - u(minus)) . dx / l_metric and D stays +-1.
struct ProgramRow {
    int64_t id = 0;
    int32_t free_minus = -1, free_plus = -1;
    double c1 = 0.0, c2 = 0.0;
    double l = 0.0;     // metric length
    double l_eff = 0.0; // l - eps_perturb (used in objective and cone data)
};

// Conic program pair (P_X)/(P_X*) over the active member set:
//   inf  l_eff' s + 2 l_eff' r   s.t. B1's = B2's = 0, D'q = f,
//        (r_k, s_k, q_k) in the rotated cone 2 r s >= q^2 per member.
struct ConicProgram {
    std::vector<ProgramRow> rows;
    Eigen::VectorXd f; // length n_free
    int n_free = 0;
    double eps_perturb = 0.0;
    Metric metric;

    int64_t member_count() const { return static_cast<int64_t>(rows.size()); }
};

// Assemble the program for the given active members. eps_perturb is
// subtracted from every metric length (anti-degeneracy; always on in the
// pipeline). Throws EmptyActiveSet on an empty member list.
ConicProgram assemble_program(const NodeGrid& grid, const std::vector<Member>& members,
                              const Eigen::VectorXd& f, const Metric& metric,
                              double eps_perturb);

// Keep only lattice-axis-aligned members (arch-grid variant).
std::vector<Member> archgrid_filter(const std::vector<Member>& members);

} // namespace vaultopt
