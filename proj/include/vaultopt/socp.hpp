#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <vector>

#include "vaultopt/assembly.hpp"

namespace vaultopt {

enum class SolveStatus { Optimal, MaxIter, Infeasible, NumericalFailure };

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 200;
    double static_reg = 1e-10; // added to the KKT diagonal before factorizing
    int refine_steps = 3;      // iterative refinement against the unregularized system
    bool verbose = false;
};

struct IterateInfo {
    double pcost = 0.0, dcost = 0.0;
    double pres = 0.0, dres = 0.0;
    double gap_slack = 0.0; // |y'(Ax-b)| + |x'(c-A'y-z)| bound used by weak duality
    double mu = 0.0, step = 0.0, sigma = 0.0, tau = 0.0, kappa = 0.0;
};

// Primal/dual solution of the assembled pair (P_X)/(P_X*). Vectors are per
// member (s,q,r,t1,t2,t3) and per free node (u1,u2,w).
struct SocpSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    int iterations = 0;
    Eigen::VectorXd s, q, r;
    Eigen::VectorXd u1, u2, w;
    Eigen::VectorXd t1, t2, t3;
    double Z = 0.0;        // primal objective l_eff's + 2 l_eff'r
    double dual_obj = 0.0; // f'w
    double pres = 0.0, dres = 0.0, gap_rel = 0.0;
    std::vector<IterateInfo> trace;
};

// Homogeneous self-dual primal-dual interior-point method with Nesterov-Todd
// scaling and Mehrotra predictor-corrector. Rotated cones are mapped to
// standard Lorentz cones by the fixed isometry internally.
SocpSolution solve(const ConicProgram& program, const SolverOptions& options = {});

// Residuals of the discrete optimality conditions evaluated on the assembled
// (perturbed) program. All entries are scaled to be dimensionless.
struct KktReport {
    double two_point = 0.0;       // (i)  max positive violation of 1/4 D(w)^2 + e <= 1
    double equilibrium_b = 0.0;   // (ii) max |B1's|, |B2's| over free nodes (scaled)
    double equilibrium_d = 0.0;   // (ii) max |D'q - f| (scaled)
    double active_equality = 0.0; // (iii) |1/4 D(w)^2 + e - 1| where s_k above threshold
    double q_identity = 0.0;      // (iv) |q - 1/2 s D(w)/l| (scaled)
    double r_elimination = 0.0;   // |r - q^2/(2s)| where s_k above threshold (scaled)
    double gap = 0.0;             // |Z - f'w| / (1 + |Z|)
    double max_all() const {
        double m = two_point;
        for (double v : {equilibrium_b, equilibrium_d, active_equality, q_identity,
                         r_elimination, gap})
            m = std::max(m, v);
        return m;
    }
};

KktReport kkt_residuals(const ConicProgram& program, const SocpSolution& sol);

// Plain-text dump of the assembled program (for external cross-checks).
void dump_program(const ConicProgram& program, const std::string& path);

} // namespace vaultopt
