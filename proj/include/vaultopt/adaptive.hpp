#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vaultopt/geometry.hpp"
#include "vaultopt/socp.hpp"

namespace vaultopt {

enum class GroundStructure { Full, AxisAligned };

struct ScanOptions {
    double tol_v = 1e-6;      // relative dual-feasibility slack before a pair is added
    double eps_perturb = 0.0; // length perturbation of the program being scanned against
    int threads = 0;          // 0: decide from VAULTOPT_THREADS / hardware
    int64_t max_add = 0;      // 0: add every violated pair, else the worst max_add
    GroundStructure ground = GroundStructure::Full;
};

struct Violation {
    int64_t id;      // pair rank of the candidate member
    double excess;   // lhs/rhs - 1 of the scaled two-point condition
};

// Scan every candidate pair of the ground structure against the dual fields
// (u1, u2, w given over free nodes; zero at supports) and return the ids that
// violate the two-point condition, ordered by id. Active members are skipped.
// Deterministic for any thread count.
std::vector<Violation> violation_scan(const NodeGrid& grid, const PolygonDomain& domain,
                                      const Metric& metric, const Eigen::VectorXd& u1,
                                      const Eigen::VectorXd& u2, const Eigen::VectorXd& w,
                                      const std::vector<Member>& active,
                                      const ScanOptions& options);

struct RoundInfo {
    int round = 0;
    int64_t active_members = 0;
    int64_t violations = 0;
    double Z = 0.0;
    int solver_iterations = 0;
    SolveStatus status = SolveStatus::NumericalFailure;
    double worst_excess = 0.0;
    double seconds = 0.0; // wall time of this round (solve + scan)
};

struct AdaptiveOptions {
    SolverOptions solver;
    ScanOptions scan;          // scan.eps_perturb is managed by the loop itself
    double eps_perturb = -1.0; // length perturbation; negative: 1e-7 * domain diameter
    int max_rounds = 100;
    std::function<void(const RoundInfo&)> on_round; // optional progress sink
};

struct AdaptiveResult {
    SocpSolution solution;       // solution of the final (converged) active set
    std::vector<Member> members; // final active set, sorted by id
    ConicProgram program;        // program the solution refers to
    std::vector<RoundInfo> history;
    std::vector<std::string> warnings;
};

// Adaptive member-adding loop: start from the Chebyshev neighborhood ground
// structure (or its axis-aligned subset), solve, scan the full pair set, add
// violated members, repeat until the scan is clean.
AdaptiveResult member_adding_solve(const NodeGrid& grid, const PolygonDomain& domain,
                                   const Metric& metric, const Eigen::VectorXd& f,
                                   const AdaptiveOptions& options);

int resolve_threads(int requested);

} // namespace vaultopt
