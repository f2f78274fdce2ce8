#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vaultopt/geometry.hpp"
#include "vaultopt/socp.hpp"

namespace vaultopt {

enum class Mode { Tension, Compression };
enum class DesignKind { Plastic, Elastic };

struct Member3D {
    int64_t id = 0;
    int node_minus = 0, node_plus = 0; // grid node indices
    double s = 0.0;     // force density of the plane program
    double s_hat = 0.0; // axial force in the shell (negative = compression)
    double area = 0.0;  // cross-section area
    double l3d = 0.0;   // true member length in space
    double l_metric = 0.0;
};

// A 3d grid-shell recovered from an optimal plane solution. Node elevations
// are z = z0 +- w/2 (tension hangs, compression rises); support nodes sit on
// the base surface z0.
struct GridShell {
    Mode mode = Mode::Compression;
    DesignKind kind = DesignKind::Plastic;
    std::vector<Eigen::Vector3d> nodes; // all grid nodes, elevated
    std::vector<Member3D> members;      // members kept after the drop threshold
    double Z = 0.0;      // objective of the plane program
    double Z_vol = 0.0;  // sum s * l3d^2 / l over kept members (= Z at optimality)
    double volume = 0.0; // plastic: total |force| * length; elastic: V0
    // elastic design only
    double E0 = 0.0, V0 = 0.0;
    double strain = 0.0;           // uniform axial strain (signed)
    double compliance = 0.0;       // strain-energy form
    double compliance_work = 0.0;  // external-work form (equal at optimality)
    Eigen::MatrixX3d displacement; // elastic nodal displacement, zero at supports
};

// Minimum-volume perfectly plastic design (unit stress bound).
GridShell recover_plastic(const NodeGrid& grid, const Metric& metric,
                          const std::vector<Member>& members, const SocpSolution& sol, Mode mode,
                          double drop_rel = 1e-8);

// Minimum-compliance elastic design with material volume V0 and modulus E0.
GridShell recover_elastic(const NodeGrid& grid, const Metric& metric,
                          const std::vector<Member>& members, const SocpSolution& sol, Mode mode,
                          double E0, double V0, double drop_rel = 1e-8);

// Worst nodal equilibrium residual of the shell under vertical loads f (free
// nodes), scaled by 1 + max|f|.
double equilibrium_residual(const GridShell& shell, const NodeGrid& grid,
                            const Eigen::VectorXd& f);

// Axial strains of the kept members induced by the stored displacement field.
Eigen::VectorXd member_strains(const GridShell& shell);

// Axial strains of the kept members induced by arbitrary plane fields
// (u1, u2, w over free nodes, zero at supports): the elevation increment w
// acts along the member's true slope.
Eigen::VectorXd axial_strain(const GridShell& shell, const NodeGrid& grid,
                             const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                             const Eigen::VectorXd& w);

// Compliance of the elastic shell from the displacement side, f'w_el minus
// the one-signed strain energy, and from the stress side, sum s_hat^2/(E0 a).
// Both equal Z^2 / (2 E0 V0) at optimality.
double compliance_primal(const GridShell& shell, const NodeGrid& grid, const Eigen::VectorXd& f);
double compliance_dual(const GridShell& shell);

struct ColinearityViolation {
    int64_t id = 0;     // member whose chain of crossed nodes kinks
    double rate_dev = 0.0;
};

struct ColinearityReport {
    double max_dev = 0.0; // max |(w2-w1)/l1 - (w3-w2)/l2| over consecutive nodes
    int64_t spanning = 0; // checked members passing over other grid nodes
    int64_t checked = 0;  // consecutive-triple checks performed
    std::vector<ColinearityViolation> violations;
};

// Members of an optimal solution may overlap collinearly; the elevation rates
// between consecutive grid nodes crossed by an active member must then agree
// (the crossed nodes lie on the member's chord in space). Members with
// s < active_rel * max(s) are not checked.
ColinearityReport colinearity_check(const NodeGrid& grid, const Metric& metric,
                                    const std::vector<Member>& members, const SocpSolution& sol,
                                    double tol_c = 1e-5, double active_rel = 1e-6);

} // namespace vaultopt
