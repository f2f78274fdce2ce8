#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vaultopt/adaptive.hpp"
#include "vaultopt/recovery.hpp"

namespace vaultopt {

enum class Variant { Vault, Archgrid, Slanted, GammaSupports };

struct RunConfig {
    // domain
    PolygonDomain domain = PolygonDomain::rectangle(1.0, 1.0);
    double h = 0.1;
    // load
    LoadSpec loads;
    // design
    Mode mode = Mode::Compression;
    DesignKind design = DesignKind::Plastic;
    double V0 = 1.0, E0 = 1.0; // elastic design data
    // variant
    Variant variant = Variant::Vault;
    Vec2 grad_z0 = Vec2::Zero();       // slanted
    std::vector<Vec2> support_points;  // gamma_supports (matched to grid nodes)
    // solver / loop knobs
    double tol = 1e-8;
    double tol_v = 1e-6;
    double tol_c = 1e-5;
    double eps_perturb = -1.0; // negative: 1e-7 * domain diameter
    int max_iter = 200;
    int max_rounds = 100;
    int threads = 0;
    // outputs
    std::string mesh_path;   // empty: no mesh export
    std::string report_path; // empty: no report file
};

// Parse a JSON config document (schema documented in the README).
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

struct RunReport {
    bool verified = false;
    std::vector<std::string> failures; // verification failures (empty when verified)
    std::vector<std::string> warnings;
    // table fields
    int64_t nodes = 0, free_nodes = 0;
    int64_t full_members = 0;   // candidate count of the variant's ground structure
    int64_t active_members = 0; // active set at convergence
    int64_t kept_members = 0;   // members above the drop threshold in the shell
    int rounds = 0;             // member-adding rounds
    double seconds = 0.0;
    double Z = 0.0;
    double dual_obj = 0.0;
    double max_elevation = 0.0; // max |z - z0| over nodes
    // verification summary
    KktReport kkt;
    double equilibrium = 0.0;
    double colinearity = 0.0;
    int64_t colinearity_violations = 0;
    double gap_rel = 0.0;
    // elastic extras
    double volume = 0.0;
    double compliance = 0.0, compliance_primal_val = 0.0, compliance_dual_val = 0.0;
    double strain = 0.0, strain_dev = 0.0;
    std::vector<RoundInfo> history;
};

using LogSink = std::function<void(const std::string&)>;

// End-to-end pipeline: grid, loads, member-adding solve, recovery,
// verification, export. Verification failures are collected in the report
// (verified = false) rather than thrown; hard errors propagate as exceptions.
RunReport run(const RunConfig& config, const LogSink& log = {});

// Wavefront OBJ line mesh ("v x y z" + "l i j") plus a JSON sidecar
// (path + ".json") carrying forces, areas, lengths, loads and displacements;
// byte-deterministic for identical inputs.
void export_mesh(const GridShell& shell, const NodeGrid& grid, const Eigen::VectorXd& f,
                 const std::string& path);

// Full-precision JSON report document.
std::string report_to_json(const RunReport& report, const RunConfig& config);

// One-line human summary (6 significant digits).
std::string report_summary_line(const RunReport& report);

} // namespace vaultopt
