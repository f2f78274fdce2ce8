#include "vaultopt/cli_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vaultopt {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

Vec2 parse_vec2(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2)
        throw Error(std::string(what) + ": expected a [x, y] pair");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

std::vector<Vec2> parse_ring(const json& j, const char* what) {
    std::vector<Vec2> ring;
    for (const auto& v : j) ring.push_back(parse_vec2(v, what));
    return ring;
}

PolygonDomain parse_domain(const json& j) {
    const std::string type = j.value("type", "rectangle");
    if (type == "rectangle")
        return PolygonDomain::rectangle(j.at("width").get<double>(),
                                        j.at("height").get<double>());
    if (type == "square") {
        const double a = j.at("side").get<double>();
        return PolygonDomain::rectangle(a, a);
    }
    if (type == "disk")
        return PolygonDomain::regular_polygon(j.value("segments", 512),
                                              j.at("radius").get<double>(),
                                              j.value("phase", 0.0));
    if (type == "polygon") {
        std::vector<std::vector<Vec2>> holes;
        if (j.contains("holes"))
            for (const auto& hj : j.at("holes")) holes.push_back(parse_ring(hj, "domain.holes"));
        return PolygonDomain(parse_ring(j.at("outer"), "domain.outer"), std::move(holes));
    }
    throw Error("unknown domain type '" + type + "'");
}

LoadSpec parse_loads(const json& j) {
    LoadSpec spec;
    if (j.contains("point"))
        for (const auto& pj : j.at("point"))
            spec.point_loads.push_back(
                {parse_vec2(pj.at("at"), "loads.point.at"), pj.at("magnitude").get<double>()});
    if (j.contains("line"))
        for (const auto& lj : j.at("line"))
            spec.line_loads.push_back({parse_vec2(lj.at("from"), "loads.line.from"),
                                       parse_vec2(lj.at("to"), "loads.line.to"),
                                       lj.at("intensity").get<double>()});
    if (j.contains("area"))
        for (const auto& aj : j.at("area")) spec.area_loads.push_back(aj.get<double>());
    return spec;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// Candidate count of the axis-aligned ground structure (Table-style report
// field); uses the same relative criterion as the scan and the filter.
int64_t axis_pair_count(const NodeGrid& grid) {
    const int nb = grid.node_count();
    int64_t count = 0;
    for (int i = 0; i < nb; ++i) {
        const Vec2 pi = grid.nodes[static_cast<size_t>(i)];
        for (int j = i + 1; j < nb; ++j) {
            const double dx1 = grid.nodes[static_cast<size_t>(j)].x() - pi.x();
            const double dx2 = grid.nodes[static_cast<size_t>(j)].y() - pi.y();
            if (std::min(dx1 * dx1, dx2 * dx2) <= 1e-24 * (dx1 * dx1 + dx2 * dx2)) ++count;
        }
    }
    return count;
}

int32_t nearest_node(const NodeGrid& grid, const Vec2& p) {
    int32_t best = -1;
    double best_d = std::numeric_limits<double>::max();
    for (int i = 0; i < grid.node_count(); ++i) {
        const double d = (grid.nodes[static_cast<size_t>(i)] - p).norm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best < 0 || best_d > 0.5 * grid.h)
        throw Error("support point (" + fmt("%.17g", p.x()) + ", " + fmt("%.17g", p.y()) +
                    ") is not near any grid node");
    return best;
}

void check(std::vector<std::string>& failures, bool ok, const std::string& msg) {
    if (!ok) failures.push_back(msg);
}

} // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("config parse error: ") + e.what());
    }
    try {
        RunConfig cfg;
        if (j.contains("domain")) cfg.domain = parse_domain(j.at("domain"));
        cfg.h = j.value("h", cfg.h);
        if (j.contains("loads")) cfg.loads = parse_loads(j.at("loads"));

        const std::string mode = j.value("mode", "compression");
        if (mode == "compression")
            cfg.mode = Mode::Compression;
        else if (mode == "tension")
            cfg.mode = Mode::Tension;
        else
            throw Error("mode must be 'tension' or 'compression'");

        if (j.contains("design")) {
            const auto& dj = j.at("design");
            const std::string kind = dj.value("kind", "plastic");
            if (kind == "plastic")
                cfg.design = DesignKind::Plastic;
            else if (kind == "elastic") {
                cfg.design = DesignKind::Elastic;
                cfg.E0 = dj.value("E0", 1.0);
                cfg.V0 = dj.value("V0", 1.0);
                if (!(cfg.E0 > 0.0) || !(cfg.V0 > 0.0))
                    throw Error("elastic design requires E0 > 0 and V0 > 0");
            } else
                throw Error("design.kind must be 'plastic' or 'elastic'");
        }

        if (j.contains("variant")) {
            const auto& vj = j.at("variant");
            const std::string kind = vj.value("kind", "vault");
            if (kind == "vault")
                cfg.variant = Variant::Vault;
            else if (kind == "archgrid")
                cfg.variant = Variant::Archgrid;
            else if (kind == "slanted") {
                cfg.variant = Variant::Slanted;
                cfg.grad_z0 = parse_vec2(vj.at("grad_z0"), "variant.grad_z0");
            } else if (kind == "gamma_supports") {
                cfg.variant = Variant::GammaSupports;
                if (vj.contains("points"))
                    for (const auto& pj : vj.at("points"))
                        cfg.support_points.push_back(parse_vec2(pj, "variant.points"));
                if (cfg.support_points.empty())
                    throw Error("gamma_supports variant needs a nonempty 'points' list");
            } else
                throw Error("unknown variant '" + kind + "'");
        }

        cfg.tol = j.value("tol", cfg.tol);
        cfg.tol_v = j.value("tol_v", cfg.tol_v);
        cfg.tol_c = j.value("tol_c", cfg.tol_c);
        cfg.eps_perturb = j.value("eps_perturb", cfg.eps_perturb);
        cfg.max_iter = j.value("max_iter", cfg.max_iter);
        cfg.max_rounds = j.value("max_rounds", cfg.max_rounds);
        cfg.threads = j.value("threads", cfg.threads);
        if (j.contains("outputs")) {
            const auto& oj = j.at("outputs");
            cfg.mesh_path = oj.value("mesh", "");
            cfg.report_path = oj.value("report", "");
        }
        if (!(cfg.h > 0.0)) throw Error("h must be positive");
        if (!(cfg.tol > 0.0) || !(cfg.tol_v > 0.0)) throw Error("tolerances must be positive");
        return cfg;
    } catch (const json::exception& e) {
        throw Error(std::string("config error: ") + e.what());
    }
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

RunReport run(const RunConfig& config, const LogSink& log) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto say = [&](const std::string& line) {
        if (log) log(line);
    };
    RunReport rep;

    NodeGrid grid = build_grid(config.domain, config.h);
    if (config.variant == Variant::GammaSupports) {
        std::vector<int32_t> supports;
        supports.reserve(config.support_points.size());
        for (const Vec2& p : config.support_points) supports.push_back(nearest_node(grid, p));
        grid = set_supports(grid, config.domain, supports);
    }
    rep.nodes = grid.node_count();
    rep.free_nodes = grid.free_count();
    say("grid: " + std::to_string(grid.node_count()) + " nodes (" +
        std::to_string(grid.interior_count()) + " interior, " +
        std::to_string(grid.free_count()) + " free)");

    Metric metric;
    if (config.variant == Variant::Slanted) metric.grad_z0 = config.grad_z0;

    const Eigen::VectorXd f = discretize_load(config.loads, grid, &rep.warnings);

    AdaptiveOptions opts;
    opts.solver.tol = config.tol;
    opts.solver.max_iter = config.max_iter;
    opts.scan.tol_v = config.tol_v;
    opts.scan.threads = config.threads;
    opts.scan.ground =
        config.variant == Variant::Archgrid ? GroundStructure::AxisAligned : GroundStructure::Full;
    opts.eps_perturb = config.eps_perturb;
    opts.max_rounds = config.max_rounds;
    opts.on_round = [&](const RoundInfo& info) {
        say("round " + std::to_string(info.round) +
            ": members=" + std::to_string(info.active_members) +
            " iters=" + std::to_string(info.solver_iterations) + " Z=" + fmt("%.12g", info.Z) +
            " violations=" + std::to_string(info.violations) + " time=" +
            fmt("%.3f", info.seconds) + "s");
    };

    AdaptiveResult res = member_adding_solve(grid, config.domain, metric, f, opts);
    rep.history = res.history;
    rep.rounds = static_cast<int>(res.history.size());
    rep.active_members = res.program.member_count();
    rep.full_members = opts.scan.ground == GroundStructure::AxisAligned
                           ? axis_pair_count(grid)
                           : grid.full_member_count();
    rep.warnings.insert(rep.warnings.end(), res.warnings.begin(), res.warnings.end());
    rep.Z = res.solution.Z;
    rep.dual_obj = res.solution.dual_obj;

    const GridShell shell =
        config.design == DesignKind::Plastic
            ? recover_plastic(grid, metric, res.members, res.solution, config.mode)
            : recover_elastic(grid, metric, res.members, res.solution, config.mode, config.E0,
                              config.V0);
    rep.kept_members = static_cast<int64_t>(shell.members.size());
    rep.volume = shell.volume;
    // Max elevation over nodes of the structure (elevations of nodes no kept
    // member touches are not unique at the optimum and are not built anyway).
    std::vector<uint8_t> touched(static_cast<size_t>(grid.node_count()), 0);
    for (const auto& m : shell.members) {
        touched[static_cast<size_t>(m.node_minus)] = 1;
        touched[static_cast<size_t>(m.node_plus)] = 1;
    }
    for (int i = 0; i < grid.node_count(); ++i) {
        if (!touched[static_cast<size_t>(i)]) continue;
        const double dz = shell.nodes[static_cast<size_t>(i)].z() -
                          metric.z0(grid.nodes[static_cast<size_t>(i)]);
        rep.max_elevation = std::max(rep.max_elevation, std::abs(dz));
    }

    // Verification: discrete optimality, shell equilibrium, colinearity of
    // overlapping members, and the elastic-design identities.
    const double vtol = 100.0 * config.tol;
    check(rep.failures, res.solution.status == SolveStatus::Optimal,
          "final solve did not reach Optimal status");
    rep.kkt = kkt_residuals(res.program, res.solution);
    check(rep.failures, rep.kkt.max_all() <= vtol,
          "KKT residual " + fmt("%.3e", rep.kkt.max_all()) + " exceeds " + fmt("%.3e", vtol));
    rep.equilibrium = equilibrium_residual(shell, grid, f);
    check(rep.failures, rep.equilibrium <= vtol,
          "shell equilibrium residual " + fmt("%.3e", rep.equilibrium) + " exceeds " +
              fmt("%.3e", vtol));
    const ColinearityReport colin =
        colinearity_check(grid, metric, res.members, res.solution, config.tol_c);
    rep.colinearity = colin.max_dev;
    rep.colinearity_violations = static_cast<int64_t>(colin.violations.size());
    check(rep.failures, colin.violations.empty(),
          std::to_string(colin.violations.size()) +
              " members with non-colinear crossed nodes (max deviation " +
              fmt("%.3e", colin.max_dev) + ")");
    rep.gap_rel = res.solution.gap_rel;

    if (config.design == DesignKind::Elastic) {
        double vol = 0.0;
        for (const auto& m : shell.members) vol += m.area * m.l3d;
        check(rep.failures, std::abs(vol - config.V0) <= 1e-9 * config.V0,
              "elastic volume deviates from V0 by " +
                  fmt("%.3e", std::abs(vol - config.V0) / config.V0) + " (relative)");
        rep.strain = shell.strain;
        const Eigen::VectorXd strains = member_strains(shell);
        double dev = 0.0;
        for (Eigen::Index k = 0; k < strains.size(); ++k)
            dev = std::max(dev, std::abs(strains[k] - shell.strain));
        rep.strain_dev = dev / std::max(std::abs(shell.strain), 1e-300);
        check(rep.failures, rep.strain_dev <= 1e-6,
              "member strains deviate from the uniform value by " + fmt("%.3e", rep.strain_dev) +
                  " (relative)");
        rep.compliance = shell.compliance;
        rep.compliance_primal_val = compliance_primal(shell, grid, f);
        rep.compliance_dual_val = compliance_dual(shell);
        const double cref = std::max(std::abs(rep.compliance), 1e-300);
        check(rep.failures,
              std::abs(rep.compliance_primal_val - rep.compliance_dual_val) <= 1e-6 * cref,
              "compliance mismatch: primal " + fmt("%.12g", rep.compliance_primal_val) +
                  " vs dual " + fmt("%.12g", rep.compliance_dual_val));
    }
    rep.verified = rep.failures.empty();

    if (!config.mesh_path.empty()) export_mesh(shell, grid, f, config.mesh_path);

    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!config.report_path.empty()) {
        std::ofstream out(config.report_path, std::ios::binary);
        if (!out) throw Error("cannot write report file '" + config.report_path + "'");
        out << report_to_json(rep, config) << "\n";
    }
    say(report_summary_line(rep));
    for (const auto& w : rep.warnings) say("warning: " + w);
    for (const auto& fmsg : rep.failures) say("verification failure: " + fmsg);
    return rep;
}

void export_mesh(const GridShell& shell, const NodeGrid& grid, const Eigen::VectorXd& f,
                 const std::string& path) {
    std::ofstream obj(path, std::ios::binary);
    if (!obj) throw Error("cannot write mesh file '" + path + "'");
    char buf[160];
    for (const auto& p : shell.nodes) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", p.x(), p.y(), p.z());
        obj << buf;
    }
    for (const auto& m : shell.members) {
        std::snprintf(buf, sizeof(buf), "l %d %d\n", m.node_minus + 1, m.node_plus + 1);
        obj << buf;
    }
    obj.close();

    ojson side;
    side["format"] = "vaultopt-shell/1";
    side["mesh"] = path;
    side["h"] = grid.h;
    side["mode"] = shell.mode == Mode::Tension ? "tension" : "compression";
    side["design"] = shell.kind == DesignKind::Plastic ? "plastic" : "elastic";
    side["Z"] = shell.Z;
    side["volume"] = shell.volume;
    if (shell.kind == DesignKind::Elastic) {
        side["E0"] = shell.E0;
        side["V0"] = shell.V0;
        side["strain"] = shell.strain;
        side["compliance"] = shell.compliance;
    }
    ojson nodes = ojson::array();
    for (int i = 0; i < grid.node_count(); ++i) {
        const auto& p = shell.nodes[static_cast<size_t>(i)];
        ojson nj;
        nj["x"] = p.x();
        nj["y"] = p.y();
        nj["z"] = p.z();
        nj["support"] = grid.is_support[static_cast<size_t>(i)] != 0;
        const int32_t fi = grid.free_of_node[static_cast<size_t>(i)];
        nj["f"] = fi >= 0 ? f[fi] : 0.0;
        nodes.push_back(std::move(nj));
    }
    side["nodes"] = std::move(nodes);
    ojson members = ojson::array();
    for (const auto& m : shell.members) {
        ojson mj;
        mj["id"] = m.id;
        mj["i"] = m.node_minus;
        mj["j"] = m.node_plus;
        mj["force"] = m.s_hat;
        mj["area"] = m.area;
        mj["length"] = m.l3d;
        members.push_back(std::move(mj));
    }
    side["members"] = std::move(members);
    if (shell.kind == DesignKind::Elastic && shell.displacement.rows() == grid.node_count()) {
        ojson disp = ojson::array();
        for (Eigen::Index i = 0; i < shell.displacement.rows(); ++i)
            disp.push_back({shell.displacement(i, 0), shell.displacement(i, 1),
                            shell.displacement(i, 2)});
        side["displacement"] = std::move(disp);
    }
    std::ofstream sj(path + ".json", std::ios::binary);
    if (!sj) throw Error("cannot write sidecar file '" + path + ".json'");
    sj << side.dump(1, '\t') << "\n";
}

std::string report_to_json(const RunReport& report, const RunConfig& config) {
    ojson j;
    j["verified"] = report.verified;
    j["failures"] = report.failures;
    j["warnings"] = report.warnings;
    j["nodes"] = report.nodes;
    j["free_nodes"] = report.free_nodes;
    j["full_members"] = report.full_members;
    j["active_members"] = report.active_members;
    j["kept_members"] = report.kept_members;
    j["rounds"] = report.rounds;
    j["seconds"] = report.seconds;
    j["Z"] = report.Z;
    j["dual_objective"] = report.dual_obj;
    j["max_elevation"] = report.max_elevation;
    j["gap_rel"] = report.gap_rel;
    ojson kj;
    kj["two_point"] = report.kkt.two_point;
    kj["equilibrium_b"] = report.kkt.equilibrium_b;
    kj["equilibrium_d"] = report.kkt.equilibrium_d;
    kj["active_equality"] = report.kkt.active_equality;
    kj["q_identity"] = report.kkt.q_identity;
    kj["r_elimination"] = report.kkt.r_elimination;
    kj["gap"] = report.kkt.gap;
    kj["max"] = report.kkt.max_all();
    j["kkt"] = std::move(kj);
    j["shell_equilibrium"] = report.equilibrium;
    j["colinearity_max_dev"] = report.colinearity;
    j["colinearity_violations"] = report.colinearity_violations;
    j["volume"] = report.volume;
    if (config.design == DesignKind::Elastic) {
        j["strain"] = report.strain;
        j["strain_dev_rel"] = report.strain_dev;
        j["compliance"] = report.compliance;
        j["compliance_primal"] = report.compliance_primal_val;
        j["compliance_dual"] = report.compliance_dual_val;
    }
    ojson hist = ojson::array();
    for (const auto& r : report.history) {
        ojson rj;
        rj["round"] = r.round;
        rj["members"] = r.active_members;
        rj["iterations"] = r.solver_iterations;
        rj["Z"] = r.Z;
        rj["violations"] = r.violations;
        rj["worst_excess"] = r.worst_excess;
        rj["seconds"] = r.seconds;
        hist.push_back(std::move(rj));
    }
    j["history"] = std::move(hist);
    ojson cj;
    cj["h"] = config.h;
    cj["mode"] = config.mode == Mode::Tension ? "tension" : "compression";
    cj["design"] = config.design == DesignKind::Plastic ? "plastic" : "elastic";
    cj["tol"] = config.tol;
    cj["tol_v"] = config.tol_v;
    cj["eps_perturb"] = config.eps_perturb;
    j["config"] = std::move(cj);
    return j.dump(1, '\t');
}

std::string report_summary_line(const RunReport& report) {
    std::string line = "Z=" + fmt("%.6g", report.Z) + " max_z=" + fmt("%.6g", report.max_elevation) +
                       " members=" + std::to_string(report.active_members) + "/" +
                       std::to_string(report.full_members) +
                       " rounds=" + std::to_string(report.rounds) + " kkt=" +
                       fmt("%.2e", report.kkt.max_all()) + " time=" + fmt("%.2f", report.seconds) +
                       "s " + (report.verified ? "[verified]" : "[FAILED]");
    return line;
}

} // namespace vaultopt
