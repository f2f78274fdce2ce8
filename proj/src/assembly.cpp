#include "vaultopt/assembly.hpp"

#include <cmath>
#include <unordered_map>

namespace vaultopt {

double member_length(const Member& m, const NodeGrid& grid, const Metric& metric) {
    const Vec2 dx = grid.nodes[m.i_plus] - grid.nodes[m.i_minus];
    return metric.length(dx);
}

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

} // namespace

Eigen::VectorXd discretize_load(const LoadSpec& spec, const NodeGrid& grid,
                                std::vector<std::string>* warnings) {
    const int nb = grid.node_count();
    const double h = grid.h;
    const double tol = 1e-9 * h;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(grid.free_count());
    const auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    double area_total = 0.0;
    for (double v : spec.area_loads) area_total += v;
    if (area_total != 0.0) {
        for (int i = 0; i < grid.free_count(); ++i) f[i] += area_total * h * h;
    }

    for (const auto& ll : spec.line_loads) {
        const Vec2 d = ll.to - ll.from;
        const double len = d.norm();
        if (len <= tol) throw Error("line load segment has zero length");
        const Vec2 u = d / len;
        double per_node;
        if (std::abs(u.x()) <= 1e-12 || std::abs(u.y()) <= 1e-12) {
            per_node = ll.intensity * h;
        } else if (std::abs(std::abs(u.x()) - std::abs(u.y())) <= 1e-12) {
            per_node = ll.intensity * std::sqrt(2.0) * h;
        } else {
            throw Error("line loads are only supported along lattice axes or +-45 degree diagonals");
        }
        for (int i = 0; i < nb; ++i) {
            if (point_segment_distance(grid.nodes[i], ll.from, ll.to) > tol) continue;
            if (grid.is_support[i]) {
                warn("line load contribution at a support node dropped");
                continue;
            }
            f[grid.free_of_node[i]] += per_node;
        }
    }

    for (const auto& pl : spec.point_loads) {
        int found = -1;
        double best = tol;
        for (int i = 0; i < nb; ++i) {
            const double dist = (grid.nodes[i] - pl.at).norm();
            if (dist <= best) {
                best = dist;
                found = i;
            }
        }
        if (found < 0) throw LoadOffNode("point load does not coincide with a grid node");
        if (grid.is_support[found]) {
            warn("point load on a support node dropped");
            continue;
        }
        f[grid.free_of_node[found]] += pl.magnitude;
    }
    return f;
}

ConicProgram assemble_program(const NodeGrid& grid, const std::vector<Member>& members,
                              const Eigen::VectorXd& f, const Metric& metric,
                              double eps_perturb) {
    if (members.empty()) throw EmptyActiveSet("assemble_program: empty active member set");
    if (f.size() != grid.free_count()) throw Error("load vector length does not match free node count");

    ConicProgram p;
    p.n_free = grid.free_count();
    p.f = f;
    p.eps_perturb = eps_perturb;
    p.metric = metric;
    p.rows.reserve(members.size());
    for (const auto& m : members) {
        ProgramRow row;
        row.id = m.id;
        row.free_minus = grid.free_of_node[m.i_minus];
        row.free_plus = grid.free_of_node[m.i_plus];
        const Vec2 dx = grid.nodes[m.i_plus] - grid.nodes[m.i_minus];
        row.l = metric.length(dx);
        row.l_eff = row.l - eps_perturb;
        if (row.l_eff <= 0.0) throw Error("eps_perturb exceeds a member length");
        row.c1 = dx.x() / row.l;
        row.c2 = dx.y() / row.l;
        p.rows.push_back(row);
    }
    return p;
}

std::vector<Member> archgrid_filter(const std::vector<Member>& members) {
    std::vector<Member> out;
    out.reserve(members.size());
    for (const auto& m : members) {
        if (std::abs(m.cos1) <= 1e-12 || std::abs(m.cos2) <= 1e-12) out.push_back(m);
    }
    return out;
}

} // namespace vaultopt
