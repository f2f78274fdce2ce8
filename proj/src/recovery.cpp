#include "vaultopt/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "vaultopt/errors.hpp"

namespace vaultopt {

namespace {

// Elevation of every grid node: z0 on supports, z0 +- w/2 on free nodes.
std::vector<Eigen::Vector3d> elevate(const NodeGrid& grid, const Metric& metric,
                                     const SocpSolution& sol, double half_sign) {
    std::vector<Eigen::Vector3d> out(grid.nodes.size());
    for (size_t i = 0; i < grid.nodes.size(); ++i) {
        const Vec2 p = grid.nodes[i];
        double z = metric.z0(p);
        const int fi = grid.free_of_node[i];
        if (fi >= 0) z += half_sign * 0.5 * sol.w[fi];
        out[i] = Eigen::Vector3d(p.x(), p.y(), z);
    }
    return out;
}

// Shared geometry pass: build kept members with their true lengths. Areas are
// filled by the caller (they differ between the design kinds). Returns the
// recovered-volume sum s * l3d^2 / l_metric.
double build_members(GridShell& shell, const Metric& metric, const std::vector<Member>& members,
                     const SocpSolution& sol, double force_sign, double drop_rel) {
    double z_vol = 0.0;
    const double smax = sol.s.size() > 0 ? sol.s.maxCoeff() : 0.0;
    const double drop = drop_rel * std::max(smax, 0.0);
    shell.members.reserve(members.size());
    for (size_t k = 0; k < members.size(); ++k) {
        const double s = sol.s[static_cast<int64_t>(k)];
        if (!(s > drop) || smax <= 0.0) continue;
        const Member& mm = members[k];
        Member3D m3;
        m3.id = mm.id;
        m3.node_minus = mm.i_minus;
        m3.node_plus = mm.i_plus;
        m3.s = s;
        const Eigen::Vector3d d = shell.nodes[static_cast<size_t>(mm.i_plus)] -
                                  shell.nodes[static_cast<size_t>(mm.i_minus)];
        m3.l3d = d.norm();
        m3.l_metric = metric.length(Vec2(d.x(), d.y()));
        m3.s_hat = force_sign * s * m3.l3d / m3.l_metric;
        z_vol += s * m3.l3d * m3.l3d / m3.l_metric;
        shell.members.push_back(m3);
    }
    return z_vol;
}

} // namespace

GridShell recover_plastic(const NodeGrid& grid, const Metric& metric,
                          const std::vector<Member>& members, const SocpSolution& sol, Mode mode,
                          double drop_rel) {
    if (static_cast<int64_t>(members.size()) != sol.s.size())
        throw Error("recover_plastic: member/solution size mismatch");
    GridShell shell;
    shell.mode = mode;
    shell.kind = DesignKind::Plastic;
    shell.Z = sol.Z;
    const double half_sign = mode == Mode::Tension ? 1.0 : -1.0;
    const double force_sign = mode == Mode::Tension ? 1.0 : -1.0;
    shell.nodes = elevate(grid, metric, sol, half_sign);
    shell.Z_vol = build_members(shell, metric, members, sol, force_sign, drop_rel);
    // Unit stress bound: area = |axial force|, so member volume = |s_hat| l3d.
    double vol = 0.0;
    for (auto& m3 : shell.members) {
        m3.area = std::abs(m3.s_hat);
        vol += m3.area * m3.l3d;
    }
    shell.volume = vol;
    return shell;
}

GridShell recover_elastic(const NodeGrid& grid, const Metric& metric,
                          const std::vector<Member>& members, const SocpSolution& sol, Mode mode,
                          double E0, double V0, double drop_rel) {
    if (static_cast<int64_t>(members.size()) != sol.s.size())
        throw Error("recover_elastic: member/solution size mismatch");
    if (!(E0 > 0.0) || !(V0 > 0.0)) throw Error("recover_elastic: E0 and V0 must be positive");
    GridShell shell;
    shell.mode = mode;
    shell.kind = DesignKind::Elastic;
    shell.Z = sol.Z;
    shell.E0 = E0;
    shell.V0 = V0;
    const double half_sign = mode == Mode::Tension ? 1.0 : -1.0;
    const double force_sign = mode == Mode::Tension ? 1.0 : -1.0;
    shell.nodes = elevate(grid, metric, sol, half_sign);
    shell.Z_vol = build_members(shell, metric, members, sol, force_sign, drop_rel);
    if (!(shell.Z_vol > 0.0))
        throw DegenerateDesign("elastic recovery needs a nonzero optimal design");
    // Areas scaled so the material budget V0 is met exactly; the resulting
    // shell carries f at the uniform strain +-Z_vol / (E0 V0).
    const double scale = V0 / shell.Z_vol;
    for (auto& m3 : shell.members) m3.area = scale * m3.s * m3.l3d / m3.l_metric;
    shell.volume = V0;
    shell.strain = force_sign * shell.Z_vol / (E0 * V0);
    shell.compliance = shell.Z_vol * shell.Z_vol / (2.0 * E0 * V0);
    shell.compliance_work = 0.5 * std::abs(shell.strain) * sol.dual_obj;
    shell.displacement.resize(static_cast<Eigen::Index>(grid.nodes.size()), 3);
    shell.displacement.setZero();
    for (size_t i = 0; i < grid.nodes.size(); ++i) {
        const int fi = grid.free_of_node[i];
        if (fi < 0) continue;
        shell.displacement(static_cast<Eigen::Index>(i), 0) = shell.strain * sol.u1[fi];
        shell.displacement(static_cast<Eigen::Index>(i), 1) = shell.strain * sol.u2[fi];
        shell.displacement(static_cast<Eigen::Index>(i), 2) = std::abs(shell.strain) * sol.w[fi];
    }
    return shell;
}

double equilibrium_residual(const GridShell& shell, const NodeGrid& grid,
                            const Eigen::VectorXd& f) {
    if (f.size() != grid.free_count())
        throw Error("equilibrium_residual: load size does not match the free node count");
    Eigen::MatrixX3d acc(static_cast<Eigen::Index>(grid.nodes.size()), 3);
    acc.setZero();
    for (const auto& m3 : shell.members) {
        const Eigen::Vector3d d =
            shell.nodes[static_cast<size_t>(m3.node_plus)] - shell.nodes[static_cast<size_t>(m3.node_minus)];
        // force applied by the member on its end nodes (tension pulls in)
        const Eigen::Vector3d on_plus = -m3.s_hat / m3.l3d * d;
        acc.row(m3.node_plus) += on_plus.transpose();
        acc.row(m3.node_minus) -= on_plus.transpose();
    }
    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (size_t i = 0; i < grid.nodes.size(); ++i) {
        const int fi = grid.free_of_node[i];
        if (fi < 0) continue;
        Eigen::Vector3d r = acc.row(static_cast<Eigen::Index>(i)).transpose();
        r.z() += f[fi];
        worst = std::max(worst, r.norm() / scale);
    }
    return worst;
}

Eigen::VectorXd member_strains(const GridShell& shell) {
    if (shell.kind != DesignKind::Elastic)
        throw Error("member_strains: shell carries no displacement field");
    Eigen::VectorXd out(static_cast<Eigen::Index>(shell.members.size()));
    for (size_t k = 0; k < shell.members.size(); ++k) {
        const auto& m3 = shell.members[k];
        const Eigen::Vector3d d = shell.nodes[static_cast<size_t>(m3.node_plus)] -
                                  shell.nodes[static_cast<size_t>(m3.node_minus)];
        const Eigen::Vector3d du = (shell.displacement.row(m3.node_plus) -
                                    shell.displacement.row(m3.node_minus))
                                       .transpose();
        out[static_cast<Eigen::Index>(k)] = du.dot(d) / (m3.l3d * m3.l3d);
    }
    return out;
}

Eigen::VectorXd axial_strain(const GridShell& shell, const NodeGrid& grid,
                             const Eigen::VectorXd& u1, const Eigen::VectorXd& u2,
                             const Eigen::VectorXd& w) {
    if (u1.size() != grid.free_count() || u2.size() != grid.free_count() ||
        w.size() != grid.free_count())
        throw Error("axial_strain: field size does not match the free node count");
    Eigen::VectorXd out(static_cast<Eigen::Index>(shell.members.size()));
    const auto field = [&](int node, int comp) -> double {
        const int fi = grid.free_of_node[static_cast<size_t>(node)];
        if (fi < 0) return 0.0;
        return comp == 0 ? u1[fi] : comp == 1 ? u2[fi] : w[fi];
    };
    for (size_t k = 0; k < shell.members.size(); ++k) {
        const auto& m3 = shell.members[k];
        const Eigen::Vector3d d = shell.nodes[static_cast<size_t>(m3.node_plus)] -
                                  shell.nodes[static_cast<size_t>(m3.node_minus)];
        const double du1 = field(m3.node_plus, 0) - field(m3.node_minus, 0);
        const double du2 = field(m3.node_plus, 1) - field(m3.node_minus, 1);
        const double dw = field(m3.node_plus, 2) - field(m3.node_minus, 2);
        out[static_cast<Eigen::Index>(k)] =
            (du1 * d.x() + du2 * d.y() + dw * d.z()) / (m3.l3d * m3.l3d);
    }
    return out;
}

double compliance_primal(const GridShell& shell, const NodeGrid& grid, const Eigen::VectorXd& f) {
    if (shell.kind != DesignKind::Elastic)
        throw Error("compliance_primal: not an elastic design");
    if (f.size() != grid.free_count())
        throw Error("compliance_primal: load size does not match the free node count");
    double work = 0.0;
    for (size_t i = 0; i < grid.nodes.size(); ++i) {
        const int fi = grid.free_of_node[i];
        if (fi >= 0) work += f[fi] * shell.displacement(static_cast<Eigen::Index>(i), 2);
    }
    const Eigen::VectorXd e = member_strains(shell);
    double energy = 0.0;
    for (size_t k = 0; k < shell.members.size(); ++k) {
        const double ek = e[static_cast<Eigen::Index>(k)];
        // only strains of the working sign store energy in a one-signed design
        const double es = shell.mode == Mode::Tension ? std::max(ek, 0.0) : std::min(ek, 0.0);
        energy += es * es * shell.members[k].area * shell.members[k].l3d;
    }
    return work - 0.5 * shell.E0 * energy;
}

double compliance_dual(const GridShell& shell) {
    if (shell.kind != DesignKind::Elastic)
        throw Error("compliance_dual: not an elastic design");
    double acc = 0.0;
    for (const auto& m3 : shell.members)
        if (m3.area > 0.0) acc += m3.s_hat * m3.s_hat / m3.area * m3.l3d;
    return acc / (2.0 * shell.E0);
}

namespace {

// Cell hash over node positions; returns interior nodes lying on segment
// [a, b] as (t, node index) sorted by the segment parameter t.
class NodeOnSegment {
  public:
    NodeOnSegment(const NodeGrid& grid) : grid_(grid), h_(grid.h) {
        cells_.reserve(grid.nodes.size() * 2);
        for (size_t i = 0; i < grid.nodes.size(); ++i)
            cells_[key(cell(grid.nodes[i].x()), cell(grid.nodes[i].y()))].push_back(
                static_cast<int>(i));
    }

    std::vector<std::pair<double, int>> crossed(int node_a, int node_b) const {
        const Vec2 a = grid_.nodes[static_cast<size_t>(node_a)];
        const Vec2 b = grid_.nodes[static_cast<size_t>(node_b)];
        const Vec2 d = b - a;
        const double len2 = d.squaredNorm();
        const double on_tol = 1e-9 * h_;
        std::vector<int> cand;
        const int steps = static_cast<int>(std::ceil(std::sqrt(len2) / h_)) + 1;
        int last_cx = INT32_MIN, last_cy = INT32_MIN;
        for (int st = 0; st <= steps; ++st) {
            const Vec2 p = a + (static_cast<double>(st) / steps) * d;
            const int cx = cell(p.x()), cy = cell(p.y());
            if (cx == last_cx && cy == last_cy) continue;
            last_cx = cx;
            last_cy = cy;
            for (int ox = -1; ox <= 1; ++ox)
                for (int oy = -1; oy <= 1; ++oy) {
                    const auto it = cells_.find(key(cx + ox, cy + oy));
                    if (it == cells_.end()) continue;
                    cand.insert(cand.end(), it->second.begin(), it->second.end());
                }
        }
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        std::vector<std::pair<double, int>> out;
        for (const int ni : cand) {
            if (ni == node_a || ni == node_b) continue;
            const Vec2 p = grid_.nodes[static_cast<size_t>(ni)];
            const double t = (p - a).dot(d) / len2;
            if (t <= on_tol || t >= 1.0 - on_tol) continue;
            if ((p - (a + t * d)).norm() > on_tol) continue;
            out.emplace_back(t, ni);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    static int64_t key(int cx, int cy) { return (static_cast<int64_t>(cx) << 32) ^ (cy & 0xffffffffLL); }
    int cell(double v) const { return static_cast<int>(std::floor(v / h_)); }

    const NodeGrid& grid_;
    double h_;
    std::unordered_map<int64_t, std::vector<int>> cells_;
};

} // namespace

ColinearityReport colinearity_check(const NodeGrid& grid, const Metric& metric,
                                    const std::vector<Member>& members, const SocpSolution& sol,
                                    double tol_c, double active_rel) {
    if (static_cast<int64_t>(members.size()) != sol.s.size())
        throw Error("colinearity_check: member/solution size mismatch");
    ColinearityReport rep;
    const double smax = sol.s.size() > 0 ? sol.s.maxCoeff() : 0.0;
    if (!(smax > 0.0)) return rep;
    const double thr = active_rel * smax;
    const NodeOnSegment finder(grid);
    const auto w_at = [&](int node) {
        const int fi = grid.free_of_node[static_cast<size_t>(node)];
        return fi >= 0 ? sol.w[fi] : 0.0;
    };
    for (size_t k = 0; k < members.size(); ++k) {
        if (!(sol.s[static_cast<int64_t>(k)] > thr)) continue;
        const Member& mm = members[k];
        const auto crossed = finder.crossed(mm.i_minus, mm.i_plus);
        if (crossed.empty()) continue;
        ++rep.spanning;
        // chain of nodes along the member, endpoints included
        std::vector<int> chain;
        chain.reserve(crossed.size() + 2);
        chain.push_back(mm.i_minus);
        for (const auto& [t, ni] : crossed) chain.push_back(ni);
        chain.push_back(mm.i_plus);
        double prev_rate = 0.0;
        double worst = 0.0;
        for (size_t j = 0; j + 1 < chain.size(); ++j) {
            const Vec2 d = grid.nodes[static_cast<size_t>(chain[j + 1])] -
                           grid.nodes[static_cast<size_t>(chain[j])];
            const double rate = (w_at(chain[j + 1]) - w_at(chain[j])) / metric.length(d);
            if (j > 0) {
                worst = std::max(worst, std::abs(rate - prev_rate));
                ++rep.checked;
            }
            prev_rate = rate;
        }
        rep.max_dev = std::max(rep.max_dev, worst);
        if (worst > tol_c) rep.violations.push_back({mm.id, worst});
    }
    return rep;
}

} // namespace vaultopt
