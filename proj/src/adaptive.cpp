#include "vaultopt/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <unordered_set>

#include "vaultopt/errors.hpp"

namespace vaultopt {

// Precedence: VAULTOPT_THREADS env var, then the requested count, then the
// hardware concurrency.
int resolve_threads(int requested) {
    if (const char* env = std::getenv("VAULTOPT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

// Cumulative pair-count balanced split of the outer node index range.
std::vector<int> balance_ranges(int nb, int threads) {
    std::vector<int> bounds{0};
    const double total = 0.5 * static_cast<double>(nb) * (nb - 1);
    double acc = 0.0;
    int next = 1;
    for (int i = 0; i < nb && next < threads; ++i) {
        acc += static_cast<double>(nb - 1 - i);
        if (acc >= total * next / threads) {
            bounds.push_back(i + 1);
            ++next;
        }
    }
    while (static_cast<int>(bounds.size()) < threads) bounds.push_back(nb);
    bounds.push_back(nb);
    return bounds;
}

} // namespace

std::vector<Violation> violation_scan(const NodeGrid& grid, const PolygonDomain& domain,
                                      const Metric& metric, const Eigen::VectorXd& u1,
                                      const Eigen::VectorXd& u2, const Eigen::VectorXd& w,
                                      const std::vector<Member>& active,
                                      const ScanOptions& options) {
    const int nb = static_cast<int>(grid.node_count());
    if (u1.size() != grid.free_count() || u2.size() != grid.free_count() ||
        w.size() != grid.free_count())
        throw Error("violation_scan: field size does not match the free node count");

    // Fields over all nodes; supports carry zero boundary values.
    std::vector<double> U1(static_cast<size_t>(nb), 0.0), U2(static_cast<size_t>(nb), 0.0),
        W(static_cast<size_t>(nb), 0.0);
    for (int i = 0; i < nb; ++i) {
        const int fi = grid.free_of_node[static_cast<size_t>(i)];
        if (fi >= 0) {
            U1[static_cast<size_t>(i)] = u1[fi];
            U2[static_cast<size_t>(i)] = u2[fi];
            W[static_cast<size_t>(i)] = w[fi];
        }
    }

    std::unordered_set<int64_t> active_ids;
    active_ids.reserve(active.size() * 2);
    for (const auto& mm : active) active_ids.insert(mm.id);

    const bool axis_only = options.ground == GroundStructure::AxisAligned;
    const bool check_containment = !domain.convex();
    const double seg_tol = 1e-12 * grid.h;
    const double eps = options.eps_perturb;
    const double one_tol = 1.0 + options.tol_v;
    const Eigen::Vector2d g = metric.grad_z0;

    const int threads = std::min<int>(resolve_threads(options.threads), std::max(nb - 1, 1));
    const std::vector<int> bounds = balance_ranges(nb, threads);
    std::vector<std::vector<Violation>> found(static_cast<size_t>(threads));

    const auto worker = [&](int t) {
        auto& out = found[static_cast<size_t>(t)];
        for (int i = bounds[static_cast<size_t>(t)]; i < bounds[static_cast<size_t>(t) + 1]; ++i) {
            const Vec2 pi = grid.nodes[static_cast<size_t>(i)];
            const double wi = W[static_cast<size_t>(i)];
            const double ui1 = U1[static_cast<size_t>(i)], ui2 = U2[static_cast<size_t>(i)];
            for (int j = i + 1; j < nb; ++j) {
                const double dx1 = grid.nodes[static_cast<size_t>(j)].x() - pi.x();
                const double dx2 = grid.nodes[static_cast<size_t>(j)].y() - pi.y();
                if (axis_only && std::min(dx1 * dx1, dx2 * dx2) >
                                     1e-24 * (dx1 * dx1 + dx2 * dx2))
                    continue;
                const double dW = W[static_cast<size_t>(j)] - wi;
                const double a = (U1[static_cast<size_t>(j)] - ui1) * dx1 +
                                 (U2[static_cast<size_t>(j)] - ui2) * dx2;
                const double gdx = g.x() * dx1 + g.y() * dx2;
                const double l2 = dx1 * dx1 + dx2 * dx2 + gdx * gdx;
                const double l = std::sqrt(l2);
                const double le = l - eps;
                const double lhs = 0.25 * dW * dW + (le / l) * a;
                if (lhs <= one_tol * le * le) continue;
                const int64_t id = pair_rank(i, j, nb);
                if (active_ids.count(id)) continue;
                if (check_containment &&
                    !domain.segment_in_closure(pi, grid.nodes[static_cast<size_t>(j)], seg_tol))
                    continue;
                out.push_back({id, lhs / (le * le) - 1.0});
            }
        }
    };

    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    std::vector<Violation> all;
    size_t total = 0;
    for (const auto& v : found) total += v.size();
    all.reserve(total);
    for (auto& v : found) all.insert(all.end(), v.begin(), v.end());
    // Already ordered by (i, j) == id within and across ranges.

    if (options.max_add > 0 && static_cast<int64_t>(all.size()) > options.max_add) {
        std::partial_sort(all.begin(), all.begin() + options.max_add, all.end(),
                          [](const Violation& x, const Violation& y) {
                              if (x.excess != y.excess) return x.excess > y.excess;
                              return x.id < y.id;
                          });
        all.resize(static_cast<size_t>(options.max_add));
        std::sort(all.begin(), all.end(),
                  [](const Violation& x, const Violation& y) { return x.id < y.id; });
    }
    return all;
}

AdaptiveResult member_adding_solve(const NodeGrid& grid, const PolygonDomain& domain,
                                   const Metric& metric, const Eigen::VectorXd& f,
                                   const AdaptiveOptions& options) {
    AdaptiveResult res;
    res.members = neighbor_members(grid, domain);
    if (options.scan.ground == GroundStructure::AxisAligned)
        res.members = archgrid_filter(res.members);
    if (res.members.empty()) throw EmptyActiveSet("initial ground structure is empty");

    double eps = options.eps_perturb;
    if (eps < 0.0) eps = 1e-7 * domain.diameter();
    ScanOptions scan = options.scan;

    // The perturbed program drives the adaptation (it breaks ties between
    // overlapping collinear chains); once its scan is clean the final active
    // set is re-solved unperturbed, so that the reported solution satisfies
    // the exact optimality relations the shell recovery relies on. A clean
    // perturbed scan stays clean unperturbed up to the field change, which
    // the closing scan verifies.
    bool exact_phase = eps == 0.0;
    for (int round = 0;; ++round) {
        if (round >= options.max_rounds)
            throw NonTermination("member adding did not converge within " +
                                 std::to_string(options.max_rounds) + " rounds");
        const auto t0 = std::chrono::steady_clock::now();
        const double eps_cur = exact_phase ? 0.0 : eps;
        scan.eps_perturb = eps_cur;
        res.program = assemble_program(grid, res.members, f, metric, eps_cur);
        res.solution = solve(res.program, options.solver);
        if (res.solution.status == SolveStatus::Infeasible ||
            res.solution.status == SolveStatus::NumericalFailure) {
            // A perturbed round never produces the final certificate — the
            // exact phase re-solves at eps=0 — so a stall whose best iterate
            // is still accurate enough to drive the violation scan only
            // warrants a warning. Exact rounds stay strict.
            const bool usable_stall =
                eps_cur > 0.0 && res.solution.status == SolveStatus::NumericalFailure &&
                res.solution.s.size() == static_cast<Eigen::Index>(res.members.size()) &&
                res.solution.pres <= 1e-4 && res.solution.dres <= 1e-4 &&
                res.solution.gap_rel <= 1e-4;
            if (!usable_stall)
                throw NumericalFailure("conic solve failed in member-adding round " +
                                       std::to_string(round) + " (active members " +
                                       std::to_string(res.members.size()) + ")");
            res.warnings.push_back("round " + std::to_string(round) +
                                   ": solver stalled near the optimum, using best iterate");
        }
        if (res.solution.status == SolveStatus::MaxIter)
            res.warnings.push_back("round " + std::to_string(round) +
                                   ": iteration limit reached, using best iterate");

        const std::vector<Violation> viol = violation_scan(
            grid, domain, metric, res.solution.u1, res.solution.u2, res.solution.w, res.members,
            scan);

        RoundInfo info;
        info.round = round;
        info.active_members = static_cast<int64_t>(res.members.size());
        info.violations = static_cast<int64_t>(viol.size());
        info.Z = res.solution.Z;
        info.solver_iterations = res.solution.iterations;
        info.status = res.solution.status;
        for (const auto& v : viol) info.worst_excess = std::max(info.worst_excess, v.excess);
        info.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back(info);
        if (options.on_round) options.on_round(info);

        if (viol.empty()) {
            if (exact_phase) break;
            exact_phase = true;
            continue;
        }

        const size_t old = res.members.size();
        res.members.reserve(old + viol.size());
        for (const auto& v : viol) res.members.push_back(make_member(grid, v.id));
        std::inplace_merge(res.members.begin(), res.members.begin() + static_cast<long>(old),
                           res.members.end(),
                           [](const Member& a, const Member& b) { return a.id < b.id; });
    }
    return res;
}

} // namespace vaultopt
