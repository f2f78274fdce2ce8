#include "vaultopt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

namespace vaultopt {

namespace {

double ring_signed_area(const std::vector<Vec2>& ring) {
    double a = 0.0;
    const size_t n = ring.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = ring[i];
        const Vec2& q = ring[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Key for merging geometrically coincident nodes: snap to a lattice of pitch
// `snap` and compare the 3x3 neighborhood of cells on lookup.
struct PointKey {
    int64_t ix, iy;
    bool operator==(const PointKey& o) const { return ix == o.ix && iy == o.iy; }
};
struct PointKeyHash {
    size_t operator()(const PointKey& k) const {
        return std::hash<int64_t>()(k.ix * 73856093LL ^ k.iy * 19349663LL);
    }
};

class PointDedup {
  public:
    explicit PointDedup(double tol) : tol_(tol) {}

    // Returns the index of an existing point within tol, or -1.
    int find(const std::vector<Vec2>& pts, const Vec2& p) const {
        const int64_t cx = static_cast<int64_t>(std::floor(p.x() / tol_));
        const int64_t cy = static_cast<int64_t>(std::floor(p.y() / tol_));
        for (int64_t dx = -1; dx <= 1; ++dx)
            for (int64_t dy = -1; dy <= 1; ++dy) {
                auto it = map_.find(PointKey{cx + dx, cy + dy});
                if (it == map_.end()) continue;
                for (int idx : it->second)
                    if ((pts[idx] - p).norm() <= tol_) return idx;
            }
        return -1;
    }

    void insert(const Vec2& p, int idx) {
        const PointKey k{static_cast<int64_t>(std::floor(p.x() / tol_)),
                         static_cast<int64_t>(std::floor(p.y() / tol_))};
        map_[k].push_back(idx);
    }

  private:
    double tol_;
    std::unordered_map<PointKey, std::vector<int>, PointKeyHash> map_;
};

} // namespace

PolygonDomain::PolygonDomain(std::vector<Vec2> outer, std::vector<std::vector<Vec2>> holes) {
    if (outer.size() < 3) throw Error("polygon outer ring needs at least 3 vertices");
    if (ring_signed_area(outer) < 0.0) std::reverse(outer.begin(), outer.end());
    rings_.push_back(std::move(outer));
    for (auto& h : holes) {
        if (h.size() < 3) throw Error("polygon hole needs at least 3 vertices");
        if (ring_signed_area(h) > 0.0) std::reverse(h.begin(), h.end());
        rings_.push_back(std::move(h));
    }

    bbox_lo_ = Vec2(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
    bbox_hi_ = -bbox_lo_;
    for (const auto& ring : rings_)
        for (const auto& v : ring) {
            bbox_lo_ = bbox_lo_.cwiseMin(v);
            bbox_hi_ = bbox_hi_.cwiseMax(v);
        }

    // Diameter = max pairwise vertex distance of the outer ring (exact for
    // polygons; used to scale absolute tolerances).
    diameter_ = 0.0;
    const auto& o = rings_[0];
    for (size_t i = 0; i < o.size(); ++i)
        for (size_t j = i + 1; j < o.size(); ++j)
            diameter_ = std::max(diameter_, (o[i] - o[j]).norm());

    // Convexity: no holes and all outer turns non-clockwise.
    convex_ = rings_.size() == 1;
    if (convex_) {
        const size_t n = o.size();
        const double tol = 1e-12 * diameter_ * diameter_;
        for (size_t i = 0; i < n; ++i) {
            const Vec2 e1 = o[(i + 1) % n] - o[i];
            const Vec2 e2 = o[(i + 2) % n] - o[(i + 1) % n];
            if (cross2(e1, e2) < -tol) {
                convex_ = false;
                break;
            }
        }
    }
}

PolygonDomain PolygonDomain::regular_polygon(int n_edges, double radius, double phase) {
    if (n_edges < 3) throw Error("regular polygon needs at least 3 edges");
    std::vector<Vec2> v(n_edges);
    for (int k = 0; k < n_edges; ++k) {
        const double a = phase + 2.0 * std::numbers::pi * k / n_edges;
        v[k] = Vec2(radius * std::cos(a), radius * std::sin(a));
    }
    return PolygonDomain(std::move(v));
}

PolygonDomain PolygonDomain::rectangle(double width, double height) {
    return PolygonDomain({Vec2(0, 0), Vec2(width, 0), Vec2(width, height), Vec2(0, height)});
}

bool PolygonDomain::inside_even_odd(const Vec2& p) const {
    // Even-odd ray casting over all rings; boundary handling is done by the
    // callers through boundary_distance.
    bool inside = false;
    for (const auto& ring : rings_) {
        const size_t n = ring.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = ring[j];
            const Vec2& b = ring[i];
            if ((b.y() > p.y()) != (a.y() > p.y())) {
                const double xint = b.x() + (p.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
                if (p.x() < xint) inside = !inside;
            }
        }
    }
    return inside;
}

double PolygonDomain::boundary_distance(const Vec2& p) const {
    double d = std::numeric_limits<double>::max();
    for (const auto& ring : rings_) {
        const size_t n = ring.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++)
            d = std::min(d, point_segment_distance(p, ring[j], ring[i]));
    }
    return d;
}

bool PolygonDomain::contains(const Vec2& p, double tol) const {
    if (boundary_distance(p) <= tol) return true;
    return inside_even_odd(p);
}

bool PolygonDomain::strictly_inside(const Vec2& p, double tol) const {
    if (boundary_distance(p) <= tol) return false;
    return inside_even_odd(p);
}

bool PolygonDomain::segment_in_closure(const Vec2& p, const Vec2& q, double tol) const {
    if (!contains(p, tol) || !contains(q, tol)) return false;
    if (convex_) return true;

    // Gather parameters where [p,q] meets any edge (including near-touches),
    // then require every sub-segment midpoint to lie in the closure. This is
    // robust against endpoints on the boundary and collinear overlaps.
    const Vec2 d = q - p;
    const double len = d.norm();
    if (len <= tol) return true;
    std::vector<double> ts{0.0, 1.0};
    for (const auto& ring : rings_) {
        const size_t n = ring.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = ring[j];
            const Vec2& b = ring[i];
            const Vec2 e = b - a;
            const double denom = cross2(d, e);
            if (std::abs(denom) > 1e-14 * len * e.norm()) {
                const double t = cross2(a - p, e) / denom;
                const double s = cross2(a - p, d) / denom;
                if (t > 0.0 && t < 1.0 && s > -1e-12 && s < 1.0 + 1e-12) ts.push_back(t);
            } else {
                // Near-parallel: project edge endpoints onto the segment if
                // they are close to it, splitting at potential touch points.
                for (const Vec2* v : {&a, &b}) {
                    const double t = (*v - p).dot(d) / (len * len);
                    if (t > 0.0 && t < 1.0 && point_segment_distance(*v, p, q) <= tol)
                        ts.push_back(t);
                }
            }
        }
    }
    std::sort(ts.begin(), ts.end());
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        if (ts[i + 1] - ts[i] < 1e-14) continue;
        const Vec2 mid = p + 0.5 * (ts[i] + ts[i + 1]) * d;
        if (!contains(mid, tol)) return false;
    }
    return true;
}

int64_t pair_rank(int i, int j, int nb) {
    if (i > j) std::swap(i, j);
    const int64_t ii = i, nn = nb;
    return ii * (2 * nn - ii - 1) / 2 + (j - i - 1);
}

void pair_unrank(int64_t k, int nb, int& i, int& j) {
    // Invert the triangular rank; the float seed is corrected by a short walk.
    const double nn = static_cast<double>(nb);
    int ii = static_cast<int>(std::floor(nn - 0.5 - std::sqrt((nn - 0.5) * (nn - 0.5) - 2.0 * static_cast<double>(k))));
    ii = std::max(0, ii - 2);
    while (pair_rank(ii + 1, ii + 2, nb) <= k && ii + 2 < nb) ++ii;
    i = ii;
    j = static_cast<int>(k - pair_rank(ii, ii + 1, nb)) + ii + 1;
}

namespace {

// Boundary node candidate with its position along the boundary for ordering.
struct BoundaryCandidate {
    Vec2 p;
    // (ring, edge, parameter) lexicographic arc key.
    int ring;
    int edge;
    double t;
};

bool arc_key_less(const BoundaryCandidate& a, const BoundaryCandidate& b) {
    if (a.ring != b.ring) return a.ring < b.ring;
    if (a.edge != b.edge) return a.edge < b.edge;
    return a.t < b.t;
}

} // namespace

NodeGrid build_grid(const PolygonDomain& domain, double h) {
    if (!(h > 0.0)) throw Error("grid spacing h must be positive");
    NodeGrid grid;
    grid.h = h;
    const double dedup_tol = 1e-9 * h;

    Vec2 lo, hi;
    domain.bounding_box(lo, hi);
    const auto jlo = [&](double v) { return static_cast<int64_t>(std::floor(v / h)) - 1; };
    const auto jhi = [&](double v) { return static_cast<int64_t>(std::ceil(v / h)) + 1; };

    // Interior lattice nodes, row-major by (x2, x1). A lattice point within
    // the dedup band of the boundary is treated as a boundary node and will
    // re-enter below through the lattice-line intersections.
    for (int64_t j2 = jlo(lo.y()); j2 <= jhi(hi.y()); ++j2) {
        for (int64_t j1 = jlo(lo.x()); j1 <= jhi(hi.x()); ++j1) {
            const Vec2 p(static_cast<double>(j1) * h, static_cast<double>(j2) * h);
            if (domain.strictly_inside(p, dedup_tol)) grid.nodes.push_back(p);
        }
    }
    grid.n_interior = static_cast<int>(grid.nodes.size());

    // Boundary nodes: polygon vertices plus lattice-line / boundary
    // intersections. When a lattice line runs along a whole edge, only the
    // overlap endpoints are kept (the relative interior is excluded).
    std::vector<BoundaryCandidate> cand;
    const auto& rings = domain.rings();
    for (int r = 0; r < static_cast<int>(rings.size()); ++r) {
        const auto& ring = rings[r];
        const int n = static_cast<int>(ring.size());
        for (int e = 0; e < n; ++e) {
            const Vec2 a = ring[e];
            const Vec2 b = ring[(e + 1) % n];
            cand.push_back({a, r, e, 0.0});
            const Vec2 d = b - a;
            const double elen = d.norm();
            // Vertical lattice lines x = j1*h.
            for (int axis = 0; axis < 2; ++axis) {
                const double da = axis == 0 ? d.x() : d.y();
                const double aa = axis == 0 ? a.x() : a.y();
                if (std::abs(da) <= 1e-14 * elen) {
                    // Edge parallel to this line family; if it lies on a
                    // lattice line its endpoints are already candidates.
                    continue;
                }
                const double t0 = (std::floor(std::min(aa, aa + da) / h) - 1);
                const double t1 = (std::ceil(std::max(aa, aa + da) / h) + 1);
                for (int64_t j = static_cast<int64_t>(t0); j <= static_cast<int64_t>(t1); ++j) {
                    const double c = static_cast<double>(j) * h;
                    const double t = (c - aa) / da;
                    if (t < -1e-12 || t > 1.0 + 1e-12) continue;
                    const double tc = std::clamp(t, 0.0, 1.0);
                    Vec2 p = a + tc * d;
                    // Strictly interior intersections lie exactly on the
                    // lattice line; store that coordinate exactly so that
                    // collinear lattice pairs have dx == 0 in doubles.
                    if (tc > 0.0 && tc < 1.0) p[axis] = c;
                    cand.push_back({p, r, e, tc});
                }
            }
        }
    }
    std::sort(cand.begin(), cand.end(), arc_key_less);

    PointDedup dedup(dedup_tol);
    for (int i = 0; i < grid.n_interior; ++i) dedup.insert(grid.nodes[i], i);
    for (const auto& c : cand) {
        if (dedup.find(grid.nodes, c.p) >= 0) continue;
        dedup.insert(c.p, static_cast<int>(grid.nodes.size()));
        grid.nodes.push_back(c.p);
    }

    const int nb = grid.node_count();
    const int n_boundary = nb - grid.n_interior;
    grid.is_boundary.assign(nb, 0);
    for (int i = grid.n_interior; i < nb; ++i) grid.is_boundary[i] = 1;
    grid.is_support = grid.is_boundary;

    if (grid.n_interior == 0)
        throw GridInfeasible("grid has no interior node (h too coarse for the domain)");
    if (n_boundary < 3) throw GridInfeasible("grid has fewer than 3 boundary nodes");

    // Interior nodes must sit strictly inside conv(boundary nodes).
    std::vector<Vec2> bpts(grid.nodes.begin() + grid.n_interior, grid.nodes.end());
    const auto hull = convex_hull(std::move(bpts));
    if (hull.size() < 3) throw GridInfeasible("boundary nodes are collinear");
    const double strict_tol = 1e-12 * domain.diameter();
    for (int i = 0; i < grid.n_interior; ++i) {
        if (hull_inner_distance(hull, grid.nodes[i]) <= strict_tol)
            throw GridInfeasible("interior node outside interior of conv(boundary nodes)");
    }

    grid.chi.clear();
    grid.free_of_node.assign(nb, -1);
    for (int i = 0; i < nb; ++i) {
        if (!grid.is_support[i]) {
            grid.free_of_node[i] = static_cast<int32_t>(grid.chi.size());
            grid.chi.push_back(i);
        }
    }
    return grid;
}

NodeGrid set_supports(const NodeGrid& grid, const PolygonDomain& domain,
                      const std::vector<int32_t>& support_nodes) {
    NodeGrid out = grid;
    const int nb = out.node_count();
    out.is_support.assign(nb, 0);
    std::vector<Vec2> pts;
    for (int32_t idx : support_nodes) {
        if (idx < 0 || idx >= nb) throw Error("support node index out of range");
        out.is_support[idx] = 1;
        pts.push_back(out.nodes[idx]);
    }
    const auto hull = convex_hull(std::move(pts));
    if (hull.size() < 3)
        throw SupportHullViolation("support hull has empty interior (fewer than 3 non-collinear supports)");
    // closure(domain) subset of conv(supports) iff every outer vertex is.
    const double tol = 1e-9 * domain.diameter();
    for (const auto& v : domain.outer()) {
        if (hull_inner_distance(hull, v) < -tol)
            throw SupportHullViolation("domain closure not contained in conv(support nodes)");
    }
    out.chi.clear();
    out.free_of_node.assign(nb, -1);
    for (int i = 0; i < nb; ++i) {
        if (!out.is_support[i]) {
            out.free_of_node[i] = static_cast<int32_t>(out.chi.size());
            out.chi.push_back(i);
        }
    }
    if (out.chi.empty()) throw GridInfeasible("every node is a support");
    return out;
}

Member make_member(const NodeGrid& grid, int64_t id) {
    int i, j;
    pair_unrank(id, grid.node_count(), i, j);
    Member m;
    m.id = id;
    m.i_minus = i;
    m.i_plus = j;
    const Vec2 d = grid.nodes[j] - grid.nodes[i];
    m.length = d.norm();
    m.cos1 = d.x() / m.length;
    m.cos2 = d.y() / m.length;
    return m;
}

std::vector<Member> neighbor_members(const NodeGrid& grid, const PolygonDomain& domain) {
    const double h = grid.h;
    const double reach = h * (1.0 + 1e-9);
    const double seg_tol = 1e-12 * h;
    const int nb = grid.node_count();

    // Spatial hash on cells of size h; each pair is visited once via index
    // ordering inside the 3x3 cell neighborhood.
    std::unordered_map<PointKey, std::vector<int>, PointKeyHash> cells;
    const auto cell_of = [&](const Vec2& p) {
        return PointKey{static_cast<int64_t>(std::floor(p.x() / h)),
                        static_cast<int64_t>(std::floor(p.y() / h))};
    };
    for (int i = 0; i < nb; ++i) cells[cell_of(grid.nodes[i])].push_back(i);

    std::vector<Member> out;
    const bool convex = domain.convex();
    for (int i = 0; i < nb; ++i) {
        const PointKey c = cell_of(grid.nodes[i]);
        for (int64_t dx = -2; dx <= 2; ++dx)
            for (int64_t dy = -2; dy <= 2; ++dy) {
                auto it = cells.find(PointKey{c.ix + dx, c.iy + dy});
                if (it == cells.end()) continue;
                for (int j : it->second) {
                    if (j <= i) continue;
                    const Vec2 d = grid.nodes[j] - grid.nodes[i];
                    if (std::abs(d.x()) > reach || std::abs(d.y()) > reach) continue;
                    if (!convex && !domain.segment_in_closure(grid.nodes[i], grid.nodes[j], seg_tol))
                        continue;
                    Member m;
                    m.id = pair_rank(i, j, nb);
                    m.i_minus = i;
                    m.i_plus = j;
                    m.length = d.norm();
                    m.cos1 = d.x() / m.length;
                    m.cos2 = d.y() / m.length;
                    out.push_back(m);
                }
            }
    }
    std::sort(out.begin(), out.end(), [](const Member& a, const Member& b) { return a.id < b.id; });
    return out;
}

std::vector<Member> full_members(const NodeGrid& grid, const PolygonDomain& domain,
                                 int64_t max_members) {
    const int64_t total = grid.full_member_count();
    if (total > max_members)
        throw Error("full ground structure too large to materialize explicitly");
    const bool convex = domain.convex();
    const double seg_tol = 1e-12 * grid.h;
    std::vector<Member> out;
    out.reserve(static_cast<size_t>(total));
    const int nb = grid.node_count();
    for (int i = 0; i < nb; ++i) {
        for (int j = i + 1; j < nb; ++j) {
            if (!convex && !domain.segment_in_closure(grid.nodes[i], grid.nodes[j], seg_tol))
                continue;
            Member m;
            m.id = pair_rank(i, j, nb);
            m.i_minus = i;
            m.i_plus = j;
            const Vec2 d = grid.nodes[j] - grid.nodes[i];
            m.length = d.norm();
            m.cos1 = d.x() / m.length;
            m.cos2 = d.y() / m.length;
            out.push_back(m);
        }
    }
    return out;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) { return a == b; }),
              pts.end());
    const int n = static_cast<int>(pts.size());
    if (n < 3) return pts;
    std::vector<Vec2> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (int i = n - 2, t = k + 1; i >= 0; --i) {
        while (k >= t && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double hull_inner_distance(const std::vector<Vec2>& hull, const Vec2& p) {
    double d = std::numeric_limits<double>::max();
    const size_t n = hull.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % n];
        const Vec2 e = b - a;
        d = std::min(d, cross2(e, p - a) / e.norm());
    }
    return d;
}

} // namespace vaultopt
