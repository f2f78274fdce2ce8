#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vaultopt/errors.hpp"

namespace vaultopt {

using Vec2 = Eigen::Vector2d;

// Planar polygonal domain: one outer ring, optional holes. Rings are stored
// counter-clockwise (outer) / clockwise (holes); orientation is normalized on
// construction. Curved domains are handled by fine polygonal approximation.
class PolygonDomain {
  public:
    PolygonDomain(std::vector<Vec2> outer, std::vector<std::vector<Vec2>> holes = {});

    // Regular N-gon inscribed in the circle of radius r about the origin,
    // vertex 0 at angle `phase`.
    static PolygonDomain regular_polygon(int n_edges, double radius, double phase = 0.0);
    static PolygonDomain rectangle(double width, double height);

    const std::vector<std::vector<Vec2>>& rings() const { return rings_; }
    const std::vector<Vec2>& outer() const { return rings_[0]; }

    bool convex() const { return convex_; }
    double diameter() const { return diameter_; }
    void bounding_box(Vec2& lo, Vec2& hi) const { lo = bbox_lo_; hi = bbox_hi_; }

    // Point classification. `tol` is the half-width of the boundary band;
    // points within it count as boundary.
    bool contains(const Vec2& p, double tol) const;          // closure
    bool strictly_inside(const Vec2& p, double tol) const;   // open interior
    double boundary_distance(const Vec2& p) const;           // unsigned

    // True iff the closed segment [p,q] stays inside closure(domain).
    // Boundary-grazing segments (within `tol` of an edge) count as inside.
    bool segment_in_closure(const Vec2& p, const Vec2& q, double tol) const;

  private:
    bool inside_even_odd(const Vec2& p) const;

    std::vector<std::vector<Vec2>> rings_; // rings_[0] = outer
    bool convex_ = false;
    double diameter_ = 0.0;
    Vec2 bbox_lo_, bbox_hi_;
};

// Node set X of the ground structure: the square lattice of spacing h clipped
// to the open domain, plus all intersections of lattice lines with the
// boundary and all polygon vertices. Interior nodes come first in row-major
// (x2, then x1) order; boundary nodes follow, sorted by arc position along
// the boundary rings. By default every boundary node is a support.
struct NodeGrid {
    double h = 0.0;
    std::vector<Vec2> nodes;
    std::vector<uint8_t> is_boundary;
    std::vector<uint8_t> is_support;
    // chi: free index -> node index (free = not a support); inverse map holds
    // -1 at support nodes.
    std::vector<int32_t> chi;
    std::vector<int32_t> free_of_node;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int interior_count() const { return n_interior; }
    int free_count() const { return static_cast<int>(chi.size()); }
    int n_interior = 0;

    // Number of members of the full ground structure (all unordered pairs).
    int64_t full_member_count() const {
        const int64_t nb = node_count();
        return nb * (nb - 1) / 2;
    }
};

// Rank of the unordered pair {i < j} in lexicographic enumeration of all
// pairs over nb nodes, and its inverse. Ranks exceed 32 bits for large grids.
int64_t pair_rank(int i, int j, int nb);
void pair_unrank(int64_t k, int nb, int& i, int& j);

// One potential bar of the ground structure. cos1/cos2 are Euclidean
// direction cosines of x(i_plus) - x(i_minus); length is Euclidean.
struct Member {
    int64_t id = 0; // pair_rank(i_minus, i_plus)
    int32_t i_minus = 0, i_plus = 0;
    double length = 0.0;
    double cos1 = 0.0, cos2 = 0.0;
};

// Build the node grid. Throws GridInfeasible if there is no interior node or
// an interior node is not strictly inside conv(boundary nodes).
NodeGrid build_grid(const PolygonDomain& domain, double h);

// Replace the default support set (all boundary nodes) by the given node
// indices. Verifies closure(domain) subset of conv(supports); throws
// SupportHullViolation otherwise. All other nodes become free.
NodeGrid set_supports(const NodeGrid& grid, const PolygonDomain& domain,
                      const std::vector<int32_t>& support_nodes);

// Members whose endpoints are Chebyshev neighbors (|dx|_inf <= h, up to a
// 1e-9 relative slack). For nonconvex domains, pairs whose segment leaves the
// closure are skipped. Sorted by id.
std::vector<Member> neighbor_members(const NodeGrid& grid, const PolygonDomain& domain);

// Materialize an explicit member from its pair id.
Member make_member(const NodeGrid& grid, int64_t id);

// Materialize the full ground structure (guarded; intended for small
// reference instances). Throws Error if the count exceeds `max_members`.
std::vector<Member> full_members(const NodeGrid& grid, const PolygonDomain& domain,
                                 int64_t max_members = 20'000'000);

// Convex hull (Andrew monotone chain), CCW, no repeated last point.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

// Signed distance of p inside hull: min over hull edges of the inward
// distance (positive = strictly inside). Hull must be CCW.
double hull_inner_distance(const std::vector<Vec2>& hull, const Vec2& p);

} // namespace vaultopt
