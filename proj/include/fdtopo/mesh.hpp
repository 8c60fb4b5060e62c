#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace fdtopo {

/// Axis-aligned hold-all rectangle D.
struct Rect {
    double x_min = 0.0;
    double x_max = 1.0;
    double y_min = 0.0;
    double y_max = 1.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
};

/// Labels for the three parts of the hold-all boundary.
/// Every boundary edge carries exactly one; Sigma is the free remainder.
enum class BoundaryLabel { SigmaD, GammaN, Sigma };

enum class Side { Left, Right, Bottom, Top };

inline const char* to_string(BoundaryLabel l) {
    switch (l) {
        case BoundaryLabel::SigmaD: return "SigmaD";
        case BoundaryLabel::GammaN: return "GammaN";
        default: return "Sigma";
    }
}

inline const char* to_string(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Bottom: return "bottom";
        default: return "top";
    }
}

/// A labeled interval on one side of the rectangle. The interval runs along
/// the side's tangential coordinate (y on left/right, x on bottom/top) and
/// must align with grid lines of the structured mesh.
struct BoundarySpec {
    BoundaryLabel label = BoundaryLabel::Sigma;
    Side side = Side::Left;
    double lo = 0.0;
    double hi = 0.0;
};

struct Triangle {
    std::array<int, 3> v{};  // counterclockwise vertex ids
};

struct Edge {
    int a = -1;  // a < b
    int b = -1;
};

struct BoundaryEdge {
    int edge_id = -1;
    int v0 = -1;
    int v1 = -1;
    int midpoint_node = -1;
    Side side = Side::Left;
    BoundaryLabel label = BoundaryLabel::Sigma;
    Eigen::Vector2d normal{0.0, 0.0};  // outward unit normal
};

/// Structured triangulation of a rectangle. Cells are split into two
/// triangles with alternating diagonals so that meshes of symmetric
/// rectangles with even n_x are invariant under x -> -x.
/// Immutable after construction; safe for concurrent reads.
class Mesh {
  public:
    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int triangle_count() const { return static_cast<int>(triangles_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    /// P2 nodes = vertices followed by one midpoint node per edge.
    int p2_node_count() const { return vertex_count() + edge_count(); }

    const Rect& rect() const { return rect_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }

    const Eigen::Vector2d& vertex(int i) const { return vertices_[i]; }
    const std::vector<Eigen::Vector2d>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<Edge>& edges() const { return edges_; }

    /// P2 nodes of triangle t: [v0, v1, v2, m01, m12, m20].
    const std::array<int, 6>& p2_nodes(int t) const { return tri_p2_[t]; }

    Eigen::Vector2d p2_coord(int node) const {
        if (node < vertex_count()) return vertices_[node];
        const Edge& e = edges_[node - vertex_count()];
        return 0.5 * (vertices_[e.a] + vertices_[e.b]);
    }

    double area(int t) const { return tri_area_[t]; }
    double total_area() const { return total_area_; }

    /// Gradients of the three barycentric coordinates of triangle t
    /// (constant over the triangle).
    const std::array<Eigen::Vector2d, 3>& barycentric_gradients(int t) const {
        return tri_gradL_[t];
    }

    int midpoint_node(int edge_id) const { return vertex_count() + edge_id; }

    /// Edge id between two vertices, or -1 if they are not connected.
    int edge_between(int a, int b) const {
        if (a > b) std::swap(a, b);
        auto it = edge_index_.find(edge_key(a, b));
        return it == edge_index_.end() ? -1 : it->second;
    }

    /// All boundary edges carrying the given label, with outward normals.
    std::vector<BoundaryEdge> boundary_edges(BoundaryLabel label) const {
        std::vector<BoundaryEdge> out;
        for (const BoundaryEdge& be : boundary_) {
            if (be.label == label) out.push_back(be);
        }
        return out;
    }

    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }

    /// Vertex ids lying on edges with the given label (each listed once,
    /// ascending).
    std::vector<int> vertices_on(BoundaryLabel label) const {
        std::vector<int> out;
        for (const BoundaryEdge& be : boundary_) {
            if (be.label != label) continue;
            out.push_back(be.v0);
            out.push_back(be.v1);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// P2 node ids (vertices and midpoints) on edges with the given label.
    std::vector<int> p2_nodes_on(BoundaryLabel label) const {
        std::vector<int> out;
        for (const BoundaryEdge& be : boundary_) {
            if (be.label != label) continue;
            out.push_back(be.v0);
            out.push_back(be.v1);
            out.push_back(be.midpoint_node);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Vertex-to-vertex adjacency (via mesh edges), used e.g. for the
    /// neighbor-averaging pass of generated fields.
    const std::vector<std::vector<int>>& vertex_neighbors() const {
        return neighbors_;
    }

    /// How many triangles share each edge (1 = boundary, 2 = interior).
    const std::vector<int>& edge_use_count() const { return edge_use_; }

    friend Mesh build_mesh(const Rect&, int, int, const std::vector<BoundarySpec>&);

  private:
    static std::uint64_t edge_key(int a, int b) {
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    }

    Rect rect_;
    int nx_ = 0, ny_ = 0;
    std::vector<Eigen::Vector2d> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Edge> edges_;
    std::vector<int> edge_use_;
    std::vector<std::array<int, 6>> tri_p2_;
    std::vector<double> tri_area_;
    std::vector<std::array<Eigen::Vector2d, 3>> tri_gradL_;
    std::vector<BoundaryEdge> boundary_;
    std::unordered_map<std::uint64_t, int> edge_index_;
    std::vector<std::vector<int>> neighbors_;
    double total_area_ = 0.0;
};

namespace detail {

inline Eigen::Vector2d side_normal(Side s) {
    switch (s) {
        case Side::Left: return {-1.0, 0.0};
        case Side::Right: return {1.0, 0.0};
        case Side::Bottom: return {0.0, -1.0};
        default: return {0.0, 1.0};
    }
}

// Tangential coordinate range of a side.
inline std::pair<double, double> side_span(const Rect& r, Side s) {
    if (s == Side::Left || s == Side::Right) return {r.y_min, r.y_max};
    return {r.x_min, r.x_max};
}

}  // namespace detail

/// Builds the structured mesh and assigns boundary labels by coordinate
/// containment. Interval endpoints must coincide with grid lines within a
/// 1e-12 relative tolerance; a misaligned interval is rejected by name.
/// Boundary edges not covered by any spec default to Sigma.
inline Mesh build_mesh(const Rect& rect, int n_x, int n_y,
                       const std::vector<BoundarySpec>& boundary_spec) {
    if (!(rect.x_min < rect.x_max) || !(rect.y_min < rect.y_max)) {
        throw std::invalid_argument("build_mesh: rectangle has empty extent");
    }
    if (n_x < 1 || n_y < 1) {
        throw std::invalid_argument("build_mesh: cell counts must be positive");
    }

    const double hx = rect.width() / n_x;
    const double hy = rect.height() / n_y;

    // Validate spec alignment before building anything.
    for (const BoundarySpec& spec : boundary_spec) {
        auto [smin, smax] = detail::side_span(rect, spec.side);
        const double h = (spec.side == Side::Left || spec.side == Side::Right) ? hy : hx;
        const double span = smax - smin;
        const double tol = 1e-12 * span;
        auto aligned = [&](double t) {
            if (t < smin - tol || t > smax + tol) return false;
            const double k = std::round((t - smin) / h);
            return std::abs(t - (smin + k * h)) <= tol;
        };
        if (!(spec.lo < spec.hi) || !aligned(spec.lo) || !aligned(spec.hi)) {
            std::ostringstream msg;
            msg << "build_mesh: boundary interval " << to_string(spec.label) << " on "
                << to_string(spec.side) << " side [" << spec.lo << ", " << spec.hi
                << "] does not align with grid lines (h = " << h << ")";
            throw std::invalid_argument(msg.str());
        }
    }

    Mesh m;
    m.rect_ = rect;
    m.nx_ = n_x;
    m.ny_ = n_y;

    m.vertices_.reserve(static_cast<size_t>(n_x + 1) * (n_y + 1));
    for (int j = 0; j <= n_y; ++j) {
        for (int i = 0; i <= n_x; ++i) {
            m.vertices_.emplace_back(rect.x_min + i * hx, rect.y_min + j * hy);
        }
    }
    auto vid = [n_x](int i, int j) { return j * (n_x + 1) + i; };

    m.triangles_.reserve(static_cast<size_t>(2) * n_x * n_y);
    for (int j = 0; j < n_y; ++j) {
        for (int i = 0; i < n_x; ++i) {
            const int a = vid(i, j), b = vid(i + 1, j);
            const int c = vid(i + 1, j + 1), d = vid(i, j + 1);
            if ((i + j) % 2 == 0) {
                m.triangles_.push_back({{a, b, c}});
                m.triangles_.push_back({{a, c, d}});
            } else {
                m.triangles_.push_back({{a, b, d}});
                m.triangles_.push_back({{b, c, d}});
            }
        }
    }

    // Unique edges in first-seen order; midpoint node ids follow from the
    // edge index.
    m.edge_index_.reserve(m.triangles_.size() * 2);
    for (const Triangle& t : m.triangles_) {
        for (int k = 0; k < 3; ++k) {
            int a = t.v[k], b = t.v[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            const std::uint64_t key = Mesh::edge_key(a, b);
            auto it = m.edge_index_.find(key);
            if (it == m.edge_index_.end()) {
                m.edge_index_.emplace(key, static_cast<int>(m.edges_.size()));
                m.edges_.push_back({a, b});
                m.edge_use_.push_back(1);
            } else {
                ++m.edge_use_[it->second];
            }
        }
    }

    const int nv = m.vertex_count();
    m.tri_p2_.reserve(m.triangles_.size());
    for (const Triangle& t : m.triangles_) {
        std::array<int, 6> nodes;
        nodes[0] = t.v[0];
        nodes[1] = t.v[1];
        nodes[2] = t.v[2];
        nodes[3] = nv + m.edge_between(t.v[0], t.v[1]);
        nodes[4] = nv + m.edge_between(t.v[1], t.v[2]);
        nodes[5] = nv + m.edge_between(t.v[2], t.v[0]);
        m.tri_p2_.push_back(nodes);
    }

    m.tri_area_.reserve(m.triangles_.size());
    m.tri_gradL_.reserve(m.triangles_.size());
    for (const Triangle& t : m.triangles_) {
        const Eigen::Vector2d& p0 = m.vertices_[t.v[0]];
        const Eigen::Vector2d& p1 = m.vertices_[t.v[1]];
        const Eigen::Vector2d& p2 = m.vertices_[t.v[2]];
        const double twice_area =
            (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
        if (!(twice_area > 0.0)) {
            throw std::runtime_error("build_mesh: non-positive triangle area");
        }
        m.tri_area_.push_back(0.5 * twice_area);
        m.total_area_ += 0.5 * twice_area;
        std::array<Eigen::Vector2d, 3> g;
        g[0] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / twice_area;
        g[1] = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / twice_area;
        g[2] = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / twice_area;
        m.tri_gradL_.push_back(g);
    }

    // Label boundary edges. An edge is on a side when both endpoints lie on
    // it; the first spec covering its tangential interval wins.
    const double geom_tol = 1e-12 * std::max(rect.width(), rect.height());
    auto on_line = [&](double v, double line) { return std::abs(v - line) <= geom_tol; };
    for (int e = 0; e < m.edge_count(); ++e) {
        if (m.edge_use_[e] != 1) continue;
        const Eigen::Vector2d& pa = m.vertices_[m.edges_[e].a];
        const Eigen::Vector2d& pb = m.vertices_[m.edges_[e].b];
        Side side;
        if (on_line(pa.x(), rect.x_min) && on_line(pb.x(), rect.x_min)) {
            side = Side::Left;
        } else if (on_line(pa.x(), rect.x_max) && on_line(pb.x(), rect.x_max)) {
            side = Side::Right;
        } else if (on_line(pa.y(), rect.y_min) && on_line(pb.y(), rect.y_min)) {
            side = Side::Bottom;
        } else if (on_line(pa.y(), rect.y_max) && on_line(pb.y(), rect.y_max)) {
            side = Side::Top;
        } else {
            throw std::runtime_error("build_mesh: boundary edge not on a rectangle side");
        }
        const bool tangent_is_y = (side == Side::Left || side == Side::Right);
        const double t0 = std::min(tangent_is_y ? pa.y() : pa.x(), tangent_is_y ? pb.y() : pb.x());
        const double t1 = std::max(tangent_is_y ? pa.y() : pa.x(), tangent_is_y ? pb.y() : pb.x());

        BoundaryLabel label = BoundaryLabel::Sigma;
        for (const BoundarySpec& spec : boundary_spec) {
            if (spec.side != side) continue;
            if (t0 >= spec.lo - geom_tol && t1 <= spec.hi + geom_tol) {
                label = spec.label;
                break;
            }
        }
        BoundaryEdge be;
        be.edge_id = e;
        be.v0 = m.edges_[e].a;
        be.v1 = m.edges_[e].b;
        be.midpoint_node = nv + e;
        be.side = side;
        be.label = label;
        be.normal = detail::side_normal(side);
        m.boundary_.push_back(be);
    }

    m.neighbors_.resize(nv);
    for (const Edge& e : m.edges_) {
        m.neighbors_[e.a].push_back(e.b);
        m.neighbors_[e.b].push_back(e.a);
    }
    for (auto& nb : m.neighbors_) std::sort(nb.begin(), nb.end());

    return m;
}

/// All edges carrying a label, with outward normals.
inline std::vector<BoundaryEdge> boundary_edges(const Mesh& mesh, BoundaryLabel label) {
    return mesh.boundary_edges(label);
}

}  // namespace fdtopo
