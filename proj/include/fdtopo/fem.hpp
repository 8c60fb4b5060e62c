#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "fdtopo/fields.hpp"
#include "fdtopo/mesh.hpp"

namespace fdtopo {

/// Space-independent Lame coefficients.
struct Material {
    double lambda = 1.0;
    double mu = 1.0;

    static Material from_lame(double lambda, double mu) {
        if (!(lambda > 0.0) || !(mu > 0.0)) {
            throw std::invalid_argument("Material: Lame coefficients must be positive");
        }
        return {lambda, mu};
    }

    static Material from_young_poisson_plane_strain(double young, double poisson) {
        return from_lame(young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)),
                         young / (2.0 * (1.0 + poisson)));
    }

    static Material from_young_poisson_plane_stress(double young, double poisson) {
        return from_lame(young * poisson / ((1.0 + poisson) * (1.0 - poisson)),
                         young / (2.0 * (1.0 + poisson)));
    }
};

/// Constant body force f on D and constant traction h on Gamma_N.
struct Loads {
    Eigen::Vector2d body_force{0.0, 0.0};
    Eigen::Vector2d traction{0.0, 0.0};
};

struct TriQuadPoint {
    std::array<double, 3> bary;
    double weight;  // area fraction; the six weights sum to 1
};

/// Symmetric 6-point triangle rule, exact for polynomials of degree 4.
/// The stiffness integrand (P1 coefficient times products of P2 gradients)
/// is degree 3, so assembly quadrature is exact.
inline const std::array<TriQuadPoint, 6>& triangle_quadrature() {
    static const std::array<TriQuadPoint, 6> rule = [] {
        const double a1 = 0.10810301816807023;
        const double b1 = 0.44594849091596489;
        const double w1 = 0.22338158967801147;
        const double a2 = 0.81684757298045851;
        const double b2 = 0.091576213509770743;
        const double w2 = 0.10995174365532187;
        return std::array<TriQuadPoint, 6>{{{{a1, b1, b1}, w1},
                                            {{b1, a1, b1}, w1},
                                            {{b1, b1, a1}, w1},
                                            {{a2, b2, b2}, w2},
                                            {{b2, a2, b2}, w2},
                                            {{b2, b2, a2}, w2}}};
    }();
    return rule;
}

struct EdgeQuadPoint {
    double t;       // parameter in [0, 1]
    double weight;  // weights sum to 1
};

/// 3-point Gauss rule on [0,1], exact for degree 5; integrates the P2 edge
/// traces exactly.
inline const std::array<EdgeQuadPoint, 3>& edge_quadrature() {
    static const std::array<EdgeQuadPoint, 3> rule = [] {
        const double s = std::sqrt(0.6);
        return std::array<EdgeQuadPoint, 3>{{{0.5 * (1.0 - s), 5.0 / 18.0},
                                             {0.5, 4.0 / 9.0},
                                             {0.5 * (1.0 + s), 5.0 / 18.0}}};
    }();
    return rule;
}

/// P2 shape function values at barycentric coordinates L.
/// Local node order: vertices 0,1,2 then midpoints of edges (0,1), (1,2), (2,0).
inline std::array<double, 6> p2_values(const std::array<double, 3>& L) {
    return {L[0] * (2.0 * L[0] - 1.0), L[1] * (2.0 * L[1] - 1.0), L[2] * (2.0 * L[2] - 1.0),
            4.0 * L[0] * L[1],         4.0 * L[1] * L[2],         4.0 * L[2] * L[0]};
}

inline std::array<Eigen::Vector2d, 6> p2_gradients(const std::array<double, 3>& L,
                                                   const std::array<Eigen::Vector2d, 3>& gradL) {
    return {(4.0 * L[0] - 1.0) * gradL[0],
            (4.0 * L[1] - 1.0) * gradL[1],
            (4.0 * L[2] - 1.0) * gradL[2],
            4.0 * (L[0] * gradL[1] + L[1] * gradL[0]),
            4.0 * (L[1] * gradL[2] + L[2] * gradL[1]),
            4.0 * (L[2] * gradL[0] + L[0] * gradL[2])};
}

/// P2 trace shape values on an edge at parameter t: endpoint a, endpoint b,
/// midpoint.
inline std::array<double, 3> p2_edge_values(double t) {
    return {(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)};
}

using ElementMatrix = Eigen::Matrix<double, 12, 12>;

namespace detail {

/// Accumulates w * (lambda da_a db_b + mu db_a da_b + mu delta_ab grad.grad)
/// into K for one quadrature point; dof layout [2*local_node + component].
inline void add_stiffness_point(ElementMatrix& K, const Material& mat,
                                const std::array<Eigen::Vector2d, 6>& dN, double w) {
    for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
            const double dot = dN[a].dot(dN[b]);
            for (int alpha = 0; alpha < 2; ++alpha) {
                for (int beta = 0; beta < 2; ++beta) {
                    double val = mat.lambda * dN[a][alpha] * dN[b][beta] +
                                 mat.mu * dN[a][beta] * dN[b][alpha];
                    if (alpha == beta) val += mat.mu * dot;
                    K(2 * a + alpha, 2 * b + beta) += w * val;
                }
            }
        }
    }
}

inline std::array<Eigen::Vector2d, 3> barycentric_gradients(
    const std::array<Eigen::Vector2d, 3>& p, double& area) {
    const double twice_area = (p[1].x() - p[0].x()) * (p[2].y() - p[0].y()) -
                              (p[2].x() - p[0].x()) * (p[1].y() - p[0].y());
    if (!(twice_area > 0.0)) {
        throw std::runtime_error("element_stiffness: degenerate triangle (area <= 0)");
    }
    area = 0.5 * twice_area;
    return {Eigen::Vector2d(p[1].y() - p[2].y(), p[2].x() - p[1].x()) / twice_area,
            Eigen::Vector2d(p[2].y() - p[0].y(), p[0].x() - p[2].x()) / twice_area,
            Eigen::Vector2d(p[0].y() - p[1].y(), p[1].x() - p[0].x()) / twice_area};
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must not
/// depend on the schedule; each index owns its own output slot.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 256) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = std::min<int>(threads, std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<int> next{0};
    auto body = [&] {
        for (;;) {
            const int begin = next.fetch_add(256);
            if (begin >= n) return;
            const int end = std::min(n, begin + 256);
            for (int i = begin; i < end; ++i) fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Stiffness of one triangle for the H-weighted elasticity form
///   integral of h * (lambda (div u)(div v) + 2 mu e(u):e(v))
/// with h interpolated linearly from its three vertex values.
inline ElementMatrix element_stiffness(const std::array<Eigen::Vector2d, 3>& vertices,
                                       const Material& material,
                                       const std::array<double, 3>& h_vertex) {
    double area = 0.0;
    const auto gradL = detail::barycentric_gradients(vertices, area);
    ElementMatrix K = ElementMatrix::Zero();
    for (const TriQuadPoint& q : triangle_quadrature()) {
        const auto dN = p2_gradients(q.bary, gradL);
        const double h = q.bary[0] * h_vertex[0] + q.bary[1] * h_vertex[1] + q.bary[2] * h_vertex[2];
        detail::add_stiffness_point(K, material, dN, q.weight * area * h);
    }
    return K;
}

/// Global system after symmetric Dirichlet elimination: full dimension
/// 2 * p2_node_count, with unit diagonal rows for constrained dofs.
struct SparseSpd {
    Eigen::SparseMatrix<double> matrix;
    std::vector<char> constrained;  // per dof
};

/// Dof mask for homogeneous Dirichlet conditions on Sigma_D: both components
/// of every vertex and midpoint node of a Sigma_D edge.
inline std::vector<char> dirichlet_mask(const Mesh& mesh) {
    std::vector<char> mask(static_cast<size_t>(2) * mesh.p2_node_count(), 0);
    for (int node : mesh.p2_nodes_on(BoundaryLabel::SigmaD)) {
        mask[2 * node] = 1;
        mask[2 * node + 1] = 1;
    }
    return mask;
}

class SolverError : public std::runtime_error {
  public:
    SolverError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

  private:
    double residual_;
    int iterations_;
};

enum class Preconditioner { Jacobi, IncompleteCholesky };

struct SolveOptions {
    double rel_tol = 1e-10;
    int max_iter = 50000;
    Preconditioner preconditioner = Preconditioner::Jacobi;
};

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;
};

/// Preconditioned CG on the eliminated system. Deterministic for fixed
/// inputs; throws SolverError when the relative residual does not reach
/// rel_tol within max_iter.
inline Eigen::VectorXd solve_spd(const SparseSpd& system, const Eigen::VectorXd& rhs,
                                 const SolveOptions& options = {}, SolveStats* stats = nullptr,
                                 const Eigen::VectorXd* warm_start = nullptr) {
    auto run = [&](auto& cg) -> Eigen::VectorXd {
        cg.setTolerance(options.rel_tol);
        cg.setMaxIterations(options.max_iter);
        cg.compute(system.matrix);
        Eigen::VectorXd x;
        if (warm_start != nullptr && warm_start->size() == rhs.size()) {
            x = cg.solveWithGuess(rhs, *warm_start);
        } else {
            x = cg.solve(rhs);
        }
        if (stats != nullptr) {
            stats->iterations = static_cast<int>(cg.iterations());
            stats->residual = cg.error();
        }
        if (cg.info() != Eigen::Success || !x.allFinite()) {
            throw SolverError("solve_spd: conjugate gradient did not converge (relative residual " +
                                  std::to_string(cg.error()) + ")",
                              cg.error(), static_cast<int>(cg.iterations()));
        }
        return x;
    };

    if (options.preconditioner == Preconditioner::IncompleteCholesky) {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>>>
            cg;
        return run(cg);
    }
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    return run(cg);
}

/// Assembler bound to one mesh and material. The element stiffness is linear
/// in the three vertex values of the P1 coefficient, so each triangle caches
/// the three matrices K_i with K(h) = sum_i h_i K_i; reassembly for a new
/// coefficient field is then a cheap linear combination scattered through a
/// precomputed index map into a fixed sparsity pattern.
class ElasticityAssembler {
  public:
    ElasticityAssembler(const Mesh& mesh, const Material& material, int threads = 1)
        : mesh_(&mesh), material_(material), constrained_(dirichlet_mask(mesh)) {
        const int nt = mesh.triangle_count();
        const int n = 2 * mesh.p2_node_count();

        khat_.resize(static_cast<size_t>(nt));
        detail::parallel_for(nt, threads, [&](int t) {
            const auto& gradL = mesh_->barycentric_gradients(t);
            const double area = mesh_->area(t);
            auto& k = khat_[t];
            k[0].setZero();
            k[1].setZero();
            k[2].setZero();
            for (const TriQuadPoint& q : triangle_quadrature()) {
                const auto dN = p2_gradients(q.bary, gradL);
                ElementMatrix kq = ElementMatrix::Zero();
                detail::add_stiffness_point(kq, material_, dN, q.weight * area);
                for (int i = 0; i < 3; ++i) k[i] += q.bary[i] * kq;
            }
        });

        // Fixed pattern: all unconstrained couplings plus unit diagonal on
        // constrained dofs.
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(nt) * 144 + n);
        for (int t = 0; t < nt; ++t) {
            const auto& nodes = mesh.p2_nodes(t);
            for (int a = 0; a < 12; ++a) {
                const int row = 2 * nodes[a / 2] + a % 2;
                if (constrained_[row]) continue;
                for (int b = 0; b < 12; ++b) {
                    const int col = 2 * nodes[b / 2] + b % 2;
                    if (constrained_[col]) continue;
                    trips.emplace_back(row, col, 0.0);
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            if (constrained_[i]) trips.emplace_back(i, i, 1.0);
        }
        pattern_.resize(n, n);
        pattern_.setFromTriplets(trips.begin(), trips.end());
        pattern_.makeCompressed();

        // Value-index scatter map per triangle entry (-1 for dropped ones).
        scatter_.resize(static_cast<size_t>(nt));
        detail::parallel_for(nt, threads, [&](int t) {
            const auto& nodes = mesh.p2_nodes(t);
            for (int a = 0; a < 12; ++a) {
                const int row = 2 * nodes[a / 2] + a % 2;
                for (int b = 0; b < 12; ++b) {
                    const int col = 2 * nodes[b / 2] + b % 2;
                    scatter_[t][a * 12 + b] =
                        (constrained_[row] || constrained_[col]) ? -1 : value_index(row, col);
                }
            }
        });
    }

    const Mesh& mesh() const { return *mesh_; }
    const Material& material() const { return material_; }
    const std::vector<char>& constrained() const { return constrained_; }

    /// Assembles the eliminated stiffness for the given nodal coefficient
    /// field. The scatter runs in triangle order, so values are independent
    /// of the thread count.
    SparseSpd assemble(const ScalarField& h_field, int threads = 1) const {
        const int nt = mesh_->triangle_count();
        std::vector<ElementMatrix> local(static_cast<size_t>(nt));
        detail::parallel_for(nt, threads, [&](int t) {
            const Triangle& tri = mesh_->triangles()[t];
            local[t] = h_field[tri.v[0]] * khat_[t][0] + h_field[tri.v[1]] * khat_[t][1] +
                       h_field[tri.v[2]] * khat_[t][2];
        });

        SparseSpd out{pattern_, constrained_};
        double* vals = out.matrix.valuePtr();
        for (int t = 0; t < nt; ++t) {
            const auto& map = scatter_[t];
            const ElementMatrix& K = local[t];
            for (int a = 0; a < 12; ++a) {
                for (int b = 0; b < 12; ++b) {
                    const int idx = map[a * 12 + b];
                    if (idx >= 0) vals[idx] += K(a, b);
                }
            }
        }
        return out;
    }

    /// Load vector with the assembler's Dirichlet mask applied.
    Eigen::VectorXd rhs(const Loads& loads, const ScalarField& h_field) const;

  private:
    int value_index(int row, int col) const {
        const int* outer = pattern_.outerIndexPtr();
        const int* inner = pattern_.innerIndexPtr();
        const int* begin = inner + outer[col];
        const int* end = inner + outer[col + 1];
        const int* it = std::lower_bound(begin, end, row);
        return static_cast<int>(outer[col] + (it - begin));
    }

    const Mesh* mesh_;
    Material material_;
    std::vector<char> constrained_;
    Eigen::SparseMatrix<double> pattern_;
    std::vector<std::array<int, 144>> scatter_;
    std::vector<std::array<ElementMatrix, 3>> khat_;
};

inline SparseSpd assemble_system(const Mesh& mesh, const Material& material,
                                 const ScalarField& h_field, int threads = 1) {
    return ElasticityAssembler(mesh, material, threads).assemble(h_field, threads);
}

/// Load vector: volume term weighted by the interpolated coefficient,
/// traction integrated over Gamma_N P2 traces with the edge rule, entries
/// zeroed at the dofs in `constrained`.
inline Eigen::VectorXd assemble_rhs(const Mesh& mesh, const Loads& loads,
                                    const ScalarField& h_field,
                                    const std::vector<char>& constrained) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * mesh.p2_node_count());
    if (loads.body_force.squaredNorm() > 0.0) {
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            const Triangle& tri = mesh.triangles()[t];
            const auto& nodes = mesh.p2_nodes(t);
            const double area = mesh.area(t);
            for (const TriQuadPoint& q : triangle_quadrature()) {
                const double h = q.bary[0] * h_field[tri.v[0]] + q.bary[1] * h_field[tri.v[1]] +
                                 q.bary[2] * h_field[tri.v[2]];
                const auto N = p2_values(q.bary);
                const double w = q.weight * area * h;
                for (int a = 0; a < 6; ++a) {
                    b[2 * nodes[a]] += w * N[a] * loads.body_force.x();
                    b[2 * nodes[a] + 1] += w * N[a] * loads.body_force.y();
                }
            }
        }
    }
    if (loads.traction.squaredNorm() > 0.0) {
        for (const BoundaryEdge& be : mesh.boundary_edges()) {
            if (be.label != BoundaryLabel::GammaN) continue;
            const double len = (mesh.vertex(be.v1) - mesh.vertex(be.v0)).norm();
            const int nodes[3] = {be.v0, be.v1, be.midpoint_node};
            for (const EdgeQuadPoint& q : edge_quadrature()) {
                const auto phi = p2_edge_values(q.t);
                const double w = q.weight * len;
                for (int a = 0; a < 3; ++a) {
                    b[2 * nodes[a]] += w * phi[a] * loads.traction.x();
                    b[2 * nodes[a] + 1] += w * phi[a] * loads.traction.y();
                }
            }
        }
    }
    for (int i = 0; i < b.size(); ++i) {
        if (!constrained.empty() && constrained[i]) b[i] = 0.0;
    }
    return b;
}

inline Eigen::VectorXd assemble_rhs(const Mesh& mesh, const Loads& loads,
                                    const ScalarField& h_field) {
    return assemble_rhs(mesh, loads, h_field, dirichlet_mask(mesh));
}

inline Eigen::VectorXd ElasticityAssembler::rhs(const Loads& loads,
                                                const ScalarField& h_field) const {
    return assemble_rhs(*mesh_, loads, h_field, constrained_);
}

}  // namespace fdtopo
