#pragma once

#include <optional>

#include "fdtopo/fem.hpp"
#include "fdtopo/fields.hpp"
#include "fdtopo/heaviside.hpp"
#include "fdtopo/mesh.hpp"

namespace fdtopo {

/// Displacement and cost functionals of the weighted state problem
///   integral of H(g) sigma(y):grad(v) = integral of H(g) f.v + traction term
/// with cost J = int H(g) f.y + int_GammaN h.y + ell * int H(g).
struct StateSolution {
    VectorField displacement;
    double compliance_volume_term = 0.0;   // int H(g) f . y
    double compliance_surface_term = 0.0;  // int_GammaN h . y
    double volume_term = 0.0;              // int H(g)
    double cost = 0.0;
    SolveStats stats;
};

struct StateOptions {
    SolveOptions linear;
    int threads = 1;
};

/// Quadrature of the P1-interpolated nodal H values (exact for P1).
inline double volume_of(const ScalarField& g, const HeavisideKernel& kernel) {
    const Mesh& mesh = *g.mesh();
    double vol = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const Triangle& tri = mesh.triangles()[t];
        vol += mesh.area(t) / 3.0 *
               (kernel.value(g[tri.v[0]]) + kernel.value(g[tri.v[1]]) + kernel.value(g[tri.v[2]]));
    }
    return vol;
}

/// The state solve switches to the Clamped kernel for small epsilon, where
/// the raw Smooth weight makes the system numerically near-singular.
/// Derivative quantities always use the Smooth kernel.
inline HeavisideKernel effective_state_kernel(const HeavisideKernel& kernel) {
    if (kernel.variant() == HeavisideVariant::Smooth && kernel.epsilon() < 1e-2) {
        return kernel.with_variant(HeavisideVariant::Clamped);
    }
    return kernel;
}

/// Solver bound to one mesh and material; reuses the assembler caches
/// across repeated solves (line-search trials, eps-studies).
class StateSolver {
  public:
    StateSolver(const Mesh& mesh, const Material& material, int threads = 1)
        : assembler_(mesh, material, threads) {
        if (mesh.boundary_edges(BoundaryLabel::SigmaD).empty()) {
            throw std::invalid_argument("StateSolver: mesh has no SigmaD boundary (meas(Sigma_D) > 0 required)");
        }
    }

    const ElasticityAssembler& assembler() const { return assembler_; }
    const Mesh& mesh() const { return assembler_.mesh(); }

    StateSolution solve(const ScalarField& g, const HeavisideKernel& kernel, const Loads& loads,
                        double ell, const StateOptions& options = {},
                        const Eigen::VectorXd* warm_start = nullptr) const {
        const Mesh& mesh = assembler_.mesh();
        const HeavisideKernel state_kernel = effective_state_kernel(kernel);
        const ScalarField h = apply_kernel(g, state_kernel);

        const SparseSpd system = assembler_.assemble(h, options.threads);
        const Eigen::VectorXd b = assembler_.rhs(loads, h);

        StateSolution out;
        Eigen::VectorXd y;
        if (b.isZero(0.0)) {
            y = Eigen::VectorXd::Zero(b.size());
        } else {
            y = solve_spd(system, b, options.linear, &out.stats, warm_start);
        }
        out.displacement = VectorField(mesh, std::move(y));

        out.volume_term = volume_of(g, state_kernel);
        out.compliance_volume_term = compliance_volume(mesh, h, loads, out.displacement);
        out.compliance_surface_term = compliance_surface(mesh, loads, out.displacement);
        out.cost = out.compliance_volume_term + out.compliance_surface_term + ell * out.volume_term;
        return out;
    }

    /// int H f . y with P1 H and P2 y (degree 3, exact under the rule).
    static double compliance_volume(const Mesh& mesh, const ScalarField& h, const Loads& loads,
                                    const VectorField& y) {
        if (loads.body_force.squaredNorm() == 0.0) return 0.0;
        double acc = 0.0;
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            const Triangle& tri = mesh.triangles()[t];
            const auto& nodes = mesh.p2_nodes(t);
            const double area = mesh.area(t);
            for (const TriQuadPoint& q : triangle_quadrature()) {
                const double hq = q.bary[0] * h[tri.v[0]] + q.bary[1] * h[tri.v[1]] +
                                  q.bary[2] * h[tri.v[2]];
                const auto N = p2_values(q.bary);
                Eigen::Vector2d yq(0.0, 0.0);
                for (int a = 0; a < 6; ++a) yq += N[a] * y.at(nodes[a]);
                acc += q.weight * area * hq * loads.body_force.dot(yq);
            }
        }
        return acc;
    }

    /// int_GammaN h . y over P2 edge traces.
    static double compliance_surface(const Mesh& mesh, const Loads& loads, const VectorField& y) {
        if (loads.traction.squaredNorm() == 0.0) return 0.0;
        double acc = 0.0;
        for (const BoundaryEdge& be : mesh.boundary_edges()) {
            if (be.label != BoundaryLabel::GammaN) continue;
            const double len = (mesh.vertex(be.v1) - mesh.vertex(be.v0)).norm();
            const int nodes[3] = {be.v0, be.v1, be.midpoint_node};
            for (const EdgeQuadPoint& q : edge_quadrature()) {
                const auto phi = p2_edge_values(q.t);
                Eigen::Vector2d yq(0.0, 0.0);
                for (int a = 0; a < 3; ++a) yq += phi[a] * y.at(nodes[a]);
                acc += q.weight * len * loads.traction.dot(yq);
            }
        }
        return acc;
    }

  private:
    ElasticityAssembler assembler_;
};

inline StateSolution solve_state(const Mesh& mesh, const Material& material, const Loads& loads,
                                 const ScalarField& g, const HeavisideKernel& kernel, double ell,
                                 const StateOptions& options = {}) {
    return StateSolver(mesh, material, options.threads).solve(g, kernel, loads, ell, options);
}

}  // namespace fdtopo
