#pragma once

#include <array>
#include <vector>

#include <Eigen/SparseCore>

#include "fdtopo/fem.hpp"
#include "fdtopo/heaviside.hpp"
#include "fdtopo/state.hpp"

namespace fdtopo {

/// The integrand of the directional derivative,
///   d = 2 f.y + ell - (lambda (div y)^2 + 2 mu e(y):e(y)),
/// evaluated at quadrature points (P2 gradients are discontinuous across
/// elements), together with its P1 companions:
///   node_integrals[j] = int d phi_j   (phi_j the P1 hat function)
///   d_p1              = lumped-mass L2 projection of d onto P1
struct SensitivityField {
    std::vector<std::array<double, 6>> d_quad;  // per triangle, per rule point
    std::vector<double> node_integrals;
    std::vector<double> lumped_mass;
    ScalarField d_p1;

    /// Mean of d over a triangle (used for cell output).
    double cell_mean(int t) const {
        const auto& rule = triangle_quadrature();
        double acc = 0.0;
        for (int q = 0; q < 6; ++q) acc += rule[q].weight * d_quad[t][q];
        return acc;
    }
};

inline SensitivityField compute_d(const Mesh& mesh, const StateSolution& state, const Loads& loads,
                                  const Material& material, double ell) {
    SensitivityField out;
    const int nt = mesh.triangle_count();
    const int nv = mesh.vertex_count();
    out.d_quad.resize(static_cast<size_t>(nt));
    out.node_integrals.assign(static_cast<size_t>(nv), 0.0);
    out.lumped_mass.assign(static_cast<size_t>(nv), 0.0);

    const VectorField& y = state.displacement;
    const bool has_body_force = loads.body_force.squaredNorm() > 0.0;

    for (int t = 0; t < nt; ++t) {
        const Triangle& tri = mesh.triangles()[t];
        const auto& nodes = mesh.p2_nodes(t);
        const auto& gradL = mesh.barycentric_gradients(t);
        const double area = mesh.area(t);
        const auto& rule = triangle_quadrature();
        for (int qi = 0; qi < 6; ++qi) {
            const TriQuadPoint& q = rule[qi];
            const auto dN = p2_gradients(q.bary, gradL);
            Eigen::Matrix2d grad = Eigen::Matrix2d::Zero();  // grad[i][j] = d y_i / d x_j
            for (int a = 0; a < 6; ++a) {
                const Eigen::Vector2d ya = y.at(nodes[a]);
                grad.row(0) += ya.x() * dN[a].transpose();
                grad.row(1) += ya.y() * dN[a].transpose();
            }
            const double div = grad(0, 0) + grad(1, 1);
            const Eigen::Matrix2d strain = 0.5 * (grad + grad.transpose());
            const double energy = material.lambda * div * div +
                                  2.0 * material.mu * strain.squaredNorm();
            double d = ell - energy;
            if (has_body_force) {
                const auto N = p2_values(q.bary);
                Eigen::Vector2d yq(0.0, 0.0);
                for (int a = 0; a < 6; ++a) yq += N[a] * y.at(nodes[a]);
                d += 2.0 * loads.body_force.dot(yq);
            }
            out.d_quad[t][qi] = d;
            const double w = q.weight * area;
            for (int i = 0; i < 3; ++i) out.node_integrals[tri.v[i]] += w * q.bary[i] * d;
        }
        for (int i = 0; i < 3; ++i) out.lumped_mass[tri.v[i]] += area / 3.0;
    }

    out.d_p1 = ScalarField(mesh);
    for (int i = 0; i < nv; ++i) out.d_p1[i] = out.node_integrals[i] / out.lumped_mass[i];
    return out;
}

/// J'(g)w for the discrete cost: the quadrature of the P1 interpolant of the
/// nodal products (H^eps)'(g_j) w_j against d. Since the state problem sees
/// H through its nodal values, this is the exact derivative of the computed
/// cost, which the finite-difference check validates. Collapses to
///   sum_j H'(g_j) w_j int d phi_j.
inline double directional_derivative(const ScalarField& g, const ScalarField& w,
                                     const SensitivityField& sens,
                                     const HeavisideKernel& kernel) {
    double acc = 0.0;
    for (size_t j = 0; j < sens.node_integrals.size(); ++j) {
        acc += kernel.derivative(g[static_cast<int>(j)]) * w[static_cast<int>(j)] *
               sens.node_integrals[j];
    }
    return acc;
}

/// The three descent constructions: pointwise w = -H(g) d, saturated
/// w = -H(g) R(d), and the H1-smoothed w = -d~ with
///   int gamma grad(d~).grad(v) + d~ v = int H'(g) d v  for all P1 v
/// (natural boundary conditions).
struct DescentChoice {
    enum class Kind { Pointwise, Saturated, Smoothed };

    Kind kind = Kind::Pointwise;
    double saturation_cap = 1.0;  // c in R
    double gamma = 1e-3;          // smoothing weight

    static DescentChoice pointwise() { return {Kind::Pointwise, 1.0, 1e-3}; }
    static DescentChoice saturated(double c = 1.0) { return {Kind::Saturated, c, 1e-3}; }
    static DescentChoice smoothed(double gamma = 1e-3) { return {Kind::Smoothed, 1.0, gamma}; }
};

inline const char* to_string(DescentChoice::Kind k) {
    switch (k) {
        case DescentChoice::Kind::Pointwise: return "i";
        case DescentChoice::Kind::Saturated: return "ii";
        default: return "iii";
    }
}

namespace detail {

/// P1 reaction-diffusion solve (gamma K + M) x = rhs with the consistent
/// mass matrix; SPD by construction, no Dirichlet constraints.
inline std::vector<double> smoothing_solve(const Mesh& mesh, double gamma,
                                           const std::vector<double>& rhs,
                                           const SolveOptions& options) {
    const int nv = mesh.vertex_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(mesh.triangle_count()) * 9);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const Triangle& tri = mesh.triangles()[t];
        const auto& gradL = mesh.barycentric_gradients(t);
        const double area = mesh.area(t);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double stiff = gamma * area * gradL[i].dot(gradL[j]);
                const double mass = (i == j ? area / 6.0 : area / 12.0);
                trips.emplace_back(tri.v[i], tri.v[j], stiff + mass);
            }
        }
    }
    SparseSpd system;
    system.matrix.resize(nv, nv);
    system.matrix.setFromTriplets(trips.begin(), trips.end());
    system.matrix.makeCompressed();
    system.constrained.assign(static_cast<size_t>(nv), 0);

    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), nv);
    if (b.isZero(0.0)) return std::vector<double>(static_cast<size_t>(nv), 0.0);
    const Eigen::VectorXd x = solve_spd(system, b, options);
    return std::vector<double>(x.data(), x.data() + nv);
}

}  // namespace detail

inline ScalarField descent_direction(const DescentChoice& choice, const ScalarField& g,
                                     const SensitivityField& sens, const HeavisideKernel& kernel,
                                     const Mesh& mesh, const SolveOptions& smoother_options = {}) {
    ScalarField w(mesh);
    switch (choice.kind) {
        case DescentChoice::Kind::Pointwise:
            for (int j = 0; j < w.size(); ++j) w[j] = -kernel.value(g[j]) * sens.d_p1[j];
            break;
        case DescentChoice::Kind::Saturated: {
            const Saturation R(choice.saturation_cap);
            for (int j = 0; j < w.size(); ++j) w[j] = -kernel.value(g[j]) * R(sens.d_p1[j]);
            break;
        }
        case DescentChoice::Kind::Smoothed: {
            std::vector<double> rhs(sens.node_integrals.size());
            for (size_t j = 0; j < rhs.size(); ++j) {
                rhs[j] = kernel.derivative(g[static_cast<int>(j)]) * sens.node_integrals[j];
            }
            const auto tilde = detail::smoothing_solve(mesh, choice.gamma, rhs, smoother_options);
            for (int j = 0; j < w.size(); ++j) w[j] = -tilde[j];
            break;
        }
    }
    return w;
}

}  // namespace fdtopo
