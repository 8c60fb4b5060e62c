#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fdtopo/heaviside.hpp"
#include "fdtopo/mesh.hpp"

namespace fdtopo {

/// Piecewise-linear scalar field: one value per mesh vertex, interpolated
/// linearly inside each triangle. Carries the level-set function g, the
/// nodal Heaviside weights and descent directions.
class ScalarField {
  public:
    ScalarField() = default;

    explicit ScalarField(const Mesh& mesh, double fill = 0.0)
        : mesh_(&mesh), v_(static_cast<size_t>(mesh.vertex_count()), fill) {}

    template <class F>
    static ScalarField from_function(const Mesh& mesh, F&& f) {
        ScalarField out(mesh);
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            const Eigen::Vector2d& p = mesh.vertex(i);
            out.v_[i] = f(p.x(), p.y());
        }
        return out;
    }

    const Mesh* mesh() const { return mesh_; }
    int size() const { return static_cast<int>(v_.size()); }

    double operator[](int i) const { return v_[i]; }
    double& operator[](int i) { return v_[i]; }

    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    /// this + s * w, leaving this untouched.
    ScalarField plus_scaled(const ScalarField& w, double s) const {
        ScalarField out = *this;
        for (size_t i = 0; i < v_.size(); ++i) out.v_[i] += s * w.v_[i];
        return out;
    }

    /// Linear interpolation at barycentric coordinates of a triangle.
    double interpolate(int tri, const std::array<double, 3>& bary) const {
        const Triangle& t = mesh_->triangles()[tri];
        return bary[0] * v_[t.v[0]] + bary[1] * v_[t.v[1]] + bary[2] * v_[t.v[2]];
    }

  private:
    const Mesh* mesh_ = nullptr;
    std::vector<double> v_;
};

/// Piecewise-quadratic vector field: two components per P2 node (vertices
/// plus edge midpoints), stored interleaved [2*node + component]. Used for
/// the displacement.
class VectorField {
  public:
    VectorField() = default;

    explicit VectorField(const Mesh& mesh)
        : mesh_(&mesh), v_(Eigen::VectorXd::Zero(2 * mesh.p2_node_count())) {}

    VectorField(const Mesh& mesh, Eigen::VectorXd values) : mesh_(&mesh), v_(std::move(values)) {
        if (v_.size() != 2 * mesh.p2_node_count()) {
            throw std::invalid_argument("VectorField: value length does not match the mesh");
        }
    }

    const Mesh* mesh() const { return mesh_; }
    int node_count() const { return mesh_ ? mesh_->p2_node_count() : 0; }

    const Eigen::VectorXd& data() const { return v_; }
    Eigen::VectorXd& data() { return v_; }

    Eigen::Vector2d at(int node) const { return {v_[2 * node], v_[2 * node + 1]}; }

  private:
    const Mesh* mesh_ = nullptr;
    Eigen::VectorXd v_;
};

/// Nodal application of a Heaviside kernel: H is evaluated at the vertex
/// values of g and the resulting nodal field is what downstream quadrature
/// interpolates (not H of interpolated g).
inline ScalarField apply_kernel(const ScalarField& g, const HeavisideKernel& kernel) {
    ScalarField out = g;
    for (double& v : out.values()) v = kernel.value(v);
    return out;
}

}  // namespace fdtopo
