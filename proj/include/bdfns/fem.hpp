#pragma once

// Taylor-Hood P2/P1 mixed space on triangles and assembly of the operators of
// the fully discrete Navier-Stokes step.
//
// Velocity unknowns are blocked by component: component c of scalar P2 node k
// is unknown c * n_nodes + k. Scalar P2 nodes are the mesh vertices followed by
// the edge midpoints. Pressure unknowns are the mesh vertices.

#include <array>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bdfns/linsolve.hpp"
#include "bdfns/mesh.hpp"

namespace bdfns {

using VectorField = std::function<Eigen::Vector2d(double x, double y, double t)>;
using ScalarField = std::function<double(double x, double y, double t)>;
/// Entry (i, j) is the derivative of component i with respect to coordinate j.
using GradientField = std::function<Eigen::Matrix2d(double x, double y, double t)>;

struct QuadraturePoint {
    std::array<double, 3> barycentric;
    /// Fraction of the triangle area; weights of a rule sum to one.
    double weight;
};

/// 7-point symmetric rule, exact for polynomials of degree 5.
std::span<const QuadraturePoint> assembly_quadrature();

/// 36-point collapsed Gauss-Legendre rule, exact for polynomials of degree 10.
std::span<const QuadraturePoint> error_quadrature();

/// Affine element map data of one triangle.
struct ElementGeometry {
    std::array<Eigen::Vector2d, 3> vertices;
    std::array<Eigen::Vector2d, 3> grad_barycentric;
    double area;

    [[nodiscard]] Eigen::Vector2d point(const std::array<double, 3>& bary) const
    {
        return bary[0] * vertices[0] + bary[1] * vertices[1] + bary[2] * vertices[2];
    }
};

/// P2 shape functions: vertices 0..2, then midpoints of edges (0,1), (1,2), (2,0).
std::array<double, 6> p2_values(const std::array<double, 3>& bary);
std::array<Eigen::Vector2d, 6> p2_gradients(const std::array<double, 3>& bary,
                                            const ElementGeometry& geom);

class MixedSpace {
public:
    MixedSpace(Mesh mesh, std::set<int> dirichlet_markers);

    [[nodiscard]] const Mesh& mesh() const noexcept { return mesh_; }
    [[nodiscard]] const std::set<int>& dirichlet_markers() const noexcept { return markers_; }

    [[nodiscard]] int n_elements() const noexcept { return static_cast<int>(mesh_.triangles().size()); }
    [[nodiscard]] int n_nodes() const noexcept { return n_nodes_; }
    [[nodiscard]] int n_u() const noexcept { return 2 * n_nodes_; }
    [[nodiscard]] int n_p() const noexcept { return static_cast<int>(mesh_.vertices().size()); }
    [[nodiscard]] const std::vector<std::array<int, 2>>& edges() const noexcept { return edges_; }

    /// Scalar P2 node of local node `local` (0..5) of triangle `tri`.
    [[nodiscard]] int node(int tri, int local) const { return element_nodes_[static_cast<std::size_t>(tri)][static_cast<std::size_t>(local)]; }
    [[nodiscard]] const std::array<int, 6>& element_nodes(int tri) const { return element_nodes_[static_cast<std::size_t>(tri)]; }
    [[nodiscard]] int velocity_dof(int tri, int local, int comp) const { return comp * n_nodes_ + node(tri, local); }
    [[nodiscard]] int pressure_dof(int tri, int local_vertex) const
    {
        return mesh_.triangles()[static_cast<std::size_t>(tri)][static_cast<std::size_t>(local_vertex)];
    }
    [[nodiscard]] Eigen::Vector2d node_point(int node) const;

    /// Per velocity unknown: true if its node lies on an edge with a Dirichlet marker.
    [[nodiscard]] const std::vector<bool>& dirichlet_mask() const noexcept { return dirichlet_; }

    [[nodiscard]] ElementGeometry geometry(int tri) const;

private:
    Mesh mesh_;
    std::set<int> markers_;
    int n_nodes_ = 0;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 6>> element_nodes_;
    std::vector<bool> dirichlet_;
};

MixedSpace build_mixed_space(const Mesh& mesh, std::set<int> dirichlet_markers);

struct AssembledOperators {
    SparseMatrix mass;         ///< M: (u, v)
    SparseMatrix stiffness;    ///< A: nu (grad u, grad v)
    SparseMatrix divergence;   ///< Bdiv: (q, div u), n_p x n_u
    SparseMatrix grad_div;     ///< Gd: mu (div u, div v)
    SparseMatrix pressure_mass; ///< Mp: (p, q)
    Vector pressure_mean;      ///< integral of each pressure basis function
};

/// `element_order`, when given, is a permutation of the elements fixing the
/// accumulation order.
AssembledOperators assemble_linear_operators(const MixedSpace& space, double nu, double mu,
                                             std::span<const int> element_order = {});

/// Matrix N(w) with v^T N(w) u = b(w, u, v), where
/// b(w, u, v) = ((w . grad) u + 1/2 (div w) u, v).
SparseMatrix assemble_convection(const MixedSpace& space, const Vector& w);

/// Matrix of v -> b(w, v, .) + b(v, w, .), the derivative of u -> b(u, u, .) at w.
SparseMatrix assemble_convection_jacobian(const MixedSpace& space, const Vector& w);

/// Vector with entries b(a, b, phi_i).
Vector assemble_convection_vector(const MixedSpace& space, const Vector& a, const Vector& b);

/// Vector with entries (f(., t), phi_i).
Vector assemble_load(const MixedSpace& space, const VectorField& f, double t);

Vector interpolate(const MixedSpace& space, const VectorField& f, double t);
Vector interpolate(const MixedSpace& space, const ScalarField& f, double t);

/// Overwrites the Dirichlet unknowns of `u` with the nodal values of `g` at time t.
void apply_dirichlet(const MixedSpace& space, const VectorField& g, double t, Vector& u);

struct ExactSolution {
    VectorField velocity;
    GradientField velocity_gradient;
    ScalarField pressure;
};

struct ErrorNorms {
    double l2_velocity;
    double h1_semi_velocity;
    /// Computed after removing the mean of p_h - p.
    double l2_pressure;
};

ErrorNorms error_norms(const MixedSpace& space, const Vector& u_h, const Vector& p_h,
                       const ExactSolution& exact, double t);

/// Legacy VTK (ASCII, unstructured grid) with vertex velocity and pressure.
void write_vtk(const MixedSpace& space, const Vector& u, const Vector& p,
               const std::filesystem::path& path);

} // namespace bdfns
