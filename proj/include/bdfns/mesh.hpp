#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bdfns {

struct BoundaryEdge {
    std::array<int, 2> vertices;
    int marker;

    friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

struct MeshStats {
    double h_max;
    double h_min;
    double quasi_uniformity;
    std::size_t cell_count;
    std::size_t vertex_count;
};

/// Conforming 2D triangulation with marked boundary edges.
///
/// Construction validates the triangulation: indices in range, strictly
/// positive triangle areas, every vertex used, edges shared by at most two
/// triangles, and every edge with a single triangle listed exactly once in
/// `boundary_edges`. Violations raise ValidationError.
class Mesh {
public:
    Mesh(std::vector<Eigen::Vector2d> vertices, std::vector<std::array<int, 3>> triangles,
         std::vector<BoundaryEdge> boundary_edges);

    [[nodiscard]] const std::vector<Eigen::Vector2d>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] const std::vector<std::array<int, 3>>& triangles() const noexcept { return triangles_; }
    [[nodiscard]] const std::vector<BoundaryEdge>& boundary_edges() const noexcept { return boundary_edges_; }

    [[nodiscard]] double h_max() const noexcept { return h_max_; }
    [[nodiscard]] double h_min() const noexcept { return h_min_; }
    [[nodiscard]] double quasi_uniformity() const noexcept { return h_max_ / h_min_; }

    /// Signed area of triangle `t` (positive for counter-clockwise vertices).
    [[nodiscard]] double area(std::size_t t) const;

    friend bool operator==(const Mesh&, const Mesh&) = default;

private:
    std::vector<Eigen::Vector2d> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;
    double h_max_ = 0.0;
    double h_min_ = 0.0;
};

enum class DiagonalPattern {
    /// Every grid square split along its (i, j)-(i+1, j+1) diagonal.
    Single,
    /// Diagonal direction alternates between neighboring squares.
    Alternating,
};

/// Structured triangulation of (0,1)^2 with n x n squares, two triangles each,
/// all boundary edges carrying marker 1.
Mesh unit_square_mesh(int n, DiagonalPattern pattern = DiagonalPattern::Single);

/// Structured triangulation of (0,lx) x (0,ly); `side_markers` holds the markers
/// of the bottom, right, top and left sides.
Mesh rectangle_mesh(int nx, int ny, double lx, double ly, std::array<int, 4> side_markers,
                    DiagonalPattern pattern = DiagonalPattern::Single);

/// Reads the `mesh2d v1` ASCII format. Negatively oriented triangles are
/// repaired by swapping two vertices; a message for each repair is appended to
/// `warnings` (or written to stderr when `warnings` is null). Throws ParseError
/// with the offending line number, or ValidationError.
Mesh read_mesh(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

void write_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// Diameters are the longest edge of each triangle.
MeshStats mesh_stats(const Mesh& mesh);

} // namespace bdfns
