#pragma once

#include "bifmap/errors.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cstddef>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace bifmap {

using Index = Eigen::Index;
using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using FaceMatrix = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Faces with area below this fraction of the mean face area are rejected.
inline constexpr double kDegenerateAreaRatio = 1e-12;

/// One entry of the edge graph: a neighbouring vertex and the Euclidean edge length.
struct EdgeNeighbor {
    int vertex;
    double length;
};

///
/// Closed or open triangle surface, validated at construction.
///
/// Invariants: every face index is in range, faces have three distinct indices and
/// non-negligible area, every vertex is referenced and the edge graph is connected.
/// Instances are immutable, so they can be shared across threads.
///
class TriangleMesh {
public:
    TriangleMesh() = default;

    TriangleMesh(VertexMatrix vertices, FaceMatrix faces)
        : vertices_(std::move(vertices)), faces_(std::move(faces))
    {
        validate_and_build();
    }

    Index n_vertices() const noexcept { return vertices_.rows(); }
    Index n_faces() const noexcept { return faces_.rows(); }

    const VertexMatrix& vertices() const noexcept { return vertices_; }
    const FaceMatrix& faces() const noexcept { return faces_; }

    Eigen::Vector3d vertex(Index i) const { return vertices_.row(i).transpose(); }

    double face_area(Index f) const { return face_areas_[static_cast<std::size_t>(f)]; }
    const std::vector<double>& face_areas() const noexcept { return face_areas_; }
    double total_area() const noexcept { return total_area_; }

    /// Edge graph adjacency, neighbours sorted by vertex index.
    const std::vector<std::vector<EdgeNeighbor>>& adjacency() const noexcept { return adjacency_; }

    /// Undirected edges (i < j), sorted lexicographically.
    const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }

    double mean_edge_length() const
    {
        double sum = 0.0;
        for (const auto& [i, j] : edges_) sum += (vertex(i) - vertex(j)).norm();
        return edges_.empty() ? 0.0 : sum / static_cast<double>(edges_.size());
    }

private:
    void validate_and_build();

    VertexMatrix vertices_;
    FaceMatrix faces_;
    std::vector<double> face_areas_;
    double total_area_ = 0.0;
    std::vector<std::vector<EdgeNeighbor>> adjacency_;
    std::vector<std::pair<int, int>> edges_;
};

inline double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c)
{
    return 0.5 * (b - a).cross(c - a).norm();
}

inline void TriangleMesh::validate_and_build()
{
    const Index n = n_vertices();
    const Index m = n_faces();
    if (n == 0 || m == 0) throw ValidationError("mesh has no vertices or no faces");
    if (!vertices_.allFinite()) throw ValidationError("mesh has non-finite vertex coordinates");

    for (Index f = 0; f < m; ++f) {
        for (int c = 0; c < 3; ++c) {
            const int v = faces_(f, c);
            if (v < 0 || v >= n) {
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
            }
        }
        if (faces_(f, 0) == faces_(f, 1) || faces_(f, 1) == faces_(f, 2) || faces_(f, 0) == faces_(f, 2)) {
            throw ValidationError("face " + std::to_string(f) + " repeats a vertex index");
        }
    }

    face_areas_.resize(static_cast<std::size_t>(m));
    total_area_ = 0.0;
    for (Index f = 0; f < m; ++f) {
        const double a = triangle_area(vertex(faces_(f, 0)), vertex(faces_(f, 1)), vertex(faces_(f, 2)));
        face_areas_[static_cast<std::size_t>(f)] = a;
        total_area_ += a;
    }
    const double mean_area = total_area_ / static_cast<double>(m);
    for (Index f = 0; f < m; ++f) {
        if (!(face_areas_[static_cast<std::size_t>(f)] > kDegenerateAreaRatio * mean_area)) {
            throw ValidationError("face " + std::to_string(f) + " is degenerate (near-zero area)");
        }
    }

    edges_.clear();
    edges_.reserve(static_cast<std::size_t>(3 * m));
    for (Index f = 0; f < m; ++f) {
        for (int c = 0; c < 3; ++c) {
            int i = faces_(f, c);
            int j = faces_(f, (c + 1) % 3);
            if (i > j) std::swap(i, j);
            edges_.emplace_back(i, j);
        }
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    adjacency_.assign(static_cast<std::size_t>(n), {});
    for (const auto& [i, j] : edges_) {
        const double len = (vertex(i) - vertex(j)).norm();
        adjacency_[static_cast<std::size_t>(i)].push_back({j, len});
        adjacency_[static_cast<std::size_t>(j)].push_back({i, len});
    }
    for (auto& nbrs : adjacency_) {
        std::sort(nbrs.begin(), nbrs.end(),
                  [](const EdgeNeighbor& a, const EdgeNeighbor& b) { return a.vertex < b.vertex; });
    }

    // Connectivity of the edge graph; unreferenced vertices count as separate components.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    Index reached = 1;
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (const auto& nb : adjacency_[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(nb.vertex)]) {
                seen[static_cast<std::size_t>(nb.vertex)] = 1;
                ++reached;
                frontier.push(nb.vertex);
            }
        }
    }
    if (reached != n) {
        throw DisconnectedError("mesh is not a single connected component (" + std::to_string(reached) +
                                " of " + std::to_string(n) + " vertices reachable from vertex 0)");
    }
}

/// Returns a copy with vertex positions multiplied by `s`.
inline TriangleMesh scaled(const TriangleMesh& mesh, double s)
{
    return TriangleMesh(mesh.vertices() * s, mesh.faces());
}

///
/// Relabels vertices: vertex `v` of the input becomes vertex `perm[v]` of the output.
/// Faces are carried along; the surface is unchanged.
///
inline TriangleMesh permuted(const TriangleMesh& mesh, const std::vector<int>& perm)
{
    const Index n = mesh.n_vertices();
    if (static_cast<Index>(perm.size()) != n) throw DimensionError("permutation length does not match mesh");
    VertexMatrix v(n, 3);
    for (Index i = 0; i < n; ++i) v.row(perm[static_cast<std::size_t>(i)]) = mesh.vertices().row(i);
    FaceMatrix f = mesh.faces();
    for (Index r = 0; r < f.rows(); ++r) {
        for (int c = 0; c < 3; ++c) f(r, c) = perm[static_cast<std::size_t>(f(r, c))];
    }
    return TriangleMesh(std::move(v), std::move(f));
}

} // namespace bifmap
