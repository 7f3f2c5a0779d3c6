#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/mesh.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace bifmap {

enum class GeodesicMethod { EdgeDijkstra };

/// Distances from one source vertex to every vertex of a mesh.
struct GeodesicField {
    int source = 0;
    Eigen::VectorXd distance;
    GeodesicMethod method = GeodesicMethod::EdgeDijkstra;
};

namespace detail {

using QueueEntry = std::pair<double, int>;
using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

inline void check_vertex(const TriangleMesh& mesh, Index v)
{
    if (v < 0 || v >= mesh.n_vertices()) {
        throw DimensionError("vertex index " + std::to_string(v) + " out of range");
    }
}

} // namespace detail

/// Shortest paths on the edge graph, weighted by Euclidean edge length.
inline GeodesicField geodesic_distances(const TriangleMesh& mesh, int source)
{
    detail::check_vertex(mesh, source);
    const Index n = mesh.n_vertices();
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    dist[source] = 0.0;
    detail::MinQueue queue;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
        const auto [d, v] = queue.top();
        queue.pop();
        if (d > dist[v]) continue;
        for (const auto& nb : mesh.adjacency()[static_cast<std::size_t>(v)]) {
            const double cand = d + nb.length;
            if (cand < dist[nb.vertex]) {
                dist[nb.vertex] = cand;
                queue.emplace(cand, nb.vertex);
            }
        }
    }
    if (!dist.allFinite()) throw DisconnectedError("geodesic source cannot reach every vertex");
    return {source, std::move(dist), GeodesicMethod::EdgeDijkstra};
}

/// Single pair distance; stops as soon as `target` is settled.
inline double geodesic_distance(const TriangleMesh& mesh, int source, int target)
{
    detail::check_vertex(mesh, source);
    detail::check_vertex(mesh, target);
    if (source == target) return 0.0;
    std::vector<double> dist(static_cast<std::size_t>(mesh.n_vertices()), std::numeric_limits<double>::infinity());
    dist[static_cast<std::size_t>(source)] = 0.0;
    detail::MinQueue queue;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
        const auto [d, v] = queue.top();
        queue.pop();
        if (v == target) return d;
        if (d > dist[static_cast<std::size_t>(v)]) continue;
        for (const auto& nb : mesh.adjacency()[static_cast<std::size_t>(v)]) {
            const double cand = d + nb.length;
            if (cand < dist[static_cast<std::size_t>(nb.vertex)]) {
                dist[static_cast<std::size_t>(nb.vertex)] = cand;
                queue.emplace(cand, nb.vertex);
            }
        }
    }
    throw DisconnectedError("geodesic target unreachable");
}

///
/// Greedy farthest point sampling. The first sample is `seed_vertex`; each next sample
/// maximises the geodesic distance to the samples chosen so far, ties going to the
/// lowest vertex index.
///
inline std::vector<int> farthest_point_sampling(const TriangleMesh& mesh, Index count, int seed_vertex)
{
    detail::check_vertex(mesh, seed_vertex);
    if (count < 1 || count > mesh.n_vertices()) {
        throw DimensionError("farthest point sampling needs 1 <= count <= n_vertices");
    }
    std::vector<int> samples{seed_vertex};
    samples.reserve(static_cast<std::size_t>(count));
    Eigen::VectorXd nearest = geodesic_distances(mesh, seed_vertex).distance;
    while (static_cast<Index>(samples.size()) < count) {
        Index best = 0;
        // maxCoeff returns the first maximiser, which gives the lowest-index tie-break.
        nearest.maxCoeff(&best);
        samples.push_back(static_cast<int>(best));
        nearest = nearest.cwiseMin(geodesic_distances(mesh, static_cast<int>(best)).distance);
    }
    return samples;
}

inline constexpr Index kDiameterSources = 50;

/// Max geodesic eccentricity over a fixed farthest-point subset of sources.
inline double mesh_diameter(const TriangleMesh& mesh, Index sources = kDiameterSources)
{
    const Index count = std::min(sources, mesh.n_vertices());
    double diameter = 0.0;
    for (int s : farthest_point_sampling(mesh, count, 0)) {
        diameter = std::max(diameter, geodesic_distances(mesh, s).distance.maxCoeff());
    }
    return diameter;
}

} // namespace bifmap
