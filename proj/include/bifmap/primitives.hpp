#pragma once

#include "bifmap/mesh.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

// Procedural meshes used by the tests, demos and synthetic benchmarks.

namespace bifmap::primitives {

/// Regular icosahedron inscribed in the unit sphere (12 vertices, 20 faces).
inline TriangleMesh icosahedron()
{
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    VertexMatrix v(12, 3);
    v << -1, p, 0, 1, p, 0, -1, -p, 0, 1, -p, 0,
         0, -1, p, 0, 1, p, 0, -1, -p, 0, 1, -p,
         p, 0, -1, p, 0, 1, -p, 0, -1, -p, 0, 1;
    v /= std::sqrt(1.0 + p * p);
    FaceMatrix f(20, 3);
    f << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11,
         1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7, 1, 8,
         3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9,
         4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9, 8, 1;
    return TriangleMesh(std::move(v), std::move(f));
}

/// Regular octahedron inscribed in the unit sphere (6 vertices, 8 faces).
inline TriangleMesh octahedron()
{
    VertexMatrix v(6, 3);
    v << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
    FaceMatrix f(8, 3);
    f << 0, 2, 4, 2, 1, 4, 1, 3, 4, 3, 0, 4, 2, 0, 5, 1, 2, 5, 3, 1, 5, 0, 3, 5;
    return TriangleMesh(std::move(v), std::move(f));
}

/// Loop-style midpoint subdivision of the icosahedron, projected to the unit sphere.
inline TriangleMesh icosphere(int levels)
{
    TriangleMesh base = icosahedron();
    std::vector<Eigen::Vector3d> verts;
    for (Index i = 0; i < base.n_vertices(); ++i) verts.push_back(base.vertex(i));
    std::vector<std::array<int, 3>> faces;
    for (Index f = 0; f < base.n_faces(); ++f) {
        faces.push_back({base.faces()(f, 0), base.faces()(f, 1), base.faces()(f, 2)});
    }
    for (int level = 0; level < levels; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back((verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]).normalized());
            const int id = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& t : faces) {
            const int ab = mid(t[0], t[1]);
            const int bc = mid(t[1], t[2]);
            const int ca = mid(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    VertexMatrix v(static_cast<Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) v.row(static_cast<Index>(i)) = verts[i].transpose();
    FaceMatrix f(static_cast<Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        f.row(static_cast<Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }
    return TriangleMesh(std::move(v), std::move(f));
}

/// Moves every vertex radially by a uniform random factor in [1 - amount, 1 + amount].
inline TriangleMesh radial_jitter(const TriangleMesh& mesh, double amount, unsigned seed)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-amount, amount);
    VertexMatrix v = mesh.vertices();
    for (Index i = 0; i < v.rows(); ++i) v.row(i) *= 1.0 + u(rng);
    return TriangleMesh(std::move(v), mesh.faces());
}

///
/// Elongated, asymmetric closed surface (a "bumpy cigar") on a latitude/longitude grid
/// with two pole vertices. `rings` interior latitude rings, `segments` vertices per ring.
/// Vertex count: rings * segments + 2. Scaled to unit-ish total area times `area_scale`.
///
inline TriangleMesh bumpy_body(int rings, int segments, double area_scale = 2.0)
{
    const double pi = std::acos(-1.0);
    const Index n = static_cast<Index>(rings) * segments + 2;
    VertexMatrix v(n, 3);
    auto place = [&](Index row, double theta, double phi) {
        const double bumps = 1.0 + 0.25 * std::sin(3.0 * theta) * std::cos(phi) +
                             0.12 * std::cos(2.0 * phi + theta) + 0.18 * std::exp(-8.0 * (theta - 2.2) * (theta - 2.2)) * std::sin(phi);
        const double axial = 3.0 * std::cos(theta) + 0.3 * std::sin(2.0 * theta);
        const double radial = std::sin(theta) * bumps;
        v.row(row) << axial, radial * std::cos(phi), radial * std::sin(phi);
    };
    v.row(0) << 3.0, 0.0, 0.0;
    for (int r = 0; r < rings; ++r) {
        const double theta = pi * (r + 1) / (rings + 1);
        for (int s = 0; s < segments; ++s) {
            // Alternate rings are offset by half a segment to avoid long thin quads.
            const double phi = 2.0 * pi * (s + 0.5 * (r % 2)) / segments;
            place(1 + static_cast<Index>(r) * segments + s, theta, phi);
        }
    }
    v.row(n - 1) << -3.0, 0.0, 0.0;

    std::vector<std::array<int, 3>> faces;
    auto id = [&](int r, int s) { return 1 + r * segments + ((s % segments) + segments) % segments; };
    for (int s = 0; s < segments; ++s) faces.push_back({0, id(0, s), id(0, s + 1)});
    for (int r = 0; r + 1 < rings; ++r) {
        const int shift = r % 2; // odd rings are rotated forward by half a segment
        for (int s = 0; s < segments; ++s) {
            const int a = id(r, s), b = id(r, s + 1);
            const int c = id(r + 1, s - 1 + shift), d = id(r + 1, s + shift);
            faces.push_back({a, d, b});
            faces.push_back({a, c, d});
        }
    }
    for (int s = 0; s < segments; ++s) faces.push_back({static_cast<int>(n - 1), id(rings - 1, s + 1), id(rings - 1, s)});

    FaceMatrix f(static_cast<Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        f.row(static_cast<Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }
    TriangleMesh raw(v, f);
    return TriangleMesh(v * std::sqrt(area_scale / raw.total_area()), std::move(f));
}

///
/// Bends a mesh around the z axis: the x coordinate is wrapped onto a circular arc of
/// radius `radius` in the x/y plane. Lengths along the arc are preserved, so thin shapes
/// elongated in x are deformed near-isometrically.
///
inline TriangleMesh bent(const TriangleMesh& mesh, double radius)
{
    VertexMatrix v = mesh.vertices();
    for (Index i = 0; i < v.rows(); ++i) {
        const double x = v(i, 0), y = v(i, 1);
        const double a = x / radius;
        const double r = radius - y;
        v(i, 0) = r * std::sin(a);
        v(i, 1) = radius - r * std::cos(a);
    }
    return TriangleMesh(std::move(v), mesh.faces());
}

/// Uniformly random permutation of 0..n-1 (deterministic in `seed`).
inline std::vector<int> random_permutation(Index n, unsigned seed)
{
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 rng(seed);
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    return perm;
}

} // namespace bifmap::primitives
