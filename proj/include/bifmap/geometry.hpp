#pragma once

#include "bifmap/mesh.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace bifmap {

/// Lumped (barycentric) vertex areas. Entries are strictly positive.
struct MassMatrix {
    Eigen::VectorXd diagonal;

    Index size() const noexcept { return diagonal.size(); }
    double total() const { return diagonal.sum(); }
};

/// Symmetric positive semi-definite cotangent Laplacian; constants lie in its kernel.
struct StiffnessMatrix {
    Eigen::SparseMatrix<double> matrix;

    Index size() const noexcept { return matrix.rows(); }
};

/// One third of the incident face areas per vertex.
inline MassMatrix barycentric_mass(const TriangleMesh& mesh)
{
    Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        const double third = mesh.face_area(f) / 3.0;
        for (int c = 0; c < 3; ++c) m[mesh.faces()(f, c)] += third;
    }
    return {std::move(m)};
}

///
/// Cotangent stiffness matrix. For an edge (i, j) the off-diagonal entry is
/// -(cot a + cot b) / 2 summed over the one or two incident triangles, and the diagonal
/// is the negated row sum. Obtuse angles give negative cotangents and are kept.
///
inline StiffnessMatrix cotangent_stiffness(const TriangleMesh& mesh)
{
    const Index n = mesh.n_vertices();
    std::vector<Eigen::Triplet<double>> off;
    off.reserve(static_cast<std::size_t>(6 * mesh.n_faces()));
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int o = mesh.faces()(f, c);
            const int i = mesh.faces()(f, (c + 1) % 3);
            const int j = mesh.faces()(f, (c + 2) % 3);
            const Eigen::Vector3d u = mesh.vertex(i) - mesh.vertex(o);
            const Eigen::Vector3d v = mesh.vertex(j) - mesh.vertex(o);
            // cot of the angle at o, opposite edge (i, j)
            const double cot = u.dot(v) / u.cross(v).norm();
            off.emplace_back(i, j, -0.5 * cot);
            off.emplace_back(j, i, -0.5 * cot);
        }
    }
    Eigen::SparseMatrix<double> w(n, n);
    w.setFromTriplets(off.begin(), off.end());

    // Diagonal from row sums of the assembled off-diagonals, so L * 1 = 0 up to rounding.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (Index col = 0; col < w.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(w, col); it; ++it) diag[it.row()] -= it.value();
    }
    std::vector<Eigen::Triplet<double>> all;
    all.reserve(static_cast<std::size_t>(w.nonZeros() + n));
    for (Index col = 0; col < w.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(w, col); it; ++it) {
            all.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (Index i = 0; i < n; ++i) all.emplace_back(i, i, diag[i]);
    Eigen::SparseMatrix<double> l(n, n);
    l.setFromTriplets(all.begin(), all.end());
    l.makeCompressed();
    return {std::move(l)};
}

} // namespace bifmap
