#pragma once

#include "bifmap/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace bifmap {

struct LanczosOptions {
    Eigen::Index nev = 6;          // wanted eigenpairs
    Eigen::Index ncv = 0;          // Krylov dimension, 0 picks max(2 nev + 20, nev + 40) capped at n
    Eigen::Index max_matvecs = 0;  // 0 means unlimited
    double tolerance = 1e-12;      // Ritz residual relative to |theta|
    std::uint64_t seed = 0;
};

struct LanczosResult {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // orthonormal columns
    Eigen::Index matvecs = 0;
    Eigen::Index restarts = 0;
    bool converged = false;
};

///
/// Thick-restart Lanczos for the largest eigenpairs of a symmetric operator.
///
/// `apply(x, y)` must write op * x into y. Full reorthogonalisation is used, so the
/// projected matrix is the exact Rayleigh quotient V^T op V of the current basis; after a
/// restart the kept Ritz vectors are followed by the last residual direction, whose
/// couplings are recovered by the next projection.
///
template <typename Apply>
LanczosResult lanczos_largest(Apply&& apply, Eigen::Index n, const LanczosOptions& opt)
{
    using Eigen::Index;
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    const Index nev = opt.nev;
    if (nev < 1 || nev > n) throw DimensionError("lanczos: need 1 <= nev <= n");
    Index ncv = opt.ncv > 0 ? opt.ncv : std::max(2 * nev + 20, nev + 40);
    ncv = std::min(ncv, n);

    MatrixXd basis(n, ncv + 1);
    MatrixXd proj = MatrixXd::Zero(ncv, ncv);
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_unit_orthogonal = [&](Index cols) {
        VectorXd v(n);
        for (Index i = 0; i < n; ++i) v[i] = gauss(rng);
        for (int pass = 0; pass < 2 && cols > 0; ++pass) v -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * v);
        return VectorXd(v / v.norm());
    };
    basis.col(0) = random_unit_orthogonal(0);

    LanczosResult result;
    Index kept = 0;
    VectorXd w(n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> ritz;
    MatrixXd order; // Ritz vectors of proj, columns sorted by descending value
    VectorXd theta;
    double beta = 0.0;

    while (true) {
        for (Index j = kept; j < ncv; ++j) {
            apply(basis.col(j), w);
            ++result.matvecs;
            const auto prev = basis.leftCols(j + 1);
            VectorXd h = prev.transpose() * w;
            w.noalias() -= prev * h;
            const VectorXd h2 = prev.transpose() * w;
            w.noalias() -= prev * h2;
            h += h2;
            proj.col(j).head(j + 1) = h;
            proj.row(j).head(j + 1) = h.transpose();
            beta = w.norm();
            if (j + 1 < ncv) {
                proj(j + 1, j) = proj(j, j + 1) = 0.0;
            }
            // Invariant subspace found: continue with a fresh orthogonal direction, no coupling.
            if (beta <= 1e-14 * std::max(1.0, h.cwiseAbs().maxCoeff())) {
                if (j + 1 < n) basis.col(j + 1) = random_unit_orthogonal(j + 1);
                beta = 0.0;
                continue;
            }
            basis.col(j + 1) = w / beta;
            if (j + 1 < ncv) proj(j + 1, j) = proj(j, j + 1) = beta;
        }

        ritz.compute(proj);
        theta = ritz.eigenvalues().reverse();
        order = ritz.eigenvectors().rowwise().reverse();

        Index good = 0;
        for (Index i = 0; i < nev; ++i) {
            const double res = std::abs(beta * order(ncv - 1, i));
            if (res <= opt.tolerance * std::max(std::abs(theta[i]), 1e-300)) ++good;
        }
        const bool budget_spent = opt.max_matvecs > 0 && result.matvecs >= opt.max_matvecs;
        if (good == nev || ncv == n || budget_spent) {
            result.converged = good == nev || ncv == n;
            break;
        }

        // Keep nev plus half of the spare Ritz vectors, then continue from the residual.
        kept = std::min(ncv - 1, nev + std::max<Index>(1, (ncv - nev) / 2));
        const MatrixXd keep_vectors = basis.leftCols(ncv) * order.leftCols(kept);
        const VectorXd residual_dir = basis.col(ncv);
        basis.leftCols(kept) = keep_vectors;
        basis.col(kept) = residual_dir;
        proj.setZero();
        for (Index i = 0; i < kept; ++i) proj(i, i) = theta[i];
        ++result.restarts;
    }

    result.values = theta.head(nev);
    result.vectors = basis.leftCols(ncv) * order.leftCols(nev);
    return result;
}

} // namespace bifmap
