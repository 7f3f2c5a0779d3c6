#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/geometry.hpp"
#include "bifmap/lanczos.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace bifmap {

///
/// Truncated Laplace-Beltrami eigenbasis of a shape.
///
/// Eigenvalues ascend from the (numerically) zero constant mode; the eigenfunctions are
/// orthonormal with respect to the lumped mass matrix, Phi^T A Phi = I.
///
struct SpectralBasis {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenfunctions; // n x k
    MassMatrix mass;

    Index k() const noexcept { return eigenvalues.size(); }
    Index n() const noexcept { return eigenfunctions.rows(); }

    /// The first `k` modes only.
    SpectralBasis truncated(Index k) const
    {
        if (k < 1 || k > this->k()) throw DimensionError("cannot truncate basis to k=" + std::to_string(k));
        return {eigenvalues.head(k), eigenfunctions.leftCols(k), mass};
    }
};

/// Coefficients of a function in a SpectralBasis.
struct SpectralFunction {
    Eigen::VectorXd coefficients;

    Index size() const noexcept { return coefficients.size(); }
};

enum class OperatorKind { Bilateral, Diagonal, Heat, DescriptorKernel, Explicit };
enum class ShapeTag { X, Y };

/// k x k spectral image of a pairwise operator.
struct SpectralOperator {
    Eigen::MatrixXd matrix;
    OperatorKind kind = OperatorKind::Explicit;
    ShapeTag shape = ShapeTag::X;

    Index size() const noexcept { return matrix.rows(); }
};

struct EigenOptions {
    /// Per-pair acceptance: ||L phi - lambda A phi|| <= tolerance * max(1, lambda) * ||A phi||.
    double tolerance = 1e-8;
    /// Meshes up to this many vertices use a dense symmetric solver.
    Index dense_threshold = 500;
    /// Lanczos budget in units of k operator applications.
    Index iterations_per_mode = 50;
    std::uint64_t seed = 0;
};

namespace detail {

/// Flips each column so its largest-magnitude entry (first one on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& vectors)
{
    for (Index c = 0; c < vectors.cols(); ++c) {
        Index at = 0;
        vectors.col(c).cwiseAbs().maxCoeff(&at);
        if (vectors(at, c) < 0.0) vectors.col(c) *= -1.0;
    }
}

inline Eigen::VectorXd generalized_residuals(const StiffnessMatrix& L, const MassMatrix& A,
                                             const Eigen::VectorXd& values, const Eigen::MatrixXd& phi)
{
    Eigen::VectorXd out(values.size());
    const Eigen::MatrixXd lphi = L.matrix * phi;
    for (Index i = 0; i < values.size(); ++i) {
        const Eigen::VectorXd aphi = A.diagonal.cwiseProduct(phi.col(i));
        out[i] = (lphi.col(i) - values[i] * aphi).norm() / aphi.norm();
    }
    return out;
}

/// Rayleigh-Ritz of the scaled operator S = A^-1/2 L A^-1/2 on the span of `y`.
inline void rayleigh_ritz(const Eigen::SparseMatrix<double>& s, Eigen::MatrixXd& y, Eigen::VectorXd& values)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
    Eigen::MatrixXd small = q.transpose() * (s * q);
    small = 0.5 * (small + small.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
    values = es.eigenvalues();
    y = q * es.eigenvectors();
}

} // namespace detail

///
/// The k smallest eigenpairs of L phi = lambda A phi.
///
/// The problem is reduced to the standard symmetric problem for S = A^-1/2 L A^-1/2.
/// Small meshes use a dense solver; larger ones use shift-invert Lanczos with a sparse
/// Cholesky factorisation of L - sigma A (sigma < 0), followed by a Rayleigh-Ritz pass on S.
/// Throws ConvergenceError when the residual check fails within the iteration budget.
///
inline SpectralBasis eigendecompose(const StiffnessMatrix& L, const MassMatrix& A, Index k,
                                    const EigenOptions& opt = {})
{
    const Index n = L.size();
    if (A.size() != n) throw DimensionError("stiffness and mass sizes differ");
    if (k < 1 || k > n) throw DimensionError("eigendecompose needs 1 <= k <= n");
    if ((A.diagonal.array() <= 0.0).any()) throw ValidationError("mass matrix must be strictly positive");

    const Eigen::VectorXd inv_sqrt_mass = A.diagonal.cwiseSqrt().cwiseInverse();
    const Eigen::SparseMatrix<double> s =
        inv_sqrt_mass.asDiagonal() * L.matrix * inv_sqrt_mass.asDiagonal();

    Eigen::VectorXd values;
    Eigen::MatrixXd y;
    if (n <= opt.dense_threshold) {
        Eigen::MatrixXd dense = Eigen::MatrixXd(s);
        dense = 0.5 * (dense + dense.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
        if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed");
        values = es.eigenvalues().head(k);
        y = es.eigenvectors().leftCols(k);
    } else {
        // Shift below the spectrum so L - sigma A is positive definite.
        const double scale = s.diagonal().mean();
        const double sigma = -1e-3 * scale;
        Eigen::SparseMatrix<double> shifted = L.matrix;
        for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma * A.diagonal[i];
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(shifted);
        if (chol.info() != Eigen::Success) throw ConvergenceError("factorisation of shifted stiffness failed");
        const Eigen::VectorXd sqrt_mass = A.diagonal.cwiseSqrt();

        // Extra modes guard against a cluster straddling the k-th eigenvalue.
        const Index wanted = std::min(n, k + std::max<Index>(4, k / 5));
        LanczosOptions lo;
        lo.nev = wanted;
        lo.seed = opt.seed;
        lo.tolerance = 1e-13;
        lo.max_matvecs = opt.iterations_per_mode * k;
        auto apply = [&](const auto& x, Eigen::VectorXd& out) {
            out = sqrt_mass.cwiseProduct(chol.solve(Eigen::VectorXd(sqrt_mass.cwiseProduct(x))));
        };
        const LanczosResult lr = lanczos_largest(apply, n, lo);
        if (!lr.converged) {
            throw ConvergenceError("Lanczos did not converge within " + std::to_string(lo.max_matvecs) +
                                   " operator applications");
        }
        y = lr.vectors;
        detail::rayleigh_ritz(s, y, values);
        values = values.head(k).eval();
        y = y.leftCols(k).eval();
    }

    Eigen::MatrixXd phi = inv_sqrt_mass.asDiagonal() * y;
    detail::fix_signs(phi);
    SpectralBasis basis{std::move(values), std::move(phi), A};

    const Eigen::VectorXd res = detail::generalized_residuals(L, A, basis.eigenvalues, basis.eigenfunctions);
    for (Index i = 0; i < k; ++i) {
        if (!(res[i] <= opt.tolerance * std::max(1.0, std::abs(basis.eigenvalues[i])))) {
            throw ConvergenceError("eigenpair " + std::to_string(i) + " residual " + std::to_string(res[i]) +
                                   " exceeds tolerance");
        }
    }
    return basis;
}

inline SpectralBasis eigendecompose(const TriangleMesh& mesh, Index k, const EigenOptions& opt = {})
{
    return eigendecompose(cotangent_stiffness(mesh), barycentric_mass(mesh), k, opt);
}

/// Coefficients Phi^T A f.
inline SpectralFunction project_function(const SpectralBasis& basis, const Eigen::VectorXd& f)
{
    detail::require_dims(f.size() == basis.n(), "function length does not match basis");
    return {basis.eigenfunctions.transpose() * basis.mass.diagonal.cwiseProduct(f)};
}

/// Values Phi * coefficients.
inline Eigen::VectorXd reconstruct_function(const SpectralBasis& basis, const SpectralFunction& coeffs)
{
    detail::require_dims(coeffs.size() == basis.k(), "coefficient count does not match basis");
    return basis.eigenfunctions * coeffs.coefficients;
}

/// diag(exp(-lambda_i t)).
inline SpectralOperator heat_operator_spectral(const SpectralBasis& basis, double t, ShapeTag shape = ShapeTag::X)
{
    if (!(t >= 0.0)) throw DimensionError("diffusion time must be non-negative");
    const Eigen::VectorXd d = (-t * basis.eigenvalues.array()).exp();
    return {Eigen::MatrixXd(d.asDiagonal()), OperatorKind::Heat, shape};
}

/// Rows H(t, s, .) = sum_i exp(-lambda_i t) phi_i(s) phi_i(.) for every source s.
inline Eigen::MatrixXd heat_kernel_rows(const SpectralBasis& basis, double t, const std::vector<int>& sources)
{
    if (!(t >= 0.0)) throw DimensionError("diffusion time must be non-negative");
    const Eigen::VectorXd d = (-t * basis.eigenvalues.array()).exp();
    Eigen::MatrixXd rows(static_cast<Index>(sources.size()), basis.k());
    for (std::size_t r = 0; r < sources.size(); ++r) {
        const int s = sources[r];
        if (s < 0 || s >= basis.n()) throw DimensionError("heat kernel source out of range");
        rows.row(static_cast<Index>(r)) = basis.eigenfunctions.row(s).cwiseProduct(d.transpose());
    }
    return rows * basis.eigenfunctions.transpose();
}

// ---- basis cache ------------------------------------------------------------
//
// Flat little-endian file of float64 values: n, k, the k eigenvalues, then the n x k
// eigenfunction matrix in column-major order.

namespace detail {

inline void put_f64(std::ostream& out, double v)
{
    std::array<char, 8> bytes{};
    std::memcpy(bytes.data(), &v, 8);
    out.write(bytes.data(), 8);
}

inline double get_f64(std::istream& in)
{
    std::array<char, 8> bytes{};
    in.read(bytes.data(), 8);
    if (!in) throw ParseError("basis file truncated");
    double v;
    std::memcpy(&v, bytes.data(), 8);
    return v;
}

} // namespace detail

inline void save_basis(const SpectralBasis& basis, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write basis file '" + path.string() + "'");
    detail::put_f64(out, static_cast<double>(basis.n()));
    detail::put_f64(out, static_cast<double>(basis.k()));
    for (Index i = 0; i < basis.k(); ++i) detail::put_f64(out, basis.eigenvalues[i]);
    const double* data = basis.eigenfunctions.data();
    for (Index i = 0; i < basis.eigenfunctions.size(); ++i) detail::put_f64(out, data[i]);
    if (!out) throw IOError("write failed for '" + path.string() + "'");
}

/// Reads a basis file; the mass matrix is not stored and must be supplied.
inline SpectralBasis load_basis(const std::filesystem::path& path, const MassMatrix& mass)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open basis file '" + path.string() + "'");
    const double nd = detail::get_f64(in);
    const double kd = detail::get_f64(in);
    if (!(nd >= 1 && kd >= 1 && nd == std::floor(nd) && kd == std::floor(kd) && kd <= nd)) {
        throw ParseError("basis file header is invalid");
    }
    const auto n = static_cast<Index>(nd);
    const auto k = static_cast<Index>(kd);
    if (n != mass.size()) throw DimensionError("basis file vertex count does not match mesh");
    SpectralBasis basis{Eigen::VectorXd(k), Eigen::MatrixXd(n, k), mass};
    for (Index i = 0; i < k; ++i) basis.eigenvalues[i] = detail::get_f64(in);
    double* data = basis.eigenfunctions.data();
    for (Index i = 0; i < n * k; ++i) data[i] = detail::get_f64(in);
    return basis;
}

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
inline std::string content_hash(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open '" + path.string() + "'");
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

///
/// Eigendecomposition with an on-disk cache keyed by the mesh file's content hash.
/// A cached basis with at least k modes is truncated and reused.
///
inline SpectralBasis eigendecompose_cached(const TriangleMesh& mesh, const std::filesystem::path& mesh_path, Index k,
                                           const std::filesystem::path& cache_dir, const EigenOptions& opt = {})
{
    const MassMatrix mass = barycentric_mass(mesh);
    const auto file = cache_dir / (content_hash(mesh_path) + ".basis");
    if (std::filesystem::exists(file)) {
        try {
            SpectralBasis cached = load_basis(file, mass);
            if (cached.k() >= k) return cached.truncated(k);
        } catch (const Error&) {
            // unreadable or mismatched cache entries are recomputed
        }
    }
    SpectralBasis basis = eigendecompose(cotangent_stiffness(mesh), mass, k, opt);
    std::filesystem::create_directories(cache_dir);
    save_basis(basis, file);
    return basis;
}

} // namespace bifmap
