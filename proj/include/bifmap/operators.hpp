#pragma once

#include "bifmap/descriptors.hpp"
#include "bifmap/errors.hpp"
#include "bifmap/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace bifmap {

///
/// Gaussian similarity of descriptor values, K(x, x') = exp(-(f(x) - f(x'))^2 / (2 sigma^2)).
/// Entries are evaluated on demand; the n x n matrix is never formed.
///
class DescriptorKernel {
public:
    DescriptorKernel(Eigen::VectorXd values, double sigma) : values_(std::move(values)), sigma_(sigma)
    {
        if (!(sigma_ > 0.0)) throw DimensionError("kernel bandwidth must be positive");
    }

    DescriptorKernel(const PointwiseDescriptor& d, double sigma) : DescriptorKernel(d.values, sigma) {}

    Index size() const noexcept { return values_.size(); }
    double sigma() const noexcept { return sigma_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }

    double operator()(Index x, Index xp) const
    {
        const double diff = values_[x] - values_[xp];
        return std::exp(-diff * diff / (2.0 * sigma_ * sigma_));
    }

    /// Column K(., j).
    Eigen::VectorXd column(Index j) const
    {
        const double fj = values_[j];
        return (-(values_.array() - fj).square() / (2.0 * sigma_ * sigma_)).exp().matrix();
    }

private:
    Eigen::VectorXd values_;
    double sigma_;
};

inline double descriptor_kernel_eval(const DescriptorKernel& kernel, Index x, Index xp)
{
    detail::require_dims(x >= 0 && x < kernel.size() && xp >= 0 && xp < kernel.size(), "kernel index out of range");
    return kernel(x, xp);
}

/// Tikhonov shift applied to the core block, relative to its mean diagonal.
inline constexpr double kNystromRegularization = 1e-8;

///
/// Column samples of a kernel for the Nystrom approximation K ~ R R0^-1 R^T.
/// `projected` holds Phi^T A R, so the spectral product is mass-weighted on both sides.
///
struct NystromFactors {
    std::vector<int> samples;
    Eigen::MatrixXd projected; // k x n0
    Eigen::MatrixXd core;      // n0 x n0, symmetric
    double epsilon = 0.0;
};

namespace detail {

inline void check_samples(const std::vector<int>& samples, Index n)
{
    if (samples.empty()) throw DimensionError("Nystrom needs at least one sample");
    std::set<int> seen;
    for (int s : samples) {
        if (s < 0 || s >= n) throw DimensionError("Nystrom sample out of range");
        if (!seen.insert(s).second) throw DimensionError("Nystrom samples must be distinct");
    }
}

/// Kernel columns at the samples, n x n0.
inline Eigen::MatrixXd kernel_columns(const DescriptorKernel& kernel, const std::vector<int>& samples)
{
    Eigen::MatrixXd r(kernel.size(), static_cast<Index>(samples.size()));
    for (std::size_t j = 0; j < samples.size(); ++j) r.col(static_cast<Index>(j)) = kernel.column(samples[j]);
    return r;
}

inline Eigen::MatrixXd core_block(const Eigen::MatrixXd& r, const std::vector<int>& samples)
{
    const auto n0 = static_cast<Index>(samples.size());
    Eigen::MatrixXd core(n0, n0);
    for (Index i = 0; i < n0; ++i) core.row(i) = r.row(samples[static_cast<std::size_t>(i)]);
    return 0.5 * (core + core.transpose());
}

inline Eigen::LLT<Eigen::MatrixXd> regularized_core(const Eigen::MatrixXd& core, double epsilon)
{
    Eigen::MatrixXd shifted = core;
    shifted.diagonal().array() += epsilon;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 4.0 * std::numeric_limits<double>::epsilon())) {
        throw SingularCoreError("Nystrom core block is numerically singular");
    }
    return llt;
}

} // namespace detail

inline NystromFactors nystrom_factors(const DescriptorKernel& kernel, const SpectralBasis& basis,
                                      const std::vector<int>& samples)
{
    detail::require_dims(kernel.size() == basis.n(), "kernel and basis sizes differ");
    detail::check_samples(samples, basis.n());
    const Eigen::MatrixXd r = detail::kernel_columns(kernel, samples);
    NystromFactors f;
    f.samples = samples;
    f.projected = basis.eigenfunctions.transpose() * (basis.mass.diagonal.asDiagonal() * r);
    f.core = detail::core_block(r, samples);
    f.epsilon = kNystromRegularization * f.core.trace() / static_cast<double>(samples.size());
    return f;
}

/// P (R0 + eps I)^-1 P^T, symmetrised.
inline SpectralOperator spectral_kernel(const NystromFactors& factors, ShapeTag shape = ShapeTag::X)
{
    const auto llt = detail::regularized_core(factors.core, factors.epsilon);
    const Eigen::MatrixXd m = factors.projected * llt.solve(factors.projected.transpose());
    return {0.5 * (m + m.transpose()), OperatorKind::DescriptorKernel, shape};
}

///
/// Spectral bilateral operator diag(exp(-lambda t)) + gamma * Phi^T A K A Phi, with the
/// kernel part from Nystrom samples. With gamma == 0 the heat operator is returned as is.
///
inline SpectralOperator bilateral_operator(const SpectralBasis& basis, const DescriptorKernel& kernel, double t,
                                           double gamma, const std::vector<int>& samples,
                                           ShapeTag shape = ShapeTag::X)
{
    if (!(gamma >= 0.0)) throw DimensionError("bilateral weight must be non-negative");
    SpectralOperator op = heat_operator_spectral(basis, t, shape);
    op.kind = OperatorKind::Bilateral;
    if (gamma == 0.0) return op;
    op.matrix += gamma * spectral_kernel(nystrom_factors(kernel, basis, samples), shape).matrix;
    return op;
}

/// Phi^T A diag(f) Phi: the spectral image of pointwise multiplication by f.
inline SpectralOperator diagonal_operator(const SpectralBasis& basis, const Eigen::VectorXd& f,
                                          ShapeTag shape = ShapeTag::X)
{
    detail::require_dims(f.size() == basis.n(), "descriptor length does not match basis");
    const Eigen::VectorXd w = basis.mass.diagonal.cwiseProduct(f);
    const Eigen::MatrixXd m = basis.eigenfunctions.transpose() * (w.asDiagonal() * basis.eigenfunctions);
    return {0.5 * (m + m.transpose()), OperatorKind::Diagonal, shape};
}

inline SpectralOperator diagonal_operator(const SpectralBasis& basis, const PointwiseDescriptor& f,
                                          ShapeTag shape = ShapeTag::X)
{
    return diagonal_operator(basis, f.values, shape);
}

/// Leading eigenpairs of the integral operator u -> K A u.
struct KernelEigenfunctions {
    Eigen::VectorXd values;    // descending
    Eigen::MatrixXd functions; // n x count, A-orthonormal
};

///
/// Nystrom eigenfunctions of the descriptor kernel operator. The symmetric form
/// A^1/2 K A^1/2 ~ B W B^T with B = A^1/2 R is diagonalised through a thin QR of B.
///
inline KernelEigenfunctions kernel_eigenfunctions(const DescriptorKernel& kernel, const MassMatrix& mass,
                                                  const std::vector<int>& samples, Index count)
{
    detail::require_dims(kernel.size() == mass.size(), "kernel and mass sizes differ");
    detail::check_samples(samples, kernel.size());
    const auto n0 = static_cast<Index>(samples.size());
    if (count < 1 || count > n0) throw DimensionError("kernel eigenfunction count must be in [1, n0]");

    const Eigen::MatrixXd r = detail::kernel_columns(kernel, samples);
    const Eigen::MatrixXd core = detail::core_block(r, samples);
    const auto llt = detail::regularized_core(core, kNystromRegularization * core.trace() / static_cast<double>(n0));

    const Eigen::VectorXd sqrt_mass = mass.diagonal.cwiseSqrt();
    const Eigen::MatrixXd b = sqrt_mass.asDiagonal() * r;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(b.rows(), n0);
    const Eigen::MatrixXd tri = q.transpose() * b; // n0 x n0
    Eigen::MatrixXd small = tri * llt.solve(tri.transpose());
    small = 0.5 * (small + small.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);

    KernelEigenfunctions out;
    out.values = es.eigenvalues().reverse().head(count);
    Eigen::MatrixXd u = q * es.eigenvectors().rowwise().reverse().leftCols(count);
    out.functions = sqrt_mass.cwiseInverse().asDiagonal() * u;
    detail::fix_signs(out.functions);
    return out;
}

} // namespace bifmap
