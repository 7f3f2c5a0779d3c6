#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bifmap {

enum class SolverPath { Auto, Dense, MatrixFree };

/// Problems with k_X * k_Y up to this size are solved densely on the Auto path (k <= 30).
inline constexpr Index kDenseSolveMaxUnknowns = 900;

struct SolverConfig {
    double alpha = 1.0;    // commutator weight
    Index k = 60;          // basis size on both shapes
    double t = 1e-3;       // heat diffusion time
    double sigma = 3.0;    // descriptor kernel bandwidth (normalised descriptor units)
    double gamma = 1.0;    // descriptor kernel weight inside the bilateral operator
    double sigma_d = 0.0;  // gaussian landmark width; <= 0 means 0.05 x mesh diameter
    Index n0 = 100;        // Nystrom samples
    Index icp_iterations = 10;
    double cg_tolerance = 1e-12;  // relative residual of the normal equations
    Index cg_max_iterations = 100000;
    SolverPath path = SolverPath::Auto;

    void validate() const
    {
        if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
        if (k < 1) throw ValidationError("k must be positive");
        if (icp_iterations < 0) throw ValidationError("icp_iterations must be non-negative");
        if (!(t >= 0.0) || !(sigma > 0.0) || !(gamma >= 0.0)) throw ValidationError("invalid operator parameters");
        if (n0 < 1) throw ValidationError("n0 must be positive");
        if (!(cg_tolerance > 0.0) || cg_max_iterations < 1) throw ValidationError("invalid CG settings");
    }
};

struct SolverDiagnostics {
    std::vector<double> descriptor_residuals; // ||C a_i - b_i||^2, unweighted
    std::vector<double> commutator_residuals; // ||C X_j - Y_j C||_F^2, unweighted
    double objective = 0.0;                   // weighted objective at the solution
    Index iterations = 0;                     // CG iterations (0 on the dense path)
    bool dense = false;
    bool rank_warning = false;
    std::vector<double> icp_residuals;
    bool icp_stopped_early = false;
};

/// C maps spectral coefficients on X (k_X) to coefficients on Y (k_Y).
struct FunctionalMap {
    Eigen::MatrixXd C;
    SolverDiagnostics diagnostics;
};

enum class MapMethod { NearestSpectral, GroundTruth };

/// target[x] is the vertex of Y matched to vertex x of X.
struct CorrespondenceMap {
    std::vector<int> target;
    MapMethod method = MapMethod::NearestSpectral;

    std::size_t size() const noexcept { return target.size(); }
};

inline double commutator_residual(const Eigen::MatrixXd& C, const SpectralOperator& op_x, const SpectralOperator& op_y)
{
    detail::require_dims(op_x.matrix.rows() == op_x.matrix.cols() && op_y.matrix.rows() == op_y.matrix.cols(),
                         "operators must be square");
    detail::require_dims(C.cols() == op_x.size() && C.rows() == op_y.size(), "operator sizes do not match C");
    return (C * op_x.matrix - op_y.matrix * C).squaredNorm();
}

inline double commutator_residual(const FunctionalMap& map, const SpectralOperator& op_x, const SpectralOperator& op_y)
{
    return commutator_residual(map.C, op_x, op_y);
}

namespace detail {

///
/// Normal operator of the weighted objective
///   sum_i w_i ||C a_i - b_i||^2 + alpha sum_j v_j ||C X_j - Y_j C||^2
/// written as N(C) = C G + H C - alpha sum_j v_j (Y_j C X_j^T + Y_j^T C X_j).
///
class NormalOperator {
public:
    NormalOperator(const std::vector<SpectralFunction>& fx, const std::vector<SpectralFunction>& fy,
                   const std::vector<SpectralOperator>& ops_x, const std::vector<SpectralOperator>& ops_y,
                   double alpha, Index kx, Index ky)
        : alpha_(alpha), kx_(kx), ky_(ky)
    {
        gram_ = Eigen::MatrixXd::Zero(kx, kx);
        rhs_ = Eigen::MatrixXd::Zero(ky, kx);
        for (std::size_t i = 0; i < fx.size(); ++i) {
            const double nb = fy[i].coefficients.squaredNorm();
            const double w = nb > 0.0 ? 1.0 / nb : 1.0;
            desc_weights_.push_back(w);
            gram_.noalias() += w * fx[i].coefficients * fx[i].coefficients.transpose();
            rhs_.noalias() += w * fy[i].coefficients * fx[i].coefficients.transpose();
        }
        left_ = gram_;
        right_ = Eigen::MatrixXd::Zero(ky, ky);
        for (std::size_t j = 0; j < ops_x.size(); ++j) {
            const auto& x = ops_x[j].matrix;
            const auto& y = ops_y[j].matrix;
            const double nx = x.squaredNorm();
            const double v = nx > 0.0 ? 1.0 / nx : 1.0;
            op_weights_.push_back(v);
            left_.noalias() += alpha * v * x * x.transpose();
            right_.noalias() += alpha * v * y.transpose() * y;
            symmetric_.push_back(x.isApprox(x.transpose(), 0.0) && y.isApprox(y.transpose(), 0.0));
        }
        ops_x_ = &ops_x;
        ops_y_ = &ops_y;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& c) const
    {
        Eigen::MatrixXd out = c * left_;
        out.noalias() += right_ * c;
        for (std::size_t j = 0; j < ops_x_->size(); ++j) {
            const auto& x = (*ops_x_)[j].matrix;
            const auto& y = (*ops_y_)[j].matrix;
            const double s = alpha_ * op_weights_[j];
            if (symmetric_[j]) {
                out.noalias() -= (2.0 * s) * (y * (c * x));
            } else {
                out.noalias() -= s * (y * (c * x.transpose()));
                out.noalias() -= s * (y.transpose() * (c * x));
            }
        }
        return out;
    }

    /// Explicit normal matrix acting on vec(C) (column-major).
    Eigen::MatrixXd assemble() const
    {
        const Eigen::MatrixXd iy = Eigen::MatrixXd::Identity(ky_, ky_);
        const Eigen::MatrixXd ix = Eigen::MatrixXd::Identity(kx_, kx_);
        Eigen::MatrixXd n = kron(left_.transpose(), iy) + kron(ix, right_);
        for (std::size_t j = 0; j < ops_x_->size(); ++j) {
            const auto& x = (*ops_x_)[j].matrix;
            const auto& y = (*ops_y_)[j].matrix;
            const double s = alpha_ * op_weights_[j];
            n.noalias() -= s * kron(x, y);
            n.noalias() -= s * kron(x.transpose(), y.transpose());
        }
        return 0.5 * (n + n.transpose());
    }

    const Eigen::MatrixXd& rhs() const noexcept { return rhs_; }
    const std::vector<double>& descriptor_weights() const noexcept { return desc_weights_; }
    const std::vector<double>& operator_weights() const noexcept { return op_weights_; }

private:
    static Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
    {
        Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Index i = 0; i < a.rows(); ++i) {
            for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
        return out;
    }

    double alpha_;
    Index kx_, ky_;
    Eigen::MatrixXd gram_, rhs_, left_, right_;
    std::vector<double> desc_weights_, op_weights_;
    std::vector<bool> symmetric_;
    const std::vector<SpectralOperator>* ops_x_ = nullptr;
    const std::vector<SpectralOperator>* ops_y_ = nullptr;
};

} // namespace detail

///
/// Minimises sum_i ||C fx_i - fy_i||^2 / ||fy_i||^2 + alpha sum_j ||C X_j - Y_j C||^2 / ||X_j||^2.
///
/// Returns the minimum-norm minimiser. Small problems are solved densely through an
/// eigendecomposition of the normal matrix; larger ones by conjugate gradients on the normal
/// equations, started from zero so the iterates stay in the range of the normal operator.
///
inline FunctionalMap solve_fmap(const std::vector<SpectralFunction>& fx, const std::vector<SpectralFunction>& fy,
                                const std::vector<SpectralOperator>& ops_x, const std::vector<SpectralOperator>& ops_y,
                                const SolverConfig& cfg)
{
    detail::require_dims(fx.size() == fy.size(), "descriptor lists differ in length");
    detail::require_dims(ops_x.size() == ops_y.size(), "operator lists differ in length");
    if (!(cfg.alpha >= 0.0)) throw ValidationError("alpha must be non-negative");

    Index kx = fx.empty() ? (ops_x.empty() ? cfg.k : ops_x.front().size()) : fx.front().size();
    Index ky = fy.empty() ? (ops_y.empty() ? cfg.k : ops_y.front().size()) : fy.front().size();
    for (std::size_t i = 0; i < fx.size(); ++i) {
        detail::require_dims(fx[i].size() == kx && fy[i].size() == ky, "descriptor coefficient sizes are inconsistent");
    }
    for (std::size_t j = 0; j < ops_x.size(); ++j) {
        detail::require_dims(ops_x[j].matrix.rows() == kx && ops_x[j].matrix.cols() == kx,
                             "source operator size does not match k_X");
        detail::require_dims(ops_y[j].matrix.rows() == ky && ops_y[j].matrix.cols() == ky,
                             "target operator size does not match k_Y");
    }

    const detail::NormalOperator normal(fx, fy, ops_x, ops_y, cfg.alpha, kx, ky);
    FunctionalMap result;
    result.C = Eigen::MatrixXd::Zero(ky, kx);
    auto& diag = result.diagnostics;
    diag.rank_warning = fx.empty();

    const bool dense = cfg.path == SolverPath::Dense ||
                       (cfg.path == SolverPath::Auto && kx * ky <= kDenseSolveMaxUnknowns);
    diag.dense = dense;

    const double rhs_norm = normal.rhs().norm();
    if (rhs_norm == 0.0) {
        diag.rank_warning = true;
    } else if (dense) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal.assemble());
        const Eigen::VectorXd& ev = es.eigenvalues();
        const double cutoff = static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() *
                              std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        Eigen::VectorXd proj = es.eigenvectors().transpose() * Eigen::Map<const Eigen::VectorXd>(normal.rhs().data(), kx * ky);
        for (Index i = 0; i < ev.size(); ++i) {
            if (ev[i] > cutoff) {
                proj[i] /= ev[i];
            } else {
                proj[i] = 0.0;
                diag.rank_warning = true;
            }
        }
        const Eigen::VectorXd vec_c = es.eigenvectors() * proj;
        result.C = Eigen::Map<const Eigen::MatrixXd>(vec_c.data(), ky, kx);
    } else {
        Eigen::MatrixXd& c = result.C;
        Eigen::MatrixXd r = normal.rhs();
        Eigen::MatrixXd p = r;
        double rr = r.squaredNorm();
        const double stop = cfg.cg_tolerance * rhs_norm;
        Index it = 0;
        while (std::sqrt(rr) > stop) {
            if (it >= cfg.cg_max_iterations) {
                throw ConvergenceError("CG did not reach relative residual " + std::to_string(cfg.cg_tolerance) +
                                       " within " + std::to_string(cfg.cg_max_iterations) + " iterations");
            }
            const Eigen::MatrixXd np = normal.apply(p);
            const double curvature = (p.array() * np.array()).sum();
            if (!(curvature > std::numeric_limits<double>::epsilon() * p.squaredNorm() * 1e-6)) {
                // Search direction in the null space of the normal operator.
                diag.rank_warning = true;
                break;
            }
            const double step = rr / curvature;
            c.noalias() += step * p;
            r.noalias() -= step * np;
            const double rr_next = r.squaredNorm();
            p = r + (rr_next / rr) * p;
            rr = rr_next;
            ++it;
        }
        diag.iterations = it;
    }

    const auto& C = result.C;
    for (std::size_t i = 0; i < fx.size(); ++i) {
        const double res = (C * fx[i].coefficients - fy[i].coefficients).squaredNorm();
        diag.descriptor_residuals.push_back(res);
        diag.objective += normal.descriptor_weights()[i] * res;
    }
    for (std::size_t j = 0; j < ops_x.size(); ++j) {
        const double res = commutator_residual(C, ops_x[j], ops_y[j]);
        diag.commutator_residuals.push_back(res);
        diag.objective += cfg.alpha * normal.operator_weights()[j] * res;
    }
    return result;
}

/// Weighted objective of an arbitrary C under the same normalisation solve_fmap uses.
inline double fmap_objective(const Eigen::MatrixXd& C, const std::vector<SpectralFunction>& fx,
                             const std::vector<SpectralFunction>& fy, const std::vector<SpectralOperator>& ops_x,
                             const std::vector<SpectralOperator>& ops_y, double alpha)
{
    double total = 0.0;
    for (std::size_t i = 0; i < fx.size(); ++i) {
        const double nb = fy[i].coefficients.squaredNorm();
        total += (C * fx[i].coefficients - fy[i].coefficients).squaredNorm() / (nb > 0.0 ? nb : 1.0);
    }
    for (std::size_t j = 0; j < ops_x.size(); ++j) {
        const double nx = ops_x[j].matrix.squaredNorm();
        total += alpha * commutator_residual(C, ops_x[j], ops_y[j]) / (nx > 0.0 ? nx : 1.0);
    }
    return total;
}

///
/// Nearest-neighbour recovery in the spectral embedding: x is matched to the y minimising
/// ||C Phi^T e_x - Psi^T e_y||, ties going to the lowest index of y.
///
inline CorrespondenceMap p2p_from_fmap(const Eigen::MatrixXd& C, const SpectralBasis& basis_x,
                                       const SpectralBasis& basis_y)
{
    detail::require_dims(C.cols() <= basis_x.k() && C.rows() <= basis_y.k(), "C is larger than the bases");
    const Eigen::MatrixXd source = C * basis_x.eigenfunctions.leftCols(C.cols()).transpose(); // k_Y x n_X
    const Eigen::MatrixXd target = basis_y.eigenfunctions.leftCols(C.rows()).transpose();     // k_Y x n_Y
    CorrespondenceMap out;
    out.target.resize(static_cast<std::size_t>(basis_x.n()));
    Eigen::VectorXd dist(target.cols());
    for (Index x = 0; x < source.cols(); ++x) {
        dist = (target.colwise() - source.col(x)).colwise().squaredNorm().transpose();
        Index best = 0;
        dist.minCoeff(&best); // first minimiser
        out.target[static_cast<std::size_t>(x)] = static_cast<int>(best);
    }
    return out;
}

inline CorrespondenceMap p2p_from_fmap(const FunctionalMap& map, const SpectralBasis& basis_x,
                                       const SpectralBasis& basis_y)
{
    return p2p_from_fmap(map.C, basis_x, basis_y);
}

/// C = Psi^T A_Y Pi Phi, where Pi sends vertex x of X to map.target[x] on Y.
inline FunctionalMap fmap_from_p2p(const CorrespondenceMap& map, const SpectralBasis& basis_x,
                                   const SpectralBasis& basis_y)
{
    detail::require_dims(static_cast<Index>(map.size()) == basis_x.n(), "map length does not match source basis");
    Eigen::MatrixXd pushed = Eigen::MatrixXd::Zero(basis_y.n(), basis_x.k());
    for (std::size_t x = 0; x < map.size(); ++x) {
        const int y = map.target[x];
        detail::require_dims(y >= 0 && y < basis_y.n(), "map target out of range");
        pushed.row(y) += basis_x.eigenfunctions.row(static_cast<Index>(x));
    }
    FunctionalMap out;
    out.C = basis_y.eigenfunctions.transpose() * (basis_y.mass.diagonal.asDiagonal() * pushed);
    return out;
}

namespace detail {

/// sum_x a_x ||C Phi^T e_x - Psi^T e_map(x)||^2 and the Procrustes cross-covariance.
inline double alignment_residual(const Eigen::MatrixXd& C, const SpectralBasis& bx, const SpectralBasis& by,
                                 const std::vector<int>& target)
{
    const Eigen::MatrixXd emb = bx.eigenfunctions.leftCols(C.cols()) * C.transpose(); // n_X x k_Y
    double total = 0.0;
    for (Index x = 0; x < bx.n(); ++x) {
        total += bx.mass.diagonal[x] *
                 (emb.row(x) - by.eigenfunctions.row(target[static_cast<std::size_t>(x)]).head(C.rows())).squaredNorm();
    }
    return total;
}

} // namespace detail

///
/// ICP refinement: alternately match vertices in the spectral embedding and refit C as the
/// closest orthogonal matrix to the matched cross-covariance Psi[match]^T A_X Phi.
/// Stops early when an iteration fails to lower the alignment residual; that iteration is
/// discarded.
///
inline FunctionalMap icp_refine(const FunctionalMap& initial, const SpectralBasis& basis_x,
                                const SpectralBasis& basis_y, Index iterations)
{
    if (iterations < 0) throw ValidationError("icp iterations must be non-negative");
    FunctionalMap current = initial;
    const Index kx = initial.C.cols();
    const Index ky = initial.C.rows();
    double previous = std::numeric_limits<double>::infinity();
    for (Index it = 0; it < iterations; ++it) {
        const CorrespondenceMap match = p2p_from_fmap(current.C, basis_x, basis_y);
        Eigen::MatrixXd matched(basis_x.n(), ky);
        for (Index x = 0; x < basis_x.n(); ++x) {
            matched.row(x) = basis_y.eigenfunctions.row(match.target[static_cast<std::size_t>(x)]).head(ky);
        }
        const Eigen::MatrixXd cross =
            matched.transpose() * (basis_x.mass.diagonal.asDiagonal() * basis_x.eigenfunctions.leftCols(kx));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::MatrixXd refit = svd.matrixU() * svd.matrixV().transpose();
        const double residual = detail::alignment_residual(refit, basis_x, basis_y, match.target);
        if (!(residual < previous)) {
            current.diagnostics.icp_stopped_early = true;
            break;
        }
        previous = residual;
        current.C = refit;
        current.diagnostics.icp_residuals.push_back(residual);
    }
    return current;
}

} // namespace bifmap
