#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace bifmap;

namespace {

struct Problem {
    std::vector<SpectralFunction> fx, fy;
    std::vector<SpectralOperator> ox, oy;
};

Problem random_problem(Index k, std::size_t descriptors, std::size_t operators, unsigned seed, bool symmetric)
{
    std::mt19937 rng(seed);
    Problem p;
    for (std::size_t i = 0; i < descriptors; ++i) {
        p.fx.push_back(oracle::random_function(k, rng));
        p.fy.push_back(oracle::random_function(k, rng));
    }
    for (std::size_t j = 0; j < operators; ++j) {
        p.ox.push_back(oracle::random_operator(k, rng, symmetric));
        p.oy.push_back(oracle::random_operator(k, rng, symmetric));
    }
    return p;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).cwiseAbs().maxCoeff();
}

double accuracy(const CorrespondenceMap& map, const std::vector<int>& truth)
{
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += map.target[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct PermutedPair {
    TriangleMesh x = primitives::radial_jitter(primitives::bumpy_body(10, 12), 0.02, 9);
    std::vector<int> perm = primitives::random_permutation(x.n_vertices(), 5);
    TriangleMesh y = permuted(x, perm);
    SpectralBasis bx = eigendecompose(x, 20);
    SpectralBasis by = eigendecompose(y, 20);
};

const PermutedPair& pair()
{
    static const PermutedPair p;
    return p;
}

} // namespace

TEST(Commutator, HandComputedExamples)
{
    const SpectralOperator a{Eigen::Vector2d(1.0, 2.0).asDiagonal().toDenseMatrix()};
    const SpectralOperator b{Eigen::Vector2d(2.0, 1.0).asDiagonal().toDenseMatrix()};
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_EQ(commutator_residual(id, a, a), 0.0);
    EXPECT_EQ(commutator_residual(id, a, b), 2.0); // ||diag(-1, 1)||^2
    Eigen::MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    EXPECT_EQ(commutator_residual(swap, a, b), 0.0);
    EXPECT_THROW(commutator_residual(Eigen::MatrixXd::Identity(3, 2), a, b), DimensionError);
}

TEST(SolveFmap, IdenticalProblemGivesIdentity)
{
    const Problem p = random_problem(6, 6, 2, 1, true);
    SolverConfig cfg;
    const FunctionalMap m = solve_fmap(p.fx, p.fx, p.ox, p.ox, cfg);
    EXPECT_TRUE(m.diagnostics.dense);
    EXPECT_FALSE(m.diagnostics.rank_warning);
    EXPECT_LT(max_abs_diff(m.C, Eigen::MatrixXd::Identity(6, 6)), 1e-10);
    EXPECT_LT(m.diagnostics.objective, 1e-18);
}

TEST(SolveFmap, IdentityOperatorsLeaveDescriptorSolution)
{
    // Identity operators commute with every C, so the commutator term is inert.
    const Problem p = random_problem(5, 5, 0, 2, true);
    const std::vector<SpectralOperator> id{{Eigen::MatrixXd::Identity(5, 5)}};
    SolverConfig cfg;
    const FunctionalMap m = solve_fmap(p.fx, p.fy, id, id, cfg);
    Eigen::MatrixXd a(5, 5), b(5, 5);
    for (Index i = 0; i < 5; ++i) {
        a.col(i) = p.fx[static_cast<std::size_t>(i)].coefficients;
        b.col(i) = p.fy[static_cast<std::size_t>(i)].coefficients;
    }
    EXPECT_LT(max_abs_diff(m.C, b * a.inverse()), 1e-9);
}

TEST(SolveFmap, DensePathMatchesKroneckerOracle)
{
    for (unsigned seed : {3u, 4u}) {
        const Problem p = random_problem(12, 4, 3, seed, seed == 3u);
        SolverConfig cfg;
        cfg.alpha = 0.7;
        const FunctionalMap m = solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg);
        ASSERT_TRUE(m.diagnostics.dense);
        const Eigen::MatrixXd ref = oracle::kronecker_lstsq(p.fx, p.fy, p.ox, p.oy, 0.7);
        EXPECT_LT(max_abs_diff(m.C, ref), 1e-6) << "seed " << seed;
    }
}

TEST(SolveFmap, MatrixFreePathMatchesKroneckerOracle)
{
    const Problem p = random_problem(20, 3, 2, 5, true);
    SolverConfig cfg;
    cfg.path = SolverPath::MatrixFree;
    cfg.cg_tolerance = 1e-13;
    const FunctionalMap m = solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg);
    EXPECT_FALSE(m.diagnostics.dense);
    EXPECT_GT(m.diagnostics.iterations, 0);
    EXPECT_LT(max_abs_diff(m.C, oracle::kronecker_lstsq(p.fx, p.fy, p.ox, p.oy, 1.0)), 1e-6);
}

TEST(SolveFmap, RectangularMapMatchesOracle)
{
    std::mt19937 rng(6);
    std::vector<SpectralFunction> fx, fy;
    std::vector<SpectralOperator> ox, oy;
    for (int i = 0; i < 3; ++i) {
        fx.push_back(oracle::random_function(7, rng));
        fy.push_back(oracle::random_function(9, rng));
    }
    ox.push_back(oracle::random_operator(7, rng, true));
    oy.push_back(oracle::random_operator(9, rng, true));
    for (SolverPath path : {SolverPath::Dense, SolverPath::MatrixFree}) {
        SolverConfig cfg;
        cfg.path = path;
        cfg.cg_tolerance = 1e-13;
        const FunctionalMap m = solve_fmap(fx, fy, ox, oy, cfg);
        ASSERT_EQ(m.C.rows(), 9);
        ASSERT_EQ(m.C.cols(), 7);
        EXPECT_LT(max_abs_diff(m.C, oracle::kronecker_lstsq(fx, fy, ox, oy, 1.0)), 1e-6);
    }
}

TEST(SolveFmap, AutoPathSwitchesOnProblemSize)
{
    SolverConfig cfg;
    EXPECT_TRUE(solve_fmap(random_problem(30, 2, 1, 7, true).fx, random_problem(30, 2, 1, 8, true).fy, {}, {}, cfg)
                    .diagnostics.dense);
    const Problem p = random_problem(31, 2, 1, 7, true);
    EXPECT_FALSE(solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg).diagnostics.dense);
}

TEST(SolveFmap, NoDescriptorsGivesZeroMapWithWarning)
{
    const Problem p = random_problem(6, 0, 2, 9, true);
    for (SolverPath path : {SolverPath::Dense, SolverPath::MatrixFree}) {
        SolverConfig cfg;
        cfg.path = path;
        const FunctionalMap m = solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg);
        EXPECT_EQ(m.C, Eigen::MatrixXd::Zero(6, 6));
        EXPECT_TRUE(m.diagnostics.rank_warning);
    }
}

TEST(SolveFmap, UnderdeterminedProblemWarnsAndReturnsMinimumNorm)
{
    const Problem p = random_problem(6, 2, 0, 10, true);
    SolverConfig cfg;
    const FunctionalMap m = solve_fmap(p.fx, p.fy, {}, {}, cfg);
    EXPECT_TRUE(m.diagnostics.rank_warning);
    EXPECT_LT(max_abs_diff(m.C, oracle::kronecker_lstsq(p.fx, p.fy, {}, {}, 1.0)), 1e-9);
    // Rows of C lie in span of the source descriptors.
    Eigen::MatrixXd a(6, 2);
    a << p.fx[0].coefficients, p.fx[1].coefficients;
    const Eigen::MatrixXd proj = a * a.completeOrthogonalDecomposition().pseudoInverse();
    EXPECT_LT(max_abs_diff(m.C * proj, m.C), 1e-10);
}

TEST(SolveFmap, SolutionMinimisesObjective)
{
    const Problem p = random_problem(15, 5, 3, 11, true);
    SolverConfig cfg;
    cfg.alpha = 2.0;
    const FunctionalMap m = solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg);
    const double best = fmap_objective(m.C, p.fx, p.fy, p.ox, p.oy, 2.0);
    EXPECT_NEAR(best, m.diagnostics.objective, 1e-10 * std::max(1.0, best));
    EXPECT_LE(best, fmap_objective(Eigen::MatrixXd::Zero(15, 15), p.fx, p.fy, p.ox, p.oy, 2.0));
    std::mt19937 rng(12);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd d(15, 15);
        for (Index i = 0; i < d.size(); ++i) d.data()[i] = 1e-3 * g(rng);
        EXPECT_LE(best, fmap_objective(m.C + d, p.fx, p.fy, p.ox, p.oy, 2.0));
    }
}

TEST(SolveFmap, BudgetExhaustionRaises)
{
    const Problem p = random_problem(31, 3, 2, 13, true);
    SolverConfig cfg;
    cfg.cg_max_iterations = 1;
    EXPECT_THROW(solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg), ConvergenceError);
}

TEST(SolveFmap, MismatchedInputsAreRejected)
{
    const Problem p = random_problem(6, 2, 1, 14, true);
    SolverConfig cfg;
    EXPECT_THROW(solve_fmap(p.fx, {p.fy[0]}, p.ox, p.oy, cfg), DimensionError);
    const Problem q = random_problem(5, 2, 1, 15, true);
    EXPECT_THROW(solve_fmap(p.fx, p.fy, q.ox, q.oy, cfg), DimensionError);
    cfg.alpha = -1.0;
    EXPECT_THROW(solve_fmap(p.fx, p.fy, p.ox, p.oy, cfg), ValidationError);
}

TEST(PointToPoint, IdentityMapOnSameBasis)
{
    const auto& pp = pair();
    std::vector<int> id(static_cast<std::size_t>(pp.x.n_vertices()));
    std::iota(id.begin(), id.end(), 0);
    EXPECT_EQ(p2p_from_fmap(Eigen::MatrixXd::Identity(20, 20), pp.bx, pp.bx).target, id);
}

TEST(PointToPoint, FullBasisRecoversPermutation)
{
    const TriangleMesh x = primitives::radial_jitter(primitives::icosphere(1), 0.1, 3);
    const auto perm = primitives::random_permutation(x.n_vertices(), 4);
    const TriangleMesh y = permuted(x, perm);
    const SpectralBasis bx = eigendecompose(x, x.n_vertices());
    const SpectralBasis by = eigendecompose(y, y.n_vertices());
    const FunctionalMap c = fmap_from_p2p({perm, MapMethod::GroundTruth}, bx, by);
    EXPECT_EQ(p2p_from_fmap(c, bx, by).target, perm);
}

TEST(PointToPoint, MatchesBruteForceNearestNeighbour)
{
    const auto& pp = pair();
    std::mt19937 rng(16);
    const Eigen::MatrixXd c = oracle::random_operator(20, rng, false).matrix;
    const Eigen::MatrixXd src = pp.bx.eigenfunctions * c.transpose();
    EXPECT_EQ(p2p_from_fmap(c, pp.bx, pp.by).target, oracle::brute_force_nearest(src, pp.by.eigenfunctions));
}

TEST(PointToPoint, TiesGoToLowestIndex)
{
    const Index n = 5;
    const SpectralBasis constant{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(n, 1, 1.0 / std::sqrt(5.0)),
                                 MassMatrix{Eigen::VectorXd::Ones(n)}};
    EXPECT_EQ(p2p_from_fmap(Eigen::MatrixXd::Identity(1, 1), constant, constant).target, std::vector<int>(5, 0));
}

TEST(PointToPoint, EquivariantUnderTargetRelabelling)
{
    const auto& pp = pair();
    std::mt19937 rng(17);
    const Eigen::MatrixXd c = oracle::random_operator(10, rng, false).matrix;
    // Relabelling Y relabels each match; the spectral embedding of Y is unchanged.
    const auto base = p2p_from_fmap(c, pp.bx, pp.bx.truncated(10)).target;
    const auto perm = primitives::random_permutation(pp.x.n_vertices(), 18);
    SpectralBasis relabelled = pp.bx.truncated(10);
    for (Index v = 0; v < pp.x.n_vertices(); ++v) {
        relabelled.eigenfunctions.row(perm[static_cast<std::size_t>(v)]) = pp.bx.eigenfunctions.row(v).head(10);
        relabelled.mass.diagonal[perm[static_cast<std::size_t>(v)]] = pp.bx.mass.diagonal[v];
    }
    const auto moved = p2p_from_fmap(c, pp.bx, relabelled).target;
    for (std::size_t x = 0; x < base.size(); ++x) EXPECT_EQ(moved[x], perm[static_cast<std::size_t>(base[x])]);
}

TEST(PointToPoint, FmapFromIdentityMapIsIdentity)
{
    const auto& pp = pair();
    std::vector<int> id(static_cast<std::size_t>(pp.x.n_vertices()));
    std::iota(id.begin(), id.end(), 0);
    const FunctionalMap c = fmap_from_p2p({id}, pp.bx, pp.bx);
    EXPECT_LT(max_abs_diff(c.C, Eigen::MatrixXd::Identity(20, 20)), 1e-10);
    EXPECT_THROW(fmap_from_p2p({std::vector<int>(3, 0)}, pp.bx, pp.bx), DimensionError);
}

TEST(PointToPoint, GroundTruthFmapRoundTrips)
{
    const auto& pp = pair();
    const FunctionalMap c = fmap_from_p2p({pp.perm, MapMethod::GroundTruth}, pp.bx, pp.by);
    // The permuted copy has the same spectrum, so C_gt is orthogonal up to eigenspace rotations.
    EXPECT_LT(max_abs_diff(c.C.transpose() * c.C, Eigen::MatrixXd::Identity(20, 20)), 1e-8);
    EXPECT_EQ(p2p_from_fmap(c, pp.bx, pp.by).target, pp.perm);
}

TEST(Icp, ZeroIterationsReturnInput)
{
    const auto& pp = pair();
    FunctionalMap init;
    init.C = Eigen::MatrixXd::Identity(20, 20) * 0.5;
    const FunctionalMap r = icp_refine(init, pp.bx, pp.by, 0);
    EXPECT_EQ(r.C, init.C);
    EXPECT_TRUE(r.diagnostics.icp_residuals.empty());
    EXPECT_THROW(icp_refine(init, pp.bx, pp.by, -1), ValidationError);
}

TEST(Icp, ExactMapIsFixedPoint)
{
    const auto& pp = pair();
    FunctionalMap init;
    init.C = Eigen::MatrixXd::Identity(20, 20);
    const FunctionalMap r = icp_refine(init, pp.bx, pp.bx, 5);
    EXPECT_LT(max_abs_diff(r.C, init.C), 1e-10);
    ASSERT_EQ(r.diagnostics.icp_residuals.size(), 1u);
    EXPECT_LT(r.diagnostics.icp_residuals[0], 1e-18);
    EXPECT_TRUE(r.diagnostics.icp_stopped_early);
}

TEST(Icp, RefinedMapIsOrthogonalAndImprovesNoisyMap)
{
    const auto& pp = pair();
    FunctionalMap gt = fmap_from_p2p({pp.perm}, pp.bx, pp.by);
    std::mt19937 rng(19);
    std::normal_distribution<double> g;
    Eigen::MatrixXd noise(20, 20);
    for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = g(rng);
    FunctionalMap noisy;
    noisy.C = gt.C + 0.05 * gt.C.norm() / noise.norm() * noise;

    const double before = accuracy(p2p_from_fmap(noisy, pp.bx, pp.by), pp.perm);
    const FunctionalMap r = icp_refine(noisy, pp.bx, pp.by, 10);
    EXPECT_LT(max_abs_diff(r.C.transpose() * r.C, Eigen::MatrixXd::Identity(20, 20)), 1e-8);
    EXPECT_GE(accuracy(p2p_from_fmap(r, pp.bx, pp.by), pp.perm), before);
    const auto& res = r.diagnostics.icp_residuals;
    for (std::size_t i = 1; i < res.size(); ++i) EXPECT_LT(res[i], res[i - 1]);
}

TEST(FmapCsv, RoundTripIsExact)
{
    oracle::TempDir dir("csv");
    std::mt19937 rng(20);
    const Eigen::MatrixXd c = oracle::random_operator(7, rng, false).matrix.leftCols(5);
    save_fmap_csv(c, dir / "c.csv");
    EXPECT_EQ(load_fmap_csv(dir / "c.csv"), c);
    std::ofstream(dir / "bad.csv") << "1,2\n3\n";
    EXPECT_THROW(load_fmap_csv(dir / "bad.csv"), ParseError);
    std::ofstream(dir / "nan.csv") << "1,x\n";
    EXPECT_THROW(load_fmap_csv(dir / "nan.csv"), ParseError);
    EXPECT_THROW(load_fmap_csv(dir / "missing.csv"), IOError);
}
