// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef BIFMAP_CLI_PATH
#error "BIFMAP_CLI_PATH must point at the bifmap executable"
#endif

using namespace bifmap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << "[fail] ";
        }
        detail << what << "; ";
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

CorrespondenceMap identity_map(Index n)
{
    CorrespondenceMap m;
    m.target.resize(static_cast<std::size_t>(n));
    std::iota(m.target.begin(), m.target.end(), 0);
    return m;
}

// ---- 1 -------------------------------------------------------------------------------

void discretization(Outcome& o)
{
    struct Case {
        const char* name;
        TriangleMesh mesh;
    };
    const std::vector<Case> cases{
        {"icosphere3", primitives::icosphere(3)},
        {"bumpy40x36", primitives::bumpy_body(40, 36)},
        {"jittered-icosphere4", primitives::radial_jitter(primitives::icosphere(4), 0.05, 1)},
        {"bumpy70x70", primitives::bumpy_body(70, 70)},
    };
    for (const auto& c : cases) {
        const auto t0 = Clock::now();
        const StiffnessMatrix l = cotangent_stiffness(c.mesh);
        const MassMatrix a = barycentric_mass(c.mesh);
        const SpectralBasis b = eigendecompose(l, a, 100);
        const double elapsed = seconds_since(t0);

        const double l1 = (l.matrix * Eigen::VectorXd::Ones(c.mesh.n_vertices())).cwiseAbs().maxCoeff();
        const Eigen::SparseMatrix<double> lt = l.matrix.transpose();
        const double asym = Eigen::MatrixXd(l.matrix - lt).cwiseAbs().maxCoeff();
        const Eigen::MatrixXd gram = b.eigenfunctions.transpose() * a.diagonal.asDiagonal() * b.eigenfunctions;
        const double ortho = (gram - Eigen::MatrixXd::Identity(100, 100)).cwiseAbs().maxCoeff();
        Eigen::VectorXd res = detail::generalized_residuals(l, a, b.eigenvalues, b.eigenfunctions);
        for (Index i = 0; i < res.size(); ++i) res[i] /= std::max(1.0, b.eigenvalues[i]);
        const std::string tag = std::string(c.name) + " n=" + std::to_string(c.mesh.n_vertices());
        o.check(l1 <= 1e-9, tag + " |L1|=" + fmt(l1));
        o.check(asym == 0.0, tag + " asym=" + fmt(asym));
        o.check(ortho <= 1e-8, tag + " ortho=" + fmt(ortho));
        o.check(res.maxCoeff() <= 1e-6, tag + " resid=" + fmt(res.maxCoeff()));
        o.check(elapsed < 10.0, tag + " " + fmt(elapsed) + "s");
    }
}

// ---- 2 -------------------------------------------------------------------------------

void dense_oracles(Outcome& o)
{
    // (a) shift-invert Lanczos against Eigen's dense generalized solver.
    for (const TriangleMesh& m : {primitives::radial_jitter(primitives::icosphere(2), 0.1, 2), primitives::bumpy_body(20, 20)}) {
        EigenOptions lanczos;
        lanczos.dense_threshold = 0;
        const SpectralBasis b = eigendecompose(m, 60, lanczos);
        const Eigen::VectorXd ref = oracle::dense_generalized_eigenvalues(m).head(60);
        double worst = std::abs(b.eigenvalues[0] - ref[0]) / ref[59];
        for (Index i = 1; i < 60; ++i) worst = std::max(worst, std::abs(b.eigenvalues[i] - ref[i]) / ref[i]);
        o.check(worst <= 1e-8, "(a) n=" + std::to_string(m.n_vertices()) + " eig rel=" + fmt(worst));
    }

    // (b) Nystrom spectral kernel against the dense projection.
    const TriangleMesh m = primitives::bumpy_body(20, 24);
    const SpectralBasis b = eigendecompose(m, 60);
    Eigen::VectorXd stepped(m.n_vertices());
    for (Index v = 0; v < stepped.size(); ++v) stepped[v] = static_cast<double>(v % 5) / 4.0;
    {
        const auto ref = oracle::dense_spectral_kernel(b, oracle::dense_kernel(stepped, 3.0));
        const auto got = spectral_kernel(nystrom_factors(DescriptorKernel(stepped, 3.0), b, {0, 1, 2, 3, 4})).matrix;
        const double rel = (got - ref).norm() / ref.norm();
        o.check(rel <= 1e-8, "(b) rank-5 kernel rel=" + fmt(rel));
    }
    const auto samples = farthest_point_sampling(m, 100, 0);
    const double sigma_d = 0.05 * mesh_diameter(m);
    double worst = 0.0;
    for (int landmark : farthest_point_sampling(m, 5, 0)) {
        const Eigen::VectorXd f = normalize_descriptor(gaussian_landmark(m, landmark, sigma_d)).values;
        const auto ref = oracle::dense_spectral_kernel(b, oracle::dense_kernel(f, 3.0));
        const auto got = spectral_kernel(nystrom_factors(DescriptorKernel(f, 3.0), b, samples)).matrix;
        worst = std::max(worst, (got - ref).norm() / ref.norm());
    }
    o.check(worst <= 0.05, "(b) gaussian-landmark n0=100 rel=" + fmt(worst));

    // (c) matrix-free least squares against the Kronecker system, on real bilateral operators.
    for (Index k : {12, 20}) {
        const SpectralBasis bk = b.truncated(k);
        const auto perm = primitives::random_permutation(m.n_vertices(), 3);
        const TriangleMesh y = permuted(m, perm);
        const SpectralBasis by = eigendecompose(y, k);
        std::vector<SpectralFunction> fx, fy;
        std::vector<SpectralOperator> ox, oy;
        const auto samples_y = farthest_point_sampling(y, 100, 0);
        for (int landmark : farthest_point_sampling(m, 3, 0)) {
            auto [dx, dy] = normalize_pair(gaussian_landmark(m, landmark, sigma_d),
                                           gaussian_landmark(y, perm[static_cast<std::size_t>(landmark)], sigma_d));
            fx.push_back(project_function(bk, dx.values));
            fy.push_back(project_function(by, dy.values));
            ox.push_back(bilateral_operator(bk, DescriptorKernel(dx, 3.0), 1e-3, 1.0, samples));
            oy.push_back(bilateral_operator(by, DescriptorKernel(dy, 3.0), 1e-3, 1.0, samples_y, ShapeTag::Y));
        }
        SolverConfig cfg;
        cfg.path = SolverPath::MatrixFree;
        const FunctionalMap got = solve_fmap(fx, fy, ox, oy, cfg);
        const Eigen::MatrixXd ref = oracle::kronecker_lstsq(fx, fy, ox, oy, 1.0);
        const double rel = (got.C - ref).norm() / ref.norm();
        o.check(rel <= 1e-6, "(c) k=" + std::to_string(k) + " rel=" + fmt(rel) + " cg=" +
                                 std::to_string(got.diagnostics.iterations));
    }
}

// ---- 3 -------------------------------------------------------------------------------

double worst_commutativity(const TriangleMesh& x, const std::vector<int>& perm)
{
    const TriangleMesh y = permuted(x, perm);
    ExperimentConfig cfg;
    cfg.solver.k = 60;
    CorrespondenceMap gt;
    gt.target = perm;
    const PreparedPair p = prepare_pair(x, y, gt, cfg, 5);
    const DescriptorSet d = build_descriptors(p, cfg, 5);
    const OperatorSet ops = build_operators(p, d, Method::Bilateral, cfg.solver);
    const Eigen::MatrixXd c = fmap_from_p2p(gt, p.basis_x, p.basis_y).C;
    double worst = 0.0;
    for (std::size_t j = 0; j < ops.x.size(); ++j) {
        worst = std::max(worst, std::sqrt(commutator_residual(c, ops.x[j], ops.y[j])) / ops.x[j].matrix.norm());
    }
    return worst;
}

void ground_truth_commutativity(Outcome& o)
{
    const TriangleMesh x = primitives::bumpy_body(40, 36);
    const double permuted_ratio = worst_commutativity(x, primitives::random_permutation(x.n_vertices(), 5));
    const double identity_ratio = worst_commutativity(x, identity_map(x.n_vertices()).target);
    o.check(permuted_ratio < 0.1, "permuted ratio=" + fmt(permuted_ratio));
    o.check(identity_ratio < 1e-6, "identity ratio=" + fmt(identity_ratio));
}

// ---- 4 -------------------------------------------------------------------------------

void self_correspondence(Outcome& o)
{
    const auto t0 = Clock::now();
    const TriangleMesh x = primitives::bumpy_body(40, 36);
    const auto perm = primitives::random_permutation(x.n_vertices(), 13);
    const TriangleMesh y = permuted(x, perm);
    ExperimentConfig cfg;
    cfg.solver.k = 60;
    cfg.solver.icp_iterations = 10;
    CorrespondenceMap gt;
    gt.target = perm;
    const PreparedPair p = prepare_pair(x, y, gt, cfg, 5);
    const PipelineResult r = run_prepared(p, cfg, Method::Bilateral, 5);
    std::size_t within = 0;
    for (std::size_t v = 0; v < perm.size(); ++v) {
        const int pred = r.map.target[v], truth = perm[v];
        bool ok = pred == truth;
        for (const auto& nb : y.adjacency()[static_cast<std::size_t>(truth)]) ok = ok || nb.vertex == pred;
        within += ok ? 1 : 0;
    }
    const double frac = static_cast<double>(within) / static_cast<double>(perm.size());
    const double elapsed = seconds_since(t0);
    o.check(r.curve->mean < 0.01, "mean=" + fmt(r.curve->mean));
    o.check(frac >= 0.95, "one-ring=" + fmt(frac));
    o.check(elapsed < 120.0, fmt(elapsed) + "s");
}

// ---- 5 -------------------------------------------------------------------------------

void bent_sweep(Outcome& o)
{
    const auto t0 = Clock::now();
    const TriangleMesh x = primitives::bumpy_body(40, 36);
    const auto perm = primitives::random_permutation(x.n_vertices(), 7);
    const TriangleMesh y = permuted(primitives::bent(x, 2.5), perm);
    ExperimentConfig cfg;
    cfg.solver.k = 60;
    cfg.counts = {2, 4, 6, 10};
    CorrespondenceMap gt;
    gt.target = perm;
    const PreparedPair p = prepare_pair(x, y, gt, cfg, 10);
    const auto cells = sweep_prepared(p, cfg);

    auto mean_of = [&](Method m, Index c) {
        for (const auto& cell : cells) {
            if (cell.method == m && cell.count == c) return cell.mean_error;
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    for (const auto& cell : cells) {
        o.detail << to_string(cell.method) << "@" << cell.count << "=" << fmt(cell.mean_error)
                 << (cell.message.empty() ? "" : " (" + cell.message + ")") << " ";
    }
    o.detail << "; ";
    for (Index c : cfg.counts) {
        const double b = mean_of(Method::Bilateral, c), f = mean_of(Method::PlainFmap, c);
        o.check(b <= f, "bilateral<=plain @" + std::to_string(c));
    }
    const double adv2 = mean_of(Method::PlainFmap, 2) - mean_of(Method::Bilateral, 2);
    const double adv10 = mean_of(Method::PlainFmap, 10) - mean_of(Method::Bilateral, 10);
    o.check(adv2 > adv10, "advantage 2=" + fmt(adv2) + " vs 10=" + fmt(adv10));
    const double elapsed = seconds_since(t0);
    o.check(elapsed < 600.0, fmt(elapsed) + "s");
}

// ---- 6 -------------------------------------------------------------------------------

void permutation_oracle(Outcome& o)
{
    const auto t0 = Clock::now();
    const TriangleMesh x = primitives::radial_jitter(primitives::octahedron(), 0.15, 4);
    const auto perm = primitives::random_permutation(6, 9);
    const TriangleMesh y = permuted(x, perm);
    ExperimentConfig cfg;
    cfg.solver.k = 6;
    cfg.solver.n0 = 6;
    cfg.solver.sigma_d = 1.0;
    CorrespondenceMap gt;
    gt.target = perm;
    const Index count = 3;
    const PreparedPair p = prepare_pair(x, y, gt, cfg, count);
    const DescriptorSet d = build_descriptors(p, cfg, count);

    // Spatial bilateral operators: heat semigroup plus gamma * K A, assembled densely.
    auto spatial = [&](const SpectralBasis& b, const PointwiseDescriptor& f) {
        const Eigen::VectorXd decay = (-cfg.solver.t * b.eigenvalues.array()).exp().matrix();
        const Eigen::MatrixXd heat = b.eigenfunctions * decay.asDiagonal() * b.eigenfunctions.transpose() *
                                     b.mass.diagonal.asDiagonal();
        return Eigen::MatrixXd(heat + cfg.solver.gamma * oracle::dense_kernel(f.values, cfg.solver.sigma) *
                                          b.mass.diagonal.asDiagonal());
    };
    std::vector<Eigen::VectorXd> fx, fy;
    std::vector<Eigen::MatrixXd> ox, oy;
    for (std::size_t i = 0; i < d.size(); ++i) {
        fx.push_back(d.x[i].values);
        fy.push_back(d.y[i].values);
        ox.push_back(spatial(p.basis_x, d.x[i]));
        oy.push_back(spatial(p.basis_y, d.y[i]));
    }

    std::vector<int> s(6);
    std::iota(s.begin(), s.end(), 0);
    std::vector<int> best;
    double best_e = std::numeric_limits<double>::infinity(), second = best_e;
    do {
        const double e = spatial_energy_oracle(s, fx, fy, ox, oy, cfg.solver.alpha);
        if (e < best_e) {
            second = best_e;
            best_e = e;
            best = s;
        } else if (e < second) {
            second = e;
        }
    } while (std::next_permutation(s.begin(), s.end()));
    o.check(best == perm, "brute-force argmin is ground truth (E=" + fmt(best_e) + ", next=" + fmt(second) + ")");

    const PipelineResult r = run_prepared(p, cfg, Method::Bilateral, count);
    o.check(r.map.target == best, "pipeline k=6 map equals argmin");
    const double elapsed = seconds_since(t0);
    o.check(elapsed < 5.0, fmt(elapsed) + "s");
}

// ---- 7 -------------------------------------------------------------------------------

int cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + BIFMAP_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string q(const fs::path& p)
{
    return "\"" + p.string() + "\"";
}

/// Relative path -> bytes for every regular file under `dir`.
std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = oracle::read_file(e.path());
    }
    return out;
}

void determinism(Outcome& o)
{
    oracle::TempDir dir("accept_det");
    const TriangleMesh x = primitives::bumpy_body(14, 16);
    const auto perm = primitives::random_permutation(x.n_vertices(), 2);
    save_off(x, dir / "x.off");
    save_off(permuted(primitives::bent(x, 2.5), perm), dir / "y.off");
    save_index_list(perm, dir / "gt.txt");
    std::ofstream(dir / "run.ini") << "[pair]\nsource = " << (dir / "x.off").string() << "\ntarget = "
                                   << (dir / "y.off").string() << "\nground_truth = " << (dir / "gt.txt").string()
                                   << "\n[solver]\nk = 30\nn0 = 50\nseed = 4\n";

    const std::vector<std::pair<std::string, std::string>> commands{
        {"correspond", "correspond --config " + q(dir / "run.ini") + " --count 4 --out "},
        {"sweep", "sweep --config " + q(dir / "run.ini") + " --counts 2,4 --out "},
        {"eval", "eval --map " + q(dir / "gt.txt") + " --ground-truth " + q(dir / "gt.txt") + " --target " +
                     q(dir / "y.off") + " --out "},
        {"export-eig", "export-eig --source " + q(dir / "x.off") + " --count 4 --out "},
    };
    for (const auto& [name, args] : commands) {
        const fs::path a = dir / (name + "_a"), b = dir / (name + "_b");
        const int ra = cli(args + q(a)), rb = cli(args + q(b));
        if (ra != 0 || rb != 0 || !fs::exists(a) || !fs::exists(b)) {
            o.check(false, name + " exit " + std::to_string(ra) + "/" + std::to_string(rb));
            continue;
        }
        const auto sa = snapshot(a), sb = snapshot(b);
        o.check(!sa.empty() && sa == sb, name + " " + std::to_string(sa.size()) + " files identical");
    }
}

// ---- 8 -------------------------------------------------------------------------------

double variance(const std::vector<double>& v)
{
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size());
}

void eigen_export(Outcome& o)
{
    oracle::TempDir dir("accept_eig");
    save_off(primitives::bumpy_body(40, 36), dir / "m.off");
    const int rc = cli("export-eig --source " + q(dir / "m.off") + " --count 4 --out " + q(dir / "out"));
    o.check(rc == 0, "export-eig exit " + std::to_string(rc));
    if (rc != 0) return;
    int fields = 0;
    for (int i = 2; fs::exists(dir / "out" / ("eig_" + std::to_string(i) + ".ply")); ++i) {
        fields += fs::exists(dir / "out" / ("eig_" + std::to_string(i) + ".csv")) ? 1 : 0;
    }
    o.check(fields >= 4, std::to_string(fields) + " eigenfunction fields");

    const Eigen::VectorXd desc = load_scalar_field(dir / "out" / "descriptor.csv");
    const Eigen::VectorXd eig2 = load_scalar_field(dir / "out" / "eig_2.csv");
    std::vector<double> all, pos, neg;
    for (Index v = 0; v < desc.size(); ++v) {
        all.push_back(desc[v]);
        (eig2[v] >= 0.0 ? pos : neg).push_back(desc[v]);
    }
    const double within = (static_cast<double>(pos.size()) * variance(pos) + static_cast<double>(neg.size()) * variance(neg)) /
                          static_cast<double>(all.size());
    const double global = variance(all);
    o.check(within < global, "within-cluster var=" + fmt(within) + " global=" + fmt(global) + " split " +
                                 std::to_string(pos.size()) + "/" + std::to_string(neg.size()));
}

} // namespace

int main()
{
    std::setvbuf(stdout, nullptr, _IONBF, 0);
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"1 discretization", discretization},
        {"2 dense-oracle equivalence", dense_oracles},
        {"3 ground-truth commutativity", ground_truth_commutativity},
        {"4 self-correspondence", self_correspondence},
        {"5 descriptor-count sweep on bent pair", bent_sweep},
        {"6 brute-force permutation oracle", permutation_oracle},
        {"7 CLI determinism", determinism},
        {"8 kernel eigenfunction export", eigen_export},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            run(o);
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        std::printf("%s criterion %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name, seconds_since(t0),
                    o.detail.str().c_str());
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
