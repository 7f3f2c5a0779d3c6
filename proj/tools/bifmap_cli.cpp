#include "bifmap/bifmap.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace bifmap;

namespace {

/// Flags shared by the subcommands that run the pipeline. Unset flags leave config values alone.
struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> source, target, ground_truth, landmarks, out, cache_dir;
    std::optional<std::string> method, descriptor;
    std::vector<std::string> descriptors_x, descriptors_y, methods;
    std::vector<long long> counts;
    std::optional<long long> count, k, n0, icp, cg_max_iterations;
    std::optional<double> alpha, t, sigma, gamma, sigma_d, cg_tolerance;
    std::optional<unsigned long long> seed;

    void add_to(CLI::App& app, bool sweep)
    {
        app.add_option("--config", config, "key = value config file; flags override its values");
        app.add_option("--source", source, "source mesh (OFF or PLY)");
        app.add_option("--target", target, "target mesh (OFF or PLY)");
        app.add_option("--ground-truth", ground_truth, "ground-truth map: one target index per source vertex");
        app.add_option("--landmarks", landmarks, "landmark pairs 'src tgt' per line");
        app.add_option("--descriptor", descriptor, "gaussian-landmark | wks | external");
        app.add_option("--descriptors-x", descriptors_x, "external descriptor files on the source");
        app.add_option("--descriptors-y", descriptors_y, "external descriptor files on the target");
        if (sweep) {
            app.add_option("--counts", counts, "descriptor counts, ascending")->delimiter(',');
            app.add_option("--methods", methods, "methods to compare")->delimiter(',');
        } else {
            app.add_option("--method", method, "plain-fmap | diagonal | bilateral");
            app.add_option("--count", count, "number of descriptors");
        }
        app.add_option("--k", k, "eigenfunctions per shape");
        app.add_option("--alpha", alpha, "commutator weight");
        app.add_option("--t", t, "heat diffusion time");
        app.add_option("--sigma", sigma, "descriptor kernel bandwidth");
        app.add_option("--gamma", gamma, "descriptor kernel weight");
        app.add_option("--sigma-d", sigma_d, "gaussian landmark width (default 0.05 x diameter)");
        app.add_option("--n0", n0, "Nystrom samples");
        app.add_option("--icp", icp, "ICP iterations");
        app.add_option("--cg-tolerance", cg_tolerance, "relative CG residual");
        app.add_option("--cg-max-iterations", cg_max_iterations, "CG iteration budget");
        app.add_option("--cache-dir", cache_dir, "directory for cached eigenbases");
        app.add_option("--out", out, "output directory");
        app.add_option("--seed", seed, "random seed");
    }

    ExperimentConfig resolve() const
    {
        ExperimentConfig cfg = config ? load_config(*config) : ExperimentConfig{};
        if (source) cfg.source = *source;
        if (target) cfg.target = *target;
        if (ground_truth) cfg.ground_truth = *ground_truth;
        if (landmarks) cfg.landmarks = *landmarks;
        if (out) cfg.out = *out;
        if (cache_dir) cfg.cache_dir = *cache_dir;
        if (method) cfg.method = parse_method(*method);
        if (descriptor) cfg.descriptor = parse_descriptor_source(*descriptor);
        if (!descriptors_x.empty()) cfg.descriptors_x.assign(descriptors_x.begin(), descriptors_x.end());
        if (!descriptors_y.empty()) cfg.descriptors_y.assign(descriptors_y.begin(), descriptors_y.end());
        if (!methods.empty()) {
            cfg.methods.clear();
            for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
        }
        if (!counts.empty()) cfg.counts.assign(counts.begin(), counts.end());
        if (count) cfg.count = static_cast<Index>(*count);
        if (k) cfg.solver.k = static_cast<Index>(*k);
        if (n0) cfg.solver.n0 = static_cast<Index>(*n0);
        if (icp) cfg.solver.icp_iterations = static_cast<Index>(*icp);
        if (cg_max_iterations) cfg.solver.cg_max_iterations = static_cast<Index>(*cg_max_iterations);
        if (alpha) cfg.solver.alpha = *alpha;
        if (t) cfg.solver.t = *t;
        if (sigma) cfg.solver.sigma = *sigma;
        if (gamma) cfg.solver.gamma = *gamma;
        if (sigma_d) cfg.solver.sigma_d = *sigma_d;
        if (cg_tolerance) cfg.solver.cg_tolerance = *cg_tolerance;
        if (seed) cfg.seed = *seed;
        cfg.validate();
        return cfg;
    }
};

int run_correspond(const Overrides& o)
{
    const ExperimentConfig cfg = o.resolve();
    const PipelineResult r = run_pipeline(cfg);
    std::printf("method %s, %ld descriptors, k = %ld\n", to_string(r.method).c_str(), static_cast<long>(r.count),
                static_cast<long>(cfg.solver.k));
    if (r.solved.diagnostics.rank_warning) std::printf("warning: normal equations are rank deficient\n");
    if (r.curve) std::printf("mean geodesic error %.6g, median %.6g\n", r.curve->mean, r.curve->median);
    std::printf("wrote %s\n", cfg.out.string().c_str());
    return 0;
}

int run_sweep(const Overrides& o)
{
    const ExperimentConfig cfg = o.resolve();
    const auto cells = sweep_descriptors(cfg);
    int failed = 0;
    for (const auto& c : cells) {
        std::printf("%-11s %3ld  %.6g%s%s\n", to_string(c.method).c_str(), static_cast<long>(c.count), c.mean_error,
                    c.message.empty() ? "" : "  ", c.message.c_str());
        failed += c.message.empty() ? 0 : 1;
    }
    std::printf("wrote %s\n", (cfg.out / "sweep.csv").string().c_str());
    return failed == static_cast<int>(cells.size()) ? 1 : 0;
}

struct EvalArgs {
    std::string map, ground_truth, target, out = "out";
};

int run_eval(const EvalArgs& a)
{
    const TriangleMesh mesh_y = load_mesh(a.target);
    const CorrespondenceMap map = load_correspondence(a.map, mesh_y.n_vertices(), MapMethod::NearestSpectral);
    const CorrespondenceMap truth = load_correspondence(a.ground_truth, mesh_y.n_vertices());
    const ErrorCurve curve = geodesic_error(map, truth, mesh_y);
    fs::create_directories(a.out);
    save_error_curve(curve, fs::path(a.out) / "errors.csv", fs::path(a.out) / "curve.csv");
    std::ofstream summary(fs::path(a.out) / "summary.txt");
    summary << "mean_error = " << detail::format_double(curve.mean) << '\n'
            << "median_error = " << detail::format_double(curve.median) << '\n'
            << "diameter = " << detail::format_double(curve.diameter) << '\n';
    std::printf("mean geodesic error %.6g, median %.6g\n", curve.mean, curve.median);
    return 0;
}

struct ExportArgs {
    std::optional<std::string> config;
    std::string source;
    int landmark = 0;
    long long count = 4;
    std::optional<double> sigma, sigma_d;
    std::optional<long long> n0;
    std::string out = "out";
};

/// Descriptor field and eigenfunctions 2..count+1 of its kernel operator, one PLY + CSV each.
int run_export(const ExportArgs& a)
{
    ExperimentConfig cfg = a.config ? load_config(*a.config) : ExperimentConfig{};
    if (a.sigma) cfg.solver.sigma = *a.sigma;
    if (a.sigma_d) cfg.solver.sigma_d = *a.sigma_d;
    if (a.n0) cfg.solver.n0 = static_cast<Index>(*a.n0);
    const fs::path source = a.source.empty() ? cfg.source : fs::path(a.source);
    if (source.empty()) throw ValidationError("export-eig needs --source");
    if (a.count < 1) throw ValidationError("--count must be positive");

    const TriangleMesh mesh = load_mesh(source);
    const double sigma_d = cfg.solver.sigma_d > 0.0 ? cfg.solver.sigma_d : 0.05 * mesh_diameter(mesh);
    const PointwiseDescriptor desc = normalize_descriptor(gaussian_landmark(mesh, a.landmark, sigma_d));
    const Index n0 = std::min(cfg.solver.n0, mesh.n_vertices());
    const auto samples = farthest_point_sampling(mesh, n0, 0);
    const KernelEigenfunctions eig = kernel_eigenfunctions(DescriptorKernel(desc, cfg.solver.sigma),
                                                           barycentric_mass(mesh), samples,
                                                           static_cast<Index>(a.count) + 1);
    const fs::path out(a.out);
    fs::create_directories(out);
    export_scalar_field(mesh, desc.values, out / "descriptor.ply");
    std::ofstream values(out / "eigenvalues.csv");
    values << "index,eigenvalue\n";
    for (Index i = 0; i < eig.values.size(); ++i) {
        values << i + 1 << ',' << detail::format_double(eig.values[i]) << '\n';
        if (i == 0) continue;
        export_scalar_field(mesh, eig.functions.col(i), out / ("eig_" + std::to_string(i + 1) + ".ply"));
    }
    std::printf("wrote %lld eigenfunction fields to %s\n", a.count, out.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Functional-map shape correspondence with bilateral operators"};
    app.require_subcommand(1);

    Overrides corr_args, sweep_args;
    auto* correspond = app.add_subcommand("correspond", "match one shape pair");
    corr_args.add_to(*correspond, false);
    auto* sweep = app.add_subcommand("sweep", "descriptor-count sweep over methods");
    sweep_args.add_to(*sweep, true);

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "score an existing map against a ground truth");
    eval->add_option("--map", eval_args.map, "map file: one target index per source vertex")->required();
    eval->add_option("--ground-truth", eval_args.ground_truth, "ground-truth map")->required();
    eval->add_option("--target", eval_args.target, "target mesh")->required();
    eval->add_option("--out", eval_args.out, "output directory");

    ExportArgs export_args;
    auto* export_eig = app.add_subcommand("export-eig", "export eigenfunctions of a descriptor kernel operator");
    export_eig->add_option("--config", export_args.config, "config file");
    export_eig->add_option("--source", export_args.source, "mesh");
    export_eig->add_option("--landmark", export_args.landmark, "landmark vertex of the gaussian descriptor");
    export_eig->add_option("--count", export_args.count, "eigenfunctions to export, starting at the second");
    export_eig->add_option("--sigma", export_args.sigma, "descriptor kernel bandwidth");
    export_eig->add_option("--sigma-d", export_args.sigma_d, "gaussian landmark width");
    export_eig->add_option("--n0", export_args.n0, "Nystrom samples");
    export_eig->add_option("--out", export_args.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (correspond->parsed()) return run_correspond(corr_args);
        if (sweep->parsed()) return run_sweep(sweep_args);
        if (eval->parsed()) return run_eval(eval_args);
        if (export_eig->parsed()) return run_export(export_args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
