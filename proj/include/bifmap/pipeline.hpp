#pragma once

#include "bifmap/descriptors.hpp"
#include "bifmap/errors.hpp"
#include "bifmap/evaluation.hpp"
#include "bifmap/fmap.hpp"
#include "bifmap/geodesics.hpp"
#include "bifmap/mesh_io.hpp"
#include "bifmap/operators.hpp"
#include "bifmap/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace bifmap {

enum class Method { PlainFmap, Diagonal, Bilateral };
enum class DescriptorSource { GaussianLandmark, Wks, External };

inline std::string to_string(Method m)
{
    switch (m) {
    case Method::PlainFmap: return "plain-fmap";
    case Method::Diagonal: return "diagonal";
    case Method::Bilateral: return "bilateral";
    }
    return "?";
}

inline std::string to_string(DescriptorSource s)
{
    switch (s) {
    case DescriptorSource::GaussianLandmark: return "gaussian-landmark";
    case DescriptorSource::Wks: return "wks";
    case DescriptorSource::External: return "external";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    if (s == "plain-fmap" || s == "plain") return Method::PlainFmap;
    if (s == "diagonal") return Method::Diagonal;
    if (s == "bilateral") return Method::Bilateral;
    throw ValidationError("unknown method '" + s + "' (expected plain-fmap, diagonal or bilateral)");
}

inline DescriptorSource parse_descriptor_source(const std::string& s)
{
    if (s == "gaussian-landmark" || s == "gaussian") return DescriptorSource::GaussianLandmark;
    if (s == "wks") return DescriptorSource::Wks;
    if (s == "external") return DescriptorSource::External;
    throw ValidationError("unknown descriptor source '" + s + "' (expected gaussian-landmark, wks or external)");
}

struct ExperimentConfig {
    std::filesystem::path source;
    std::filesystem::path target;
    std::filesystem::path ground_truth;           // optional; one target index per source vertex
    std::filesystem::path landmarks;              // optional "src tgt" pairs; default FPS mapped by ground truth
    std::vector<std::filesystem::path> descriptors_x; // external descriptor files
    std::vector<std::filesystem::path> descriptors_y;
    std::filesystem::path cache_dir;              // optional basis cache
    std::filesystem::path out = "out";

    Method method = Method::Bilateral;
    DescriptorSource descriptor = DescriptorSource::GaussianLandmark;
    Index count = 5;                              // descriptors used by a single run
    std::vector<Index> counts{2, 4, 6, 10};       // sweep
    std::vector<Method> methods{Method::PlainFmap, Method::Diagonal, Method::Bilateral};
    SolverConfig solver;
    std::uint64_t seed = 0;

    void validate() const
    {
        solver.validate();
        if (count < 0) throw ValidationError("descriptor count must be non-negative");
        if (counts.empty()) throw ValidationError("sweep needs at least one descriptor count");
        for (std::size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] < 1 || (i > 0 && counts[i] <= counts[i - 1])) {
                throw ValidationError("descriptor counts must be positive and strictly ascending");
            }
        }
        if (methods.empty()) throw ValidationError("sweep needs at least one method");
        if (descriptors_x.size() != descriptors_y.size()) {
            throw ValidationError("external descriptor lists differ in length");
        }
    }
};

// ---- config file --------------------------------------------------------------------
//
// Plain text, `key = value` per line, optional [section] headers, '#' or ';' comments.
// Sections only group keys; every key is unique across the file.

inline std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin = "config")
{
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(origin + ":" + std::to_string(lineno) + ": unterminated section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (out.count(key)) throw ParseError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

namespace detail {

inline double parse_real(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ParseError("config key '" + key + "': '" + v + "' is not a number");
}

inline long long parse_integer(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ParseError("config key '" + key + "': '" + v + "' is not an integer");
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
    }
    return out;
}

} // namespace detail

/// Applies `key = value` settings onto `cfg`. Unknown keys are an error.
inline void apply_config_values(ExperimentConfig& cfg, const std::map<std::string, std::string>& values)
{
    using namespace detail;
    for (const auto& [key, v] : values) {
        if (key == "source") cfg.source = v;
        else if (key == "target") cfg.target = v;
        else if (key == "ground_truth") cfg.ground_truth = v;
        else if (key == "landmarks") cfg.landmarks = v;
        else if (key == "cache_dir") cfg.cache_dir = v;
        else if (key == "out") cfg.out = v;
        else if (key == "descriptors_x") {
            cfg.descriptors_x.clear();
            for (const auto& p : split_list(v)) cfg.descriptors_x.emplace_back(p);
        } else if (key == "descriptors_y") {
            cfg.descriptors_y.clear();
            for (const auto& p : split_list(v)) cfg.descriptors_y.emplace_back(p);
        } else if (key == "method") cfg.method = parse_method(v);
        else if (key == "methods") {
            cfg.methods.clear();
            for (const auto& m : split_list(v)) cfg.methods.push_back(parse_method(m));
        } else if (key == "descriptor") cfg.descriptor = parse_descriptor_source(v);
        else if (key == "count") cfg.count = static_cast<Index>(parse_integer(key, v));
        else if (key == "counts") {
            cfg.counts.clear();
            for (const auto& c : split_list(v)) cfg.counts.push_back(static_cast<Index>(parse_integer(key, c)));
        } else if (key == "k") cfg.solver.k = static_cast<Index>(parse_integer(key, v));
        else if (key == "alpha") cfg.solver.alpha = parse_real(key, v);
        else if (key == "t") cfg.solver.t = parse_real(key, v);
        else if (key == "sigma") cfg.solver.sigma = parse_real(key, v);
        else if (key == "gamma") cfg.solver.gamma = parse_real(key, v);
        else if (key == "sigma_d") cfg.solver.sigma_d = parse_real(key, v);
        else if (key == "n0") cfg.solver.n0 = static_cast<Index>(parse_integer(key, v));
        else if (key == "icp_iterations") cfg.solver.icp_iterations = static_cast<Index>(parse_integer(key, v));
        else if (key == "cg_tolerance") cfg.solver.cg_tolerance = parse_real(key, v);
        else if (key == "cg_max_iterations") cfg.solver.cg_max_iterations = static_cast<Index>(parse_integer(key, v));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(key, v));
        else throw ParseError("unknown config key '" + key + "'");
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IOError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg;
    apply_config_values(cfg, parse_config_text(buf.str(), path.string()));
    return cfg;
}

// ---- pipeline -----------------------------------------------------------------------

namespace detail {

template <typename F>
auto pipeline_step(const char* step, F&& body) -> decltype(body())
{
    try {
        return body();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(step, e.what());
    }
}

} // namespace detail

/// Everything about a shape pair that does not depend on the method or descriptor count.
struct PreparedPair {
    TriangleMesh mesh_x;
    TriangleMesh mesh_y;
    SpectralBasis basis_x;
    SpectralBasis basis_y;
    std::optional<CorrespondenceMap> ground_truth;
    double diameter_x = 0.0;
    double diameter_y = 0.0;
    std::vector<LandmarkPair> landmarks;             // ordered; the first `count` are used
    std::vector<GeodesicField> fields_x, fields_y;   // per landmark
    std::vector<PointwiseDescriptor> external_x, external_y;
    std::vector<int> samples_x, samples_y;           // Nystrom samples
};

///
/// Bases, diameters, landmark geodesics and Nystrom samples for a pair. `max_count`
/// landmarks are prepared (FPS on X seeded at vertex 0, mapped by the ground truth, unless
/// an explicit landmark file is configured).
///
inline PreparedPair prepare_pair(TriangleMesh mesh_x, TriangleMesh mesh_y, std::optional<CorrespondenceMap> ground_truth,
                                 const ExperimentConfig& cfg, Index max_count)
{
    const SolverConfig& s = cfg.solver;
    EigenOptions eig;
    eig.seed = cfg.seed;
    PreparedPair p{std::move(mesh_x), std::move(mesh_y), {}, {}, std::move(ground_truth), 0.0, 0.0, {}, {}, {}, {}, {}, {}, {}};

    if (p.ground_truth) {
        detail::pipeline_step("load", [&] {
            detail::require_dims(static_cast<Index>(p.ground_truth->size()) == p.mesh_x.n_vertices(),
                                 "ground truth has " + std::to_string(p.ground_truth->size()) + " entries for " +
                                     std::to_string(p.mesh_x.n_vertices()) + " source vertices");
            for (int t : p.ground_truth->target) {
                if (t < 0 || t >= p.mesh_y.n_vertices()) throw ValidationError("ground truth index out of range");
            }
        });
    }

    detail::pipeline_step("eigendecompose", [&] {
        if (s.k > p.mesh_x.n_vertices() || s.k > p.mesh_y.n_vertices()) {
            throw DimensionError("k exceeds the vertex count");
        }
        if (!cfg.cache_dir.empty() && !cfg.source.empty() && !cfg.target.empty()) {
            p.basis_x = eigendecompose_cached(p.mesh_x, cfg.source, s.k, cfg.cache_dir, eig);
            p.basis_y = eigendecompose_cached(p.mesh_y, cfg.target, s.k, cfg.cache_dir, eig);
        } else {
            p.basis_x = eigendecompose(p.mesh_x, s.k, eig);
            p.basis_y = eigendecompose(p.mesh_y, s.k, eig);
        }
    });

    detail::pipeline_step("descriptors", [&] {
        p.diameter_x = mesh_diameter(p.mesh_x);
        p.diameter_y = mesh_diameter(p.mesh_y);
        if (cfg.descriptor == DescriptorSource::GaussianLandmark && max_count > 0) {
            if (!cfg.landmarks.empty()) {
                p.landmarks = load_landmark_pairs(cfg.landmarks);
            } else {
                if (!p.ground_truth) throw ValidationError("gaussian landmarks need a landmark file or a ground truth");
                for (int x : farthest_point_sampling(p.mesh_x, std::min(max_count, p.mesh_x.n_vertices()), 0)) {
                    p.landmarks.push_back({x, p.ground_truth->target[static_cast<std::size_t>(x)]});
                }
            }
            if (static_cast<Index>(p.landmarks.size()) < max_count) {
                throw ValidationError("only " + std::to_string(p.landmarks.size()) + " landmarks for " +
                                      std::to_string(max_count) + " descriptors");
            }
            p.landmarks.resize(static_cast<std::size_t>(max_count));
            for (const auto& l : p.landmarks) {
                if (l.source >= p.mesh_x.n_vertices() || l.target >= p.mesh_y.n_vertices()) {
                    throw ValidationError("landmark index out of range");
                }
                p.fields_x.push_back(geodesic_distances(p.mesh_x, l.source));
                p.fields_y.push_back(geodesic_distances(p.mesh_y, l.target));
            }
        } else if (cfg.descriptor == DescriptorSource::External) {
            if (static_cast<Index>(cfg.descriptors_x.size()) < max_count) {
                throw ValidationError("only " + std::to_string(cfg.descriptors_x.size()) + " external descriptor pairs for " +
                                      std::to_string(max_count) + " descriptors");
            }
            for (Index i = 0; i < max_count; ++i) {
                p.external_x.push_back(load_external_descriptor(cfg.descriptors_x[static_cast<std::size_t>(i)], p.mesh_x.n_vertices()));
                p.external_y.push_back(load_external_descriptor(cfg.descriptors_y[static_cast<std::size_t>(i)], p.mesh_y.n_vertices()));
            }
        }
    });

    detail::pipeline_step("operators", [&] {
        p.samples_x = farthest_point_sampling(p.mesh_x, std::min(s.n0, p.mesh_x.n_vertices()), 0);
        p.samples_y = farthest_point_sampling(p.mesh_y, std::min(s.n0, p.mesh_y.n_vertices()), 0);
    });
    return p;
}

/// Normalised descriptor pairs for the first `count` descriptors.
inline DescriptorSet build_descriptors(const PreparedPair& p, const ExperimentConfig& cfg, Index count)
{
    DescriptorSet set;
    if (count == 0) return set;
    switch (cfg.descriptor) {
    case DescriptorSource::GaussianLandmark: {
        detail::require_dims(count <= static_cast<Index>(p.fields_x.size()), "more descriptors requested than prepared");
        const double sx = cfg.solver.sigma_d > 0.0 ? cfg.solver.sigma_d : 0.05 * p.diameter_x;
        const double sy = cfg.solver.sigma_d > 0.0 ? cfg.solver.sigma_d : 0.05 * p.diameter_y;
        for (Index i = 0; i < count; ++i) {
            auto [a, b] = normalize_pair(gaussian_landmark(p.fields_x[static_cast<std::size_t>(i)], sx),
                                         gaussian_landmark(p.fields_y[static_cast<std::size_t>(i)], sy));
            set.push_back(std::move(a), std::move(b));
        }
        break;
    }
    case DescriptorSource::Wks: {
        const auto wx = wks(p.basis_x, count);
        const auto wy = wks(p.basis_y, count);
        for (Index i = 0; i < count; ++i) {
            auto [a, b] = normalize_pair(wx[static_cast<std::size_t>(i)], wy[static_cast<std::size_t>(i)]);
            set.push_back(std::move(a), std::move(b));
        }
        break;
    }
    case DescriptorSource::External: {
        detail::require_dims(count <= static_cast<Index>(p.external_x.size()), "more descriptors requested than prepared");
        for (Index i = 0; i < count; ++i) {
            auto [a, b] = normalize_pair(p.external_x[static_cast<std::size_t>(i)], p.external_y[static_cast<std::size_t>(i)]);
            set.push_back(std::move(a), std::move(b));
        }
        break;
    }
    }
    return set;
}

struct OperatorSet {
    std::vector<SpectralOperator> x, y;
};

///
/// Commutativity operators per method:
///   plain-fmap  one heat operator,
///   diagonal    the heat operator plus one multiplication operator per descriptor,
///   bilateral   one bilateral operator (heat + descriptor kernel) per descriptor.
///
inline OperatorSet build_operators(const PreparedPair& p, const DescriptorSet& desc, Method method, const SolverConfig& s)
{
    OperatorSet ops;
    const bool with_heat = method != Method::Bilateral || desc.size() == 0;
    if (with_heat) {
        ops.x.push_back(heat_operator_spectral(p.basis_x, s.t, ShapeTag::X));
        ops.y.push_back(heat_operator_spectral(p.basis_y, s.t, ShapeTag::Y));
    }
    for (std::size_t i = 0; i < desc.size(); ++i) {
        if (method == Method::Diagonal) {
            ops.x.push_back(diagonal_operator(p.basis_x, desc.x[i], ShapeTag::X));
            ops.y.push_back(diagonal_operator(p.basis_y, desc.y[i], ShapeTag::Y));
        } else if (method == Method::Bilateral) {
            ops.x.push_back(bilateral_operator(p.basis_x, DescriptorKernel(desc.x[i], s.sigma), s.t, s.gamma, p.samples_x, ShapeTag::X));
            ops.y.push_back(bilateral_operator(p.basis_y, DescriptorKernel(desc.y[i], s.sigma), s.t, s.gamma, p.samples_y, ShapeTag::Y));
        }
    }
    return ops;
}

struct PipelineResult {
    FunctionalMap solved;   // straight from the least-squares solve
    FunctionalMap refined;  // after ICP
    CorrespondenceMap map;
    std::optional<ErrorCurve> curve;
    Method method = Method::Bilateral;
    Index count = 0;
    bool descriptors_normalized = false;
};

inline PipelineResult run_prepared(const PreparedPair& p, const ExperimentConfig& cfg, Method method, Index count)
{
    const SolverConfig& s = cfg.solver;
    PipelineResult r;
    r.method = method;
    r.count = count;

    const DescriptorSet desc = detail::pipeline_step("descriptors", [&] { return build_descriptors(p, cfg, count); });
    r.descriptors_normalized = desc.size() > 0;
    for (std::size_t i = 0; i < desc.size(); ++i) r.descriptors_normalized = r.descriptors_normalized && desc.x[i].normalized;

    const OperatorSet ops = detail::pipeline_step("operators", [&] { return build_operators(p, desc, method, s); });

    r.solved = detail::pipeline_step("solve", [&] {
        std::vector<SpectralFunction> fx, fy;
        for (std::size_t i = 0; i < desc.size(); ++i) {
            fx.push_back(project_function(p.basis_x, desc.x[i].values));
            fy.push_back(project_function(p.basis_y, desc.y[i].values));
        }
        return solve_fmap(fx, fy, ops.x, ops.y, s);
    });
    r.refined = detail::pipeline_step("icp", [&] { return icp_refine(r.solved, p.basis_x, p.basis_y, s.icp_iterations); });
    r.map = detail::pipeline_step("p2p", [&] { return p2p_from_fmap(r.refined, p.basis_x, p.basis_y); });
    if (p.ground_truth) {
        r.curve = detail::pipeline_step("evaluate", [&] { return geodesic_error(r.map, *p.ground_truth, p.mesh_y, p.diameter_y); });
    }
    return r;
}

inline PreparedPair load_and_prepare(const ExperimentConfig& cfg, Index max_count)
{
    cfg.validate();
    auto [mx, my, gt] = detail::pipeline_step("load", [&] {
        if (cfg.source.empty() || cfg.target.empty()) throw ValidationError("source and target meshes are required");
        TriangleMesh x = load_mesh(cfg.source);
        TriangleMesh y = load_mesh(cfg.target);
        std::optional<CorrespondenceMap> truth;
        if (!cfg.ground_truth.empty()) truth = load_correspondence(cfg.ground_truth, y.n_vertices());
        return std::make_tuple(std::move(x), std::move(y), std::move(truth));
    });
    return prepare_pair(std::move(mx), std::move(my), std::move(gt), cfg, max_count);
}

namespace detail {

inline void write_summary(const PipelineResult& r, const ExperimentConfig& cfg, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IOError("cannot write '" + path.string() + "'");
    const auto& d = r.solved.diagnostics;
    out << "method = " << to_string(r.method) << '\n'
        << "descriptor = " << to_string(cfg.descriptor) << '\n'
        << "count = " << r.count << '\n'
        << "descriptors_normalized = " << (r.descriptors_normalized ? 1 : 0) << '\n'
        << "k = " << cfg.solver.k << '\n'
        << "alpha = " << format_double(cfg.solver.alpha) << '\n'
        << "t = " << format_double(cfg.solver.t) << '\n'
        << "sigma = " << format_double(cfg.solver.sigma) << '\n'
        << "gamma = " << format_double(cfg.solver.gamma) << '\n'
        << "n0 = " << cfg.solver.n0 << '\n'
        << "seed = " << cfg.seed << '\n'
        << "solver_path = " << (d.dense ? "dense" : "cg") << '\n'
        << "cg_iterations = " << d.iterations << '\n'
        << "rank_warning = " << (d.rank_warning ? 1 : 0) << '\n'
        << "objective = " << format_double(d.objective) << '\n'
        << "icp_steps = " << r.refined.diagnostics.icp_residuals.size() << '\n'
        << "icp_stopped_early = " << (r.refined.diagnostics.icp_stopped_early ? 1 : 0) << '\n';
    if (r.curve) {
        out << "mean_error = " << format_double(r.curve->mean) << '\n'
            << "median_error = " << format_double(r.curve->median) << '\n';
    }
}

} // namespace detail

/// Writes map.txt, C.csv, summary.txt and, with a ground truth, errors.csv and curve.csv.
inline void write_pipeline_outputs(const PipelineResult& r, const ExperimentConfig& cfg, const std::filesystem::path& dir)
{
    detail::pipeline_step("write", [&] {
        std::filesystem::create_directories(dir);
        save_index_list(r.map.target, dir / "map.txt");
        save_fmap_csv(r.refined.C, dir / "C.csv");
        if (r.curve) save_error_curve(*r.curve, dir / "errors.csv", dir / "curve.csv");
        detail::write_summary(r, cfg, dir / "summary.txt");
    });
}

/// Single pair: load, eigendecompose, build descriptors and operators, solve, refine, match, evaluate, write.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg)
{
    const PreparedPair p = load_and_prepare(cfg, cfg.count);
    PipelineResult r = run_prepared(p, cfg, cfg.method, cfg.count);
    write_pipeline_outputs(r, cfg, cfg.out);
    return r;
}

struct SweepCell {
    Method method;
    Index count;
    double mean_error = std::numeric_limits<double>::quiet_NaN();
    double median_error = std::numeric_limits<double>::quiet_NaN();
    std::string message; // empty on success
};

/// Every (method, count) cell on one prepared pair. Failed cells keep NaN errors.
inline std::vector<SweepCell> sweep_prepared(const PreparedPair& p, const ExperimentConfig& cfg)
{
    std::vector<SweepCell> cells;
    for (Method m : cfg.methods) {
        for (Index c : cfg.counts) {
            SweepCell cell{m, c};
            try {
                const PipelineResult r = run_prepared(p, cfg, m, c);
                if (!r.curve) throw PipelineError("evaluate", "sweep needs a ground truth");
                cell.mean_error = r.curve->mean;
                cell.median_error = r.curve->median;
            } catch (const std::exception& e) {
                cell.message = e.what();
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

inline void save_sweep_csv(const std::vector<SweepCell>& cells, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IOError("cannot write '" + path.string() + "'");
    out << "method,count,mean_error,median_error,status\n";
    for (const auto& c : cells) {
        std::string status = c.message.empty() ? "ok" : c.message;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out << to_string(c.method) << ',' << c.count << ',' << detail::format_double(c.mean_error) << ','
            << detail::format_double(c.median_error) << ',' << status << '\n';
    }
}

/// Descriptor-count sweep over all configured methods; writes sweep.csv into cfg.out.
inline std::vector<SweepCell> sweep_descriptors(const ExperimentConfig& cfg)
{
    if (cfg.ground_truth.empty()) throw ValidationError("sweep needs a ground truth");
    const PreparedPair p = load_and_prepare(cfg, cfg.counts.back());
    auto cells = sweep_prepared(p, cfg);
    detail::pipeline_step("write", [&] {
        std::filesystem::create_directories(cfg.out);
        save_sweep_csv(cells, cfg.out / "sweep.csv");
    });
    return cells;
}

} // namespace bifmap
