#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/fmap.hpp"
#include "bifmap/geodesics.hpp"
#include "bifmap/mesh.hpp"
#include "bifmap/mesh_io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace bifmap {

inline constexpr int kCurveSteps = 25;        // thresholds 0, 0.01, ..., 0.25
inline constexpr double kCurveStep = 0.01;

struct ErrorCurve {
    std::vector<double> errors; // per source vertex, geodesic error / diameter
    double mean = 0.0;
    double median = 0.0;
    double diameter = 0.0;
    std::vector<double> thresholds;
    std::vector<double> cumulative; // fraction of vertices with error <= threshold
};

inline std::vector<double> curve_thresholds()
{
    std::vector<double> t(kCurveSteps + 1);
    for (int i = 0; i <= kCurveSteps; ++i) t[static_cast<std::size_t>(i)] = kCurveStep * i;
    return t;
}

/// Summaries and cumulative curve of already-normalised errors.
inline ErrorCurve summarize_errors(std::vector<double> errors, double diameter)
{
    ErrorCurve curve;
    curve.diameter = diameter;
    curve.thresholds = curve_thresholds();
    curve.errors = std::move(errors);
    const auto n = curve.errors.size();
    curve.cumulative.assign(curve.thresholds.size(), n == 0 ? 0.0 : 1.0);
    if (n == 0) return curve;

    curve.mean = std::accumulate(curve.errors.begin(), curve.errors.end(), 0.0) / static_cast<double>(n);
    std::vector<double> sorted = curve.errors;
    std::sort(sorted.begin(), sorted.end());
    curve.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        const auto hit = std::upper_bound(sorted.begin(), sorted.end(), curve.thresholds[i] + 1e-12) - sorted.begin();
        curve.cumulative[i] = static_cast<double>(hit) / static_cast<double>(n);
    }
    return curve;
}

///
/// Geodesic distance on Y between predicted and true targets, divided by diam(Y).
/// `diameter` <= 0 computes it with mesh_diameter.
///
inline ErrorCurve geodesic_error(const CorrespondenceMap& map, const CorrespondenceMap& ground_truth,
                                 const TriangleMesh& mesh_y, double diameter = 0.0)
{
    if (map.size() != ground_truth.size()) {
        throw DimensionError("map has " + std::to_string(map.size()) + " entries, ground truth has " +
                             std::to_string(ground_truth.size()));
    }
    const auto ny = static_cast<int>(mesh_y.n_vertices());
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (map.target[i] < 0 || map.target[i] >= ny || ground_truth.target[i] < 0 || ground_truth.target[i] >= ny) {
            throw DimensionError("map index out of range for target mesh");
        }
    }
    if (!(diameter > 0.0)) diameter = mesh_diameter(mesh_y);

    // Full fields are reused when a true target repeats; single queries exit early.
    std::unordered_map<int, int> repeats;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (map.target[i] != ground_truth.target[i]) ++repeats[ground_truth.target[i]];
    }
    std::unordered_map<int, Eigen::VectorXd> fields;
    std::vector<double> errors(map.size(), 0.0);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const int truth = ground_truth.target[i];
        const int pred = map.target[i];
        if (pred == truth) continue;
        double d;
        if (repeats[truth] > 1) {
            auto it = fields.find(truth);
            if (it == fields.end()) it = fields.emplace(truth, geodesic_distances(mesh_y, truth).distance).first;
            d = it->second[pred];
        } else {
            d = geodesic_distance(mesh_y, truth, pred);
        }
        errors[i] = d / diameter;
    }
    return summarize_errors(std::move(errors), diameter);
}

inline void save_error_curve(const ErrorCurve& curve, const std::filesystem::path& errors_csv,
                             const std::filesystem::path& curve_csv)
{
    std::ofstream e(errors_csv);
    if (!e) throw IOError("cannot write '" + errors_csv.string() + "'");
    e << "vertex,error\n";
    for (std::size_t i = 0; i < curve.errors.size(); ++i) e << i << ',' << detail::format_double(curve.errors[i]) << '\n';
    std::ofstream c(curve_csv);
    if (!c) throw IOError("cannot write '" + curve_csv.string() + "'");
    c << "threshold,fraction\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        c << detail::format_double(curve.thresholds[i]) << ',' << detail::format_double(curve.cumulative[i]) << '\n';
    }
}

// ---- functional map CSV -------------------------------------------------------------

inline void save_fmap_csv(const Eigen::MatrixXd& C, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw IOError("cannot write '" + path.string() + "'");
    for (Index i = 0; i < C.rows(); ++i) {
        for (Index j = 0; j < C.cols(); ++j) {
            if (j) out << ',';
            out << detail::format_double(C(i, j));
        }
        out << '\n';
    }
}

inline Eigen::MatrixXd load_fmap_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IOError("cannot read '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ParseError("bad number '" + cell + "' in '" + path.string() + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged rows in '" + path.string() + "'");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("'" + path.string() + "' holds no matrix");
    Eigen::MatrixXd C(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) C(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return C;
}

inline CorrespondenceMap load_correspondence(const std::filesystem::path& path, Index n_target,
                                             MapMethod method = MapMethod::GroundTruth)
{
    CorrespondenceMap map;
    map.target = load_index_list(path);
    map.method = method;
    for (int t : map.target) {
        if (t < 0 || t >= n_target) {
            throw ValidationError("'" + path.string() + "' has index " + std::to_string(t) + " outside [0, " +
                                  std::to_string(n_target) + ")");
        }
    }
    return map;
}

// ---- permutation-space energy ------------------------------------------------------

inline constexpr Index kSpatialOracleMaxVertices = 10;

///
/// h(P) + alpha g(P) for the permutation P with P[target[x], x] = 1:
///   h = sum_i ||P f_i - g_i||^2,   g = sum_j ||P O_j - Q_j P||_F^2.
/// Dense and exhaustive-search friendly; guarded to tiny meshes.
///
inline double spatial_energy_oracle(const std::vector<int>& target, const std::vector<Eigen::VectorXd>& fx,
                                    const std::vector<Eigen::VectorXd>& fy, const std::vector<Eigen::MatrixXd>& ops_x,
                                    const std::vector<Eigen::MatrixXd>& ops_y, double alpha = 1.0)
{
    const auto n = static_cast<Index>(target.size());
    if (n > kSpatialOracleMaxVertices) {
        throw SizeGuardError("spatial energy oracle is limited to n <= " + std::to_string(kSpatialOracleMaxVertices));
    }
    detail::require_dims(fx.size() == fy.size() && ops_x.size() == ops_y.size(), "term lists differ in length");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Index x = 0; x < n; ++x) {
        const int y = target[static_cast<std::size_t>(x)];
        detail::require_dims(y >= 0 && y < n, "permutation index out of range");
        p(y, x) = 1.0;
    }
    detail::require_dims((p.colwise().sum().array() == 1.0).all() && (p.rowwise().sum().array() == 1.0).all(),
                         "target is not a permutation");
    double h = 0.0;
    for (std::size_t i = 0; i < fx.size(); ++i) {
        detail::require_dims(fx[i].size() == n && fy[i].size() == n, "descriptor length mismatch");
        h += (p * fx[i] - fy[i]).squaredNorm();
    }
    double g = 0.0;
    for (std::size_t j = 0; j < ops_x.size(); ++j) {
        detail::require_dims(ops_x[j].rows() == n && ops_x[j].cols() == n && ops_y[j].rows() == n && ops_y[j].cols() == n,
                             "operator size mismatch");
        g += (p * ops_x[j] - ops_y[j] * p).squaredNorm();
    }
    return h + alpha * g;
}

// ---- scalar field export ------------------------------------------------------------

namespace detail {

/// Viridis control points, evenly spaced over [0, 1].
inline constexpr std::array<std::array<double, 3>, 9> kViridis{{
    {0.267004, 0.004874, 0.329415},
    {0.282623, 0.140926, 0.457517},
    {0.253935, 0.265254, 0.529983},
    {0.206756, 0.371758, 0.553117},
    {0.163625, 0.471133, 0.558148},
    {0.127568, 0.566949, 0.550556},
    {0.134692, 0.658636, 0.517649},
    {0.266941, 0.748751, 0.440573},
    {0.993248, 0.906157, 0.143936},
}};

inline std::array<std::uint8_t, 3> viridis(double s)
{
    s = std::clamp(s, 0.0, 1.0);
    const double pos = s * static_cast<double>(kViridis.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), kViridis.size() - 2);
    const double f = pos - static_cast<double>(i);
    std::array<std::uint8_t, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - f) * kViridis[i][static_cast<std::size_t>(c)] + f * kViridis[i + 1][static_cast<std::size_t>(c)];
        rgb[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    return rgb;
}

} // namespace detail

inline std::filesystem::path sidecar_path(const std::filesystem::path& ply_path)
{
    std::filesystem::path p = ply_path;
    return p.replace_extension(".csv");
}

///
/// Writes the mesh as PLY coloured by the field over [min, max] and the raw values next to it
/// as `<stem>.csv`. A constant field takes the bottom colour of the ramp.
///
inline void export_scalar_field(const TriangleMesh& mesh, const Eigen::VectorXd& field, const std::filesystem::path& path)
{
    detail::require_dims(field.size() == mesh.n_vertices(), "field length does not match mesh");
    const double lo = field.minCoeff();
    const double hi = field.maxCoeff();
    VertexColors colors(mesh.n_vertices(), 3);
    for (Index v = 0; v < mesh.n_vertices(); ++v) {
        const double s = hi > lo ? (field[v] - lo) / (hi - lo) : 0.0;
        const auto rgb = detail::viridis(s);
        for (int c = 0; c < 3; ++c) colors(v, c) = rgb[static_cast<std::size_t>(c)];
    }
    save_ply(mesh, path, &colors);
    std::ofstream out(sidecar_path(path));
    if (!out) throw IOError("cannot write '" + sidecar_path(path).string() + "'");
    for (Index v = 0; v < field.size(); ++v) out << detail::format_double(field[v]) << '\n';
}

} // namespace bifmap
