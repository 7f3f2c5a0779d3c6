#pragma once

#include "bifmap/errors.hpp"
#include "bifmap/geodesics.hpp"
#include "bifmap/mesh_io.hpp"
#include "bifmap/spectral.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace bifmap {

enum class DescriptorKind { GaussianLandmark, Wks, External };

/// Scalar field over the vertices of one shape.
struct PointwiseDescriptor {
    Eigen::VectorXd values;
    DescriptorKind kind = DescriptorKind::External;
    int landmark = -1;                                        // gaussian-landmark only
    double energy = std::numeric_limits<double>::quiet_NaN(); // wks only (log-energy)
    bool normalized = false;
    bool constant = false; // set by normalisation when the field has no range

    Index size() const noexcept { return values.size(); }
};

/// Corresponding descriptors: `x[i]` on the source matches `y[i]` on the target.
struct DescriptorSet {
    std::vector<PointwiseDescriptor> x;
    std::vector<PointwiseDescriptor> y;

    std::size_t size() const noexcept { return x.size(); }

    void push_back(PointwiseDescriptor on_x, PointwiseDescriptor on_y)
    {
        x.push_back(std::move(on_x));
        y.push_back(std::move(on_y));
    }
};

/// exp(-d(landmark, x)^2 / sigma_d^2) from precomputed geodesic distances.
inline PointwiseDescriptor gaussian_landmark(const GeodesicField& field, double sigma_d)
{
    if (!(sigma_d > 0.0)) throw DimensionError("gaussian landmark width must be positive");
    PointwiseDescriptor d;
    d.values = (-(field.distance.array() / sigma_d).square()).exp();
    d.kind = DescriptorKind::GaussianLandmark;
    d.landmark = field.source;
    return d;
}

inline PointwiseDescriptor gaussian_landmark(const TriangleMesh& mesh, int landmark, double sigma_d)
{
    return gaussian_landmark(geodesic_distances(mesh, landmark), sigma_d);
}

inline constexpr double kWksVarianceFactor = 7.0;

///
/// Wave kernel signatures at `n_levels` log-energies spread evenly between log(lambda_2)
/// and log(lambda_k). Each level uses a Gaussian band of width 7x the level spacing over
/// the log-eigenvalues, normalised so the band weights sum to one. The constant mode is
/// skipped.
///
inline std::vector<PointwiseDescriptor> wks(const SpectralBasis& basis, Index n_levels)
{
    if (n_levels < 1) throw DimensionError("wks needs at least one energy level");
    if (basis.k() < 3) throw DegenerateSpectrumError("wks needs at least two non-constant eigenpairs");
    if (!(basis.eigenvalues[1] > 0.0)) throw DegenerateSpectrumError("second eigenvalue is not positive");

    const Index m = basis.k() - 1;
    const Eigen::ArrayXd log_lambda = basis.eigenvalues.tail(m).array().log();
    const Eigen::MatrixXd phi_sq = basis.eigenfunctions.rightCols(m).array().square();
    const double e_min = log_lambda[0];
    const double e_max = log_lambda[m - 1];
    const double spacing = n_levels > 1 ? (e_max - e_min) / static_cast<double>(n_levels - 1) : (e_max - e_min);
    const double sigma = kWksVarianceFactor * spacing;
    if (!(sigma > 0.0)) throw DegenerateSpectrumError("eigenvalues span no energy range");

    std::vector<PointwiseDescriptor> out;
    out.reserve(static_cast<std::size_t>(n_levels));
    for (Index level = 0; level < n_levels; ++level) {
        const double e = n_levels > 1 ? e_min + spacing * static_cast<double>(level) : 0.5 * (e_min + e_max);
        Eigen::VectorXd weights = (-(e - log_lambda).square() / (2.0 * sigma * sigma)).exp().matrix();
        weights /= weights.sum();
        PointwiseDescriptor d;
        d.values = phi_sq * weights;
        d.kind = DescriptorKind::Wks;
        d.energy = e;
        out.push_back(std::move(d));
    }
    return out;
}

inline constexpr double kConstantFieldTolerance = 1e-12;

/// Affine rescaling of the values to [0, 1]. Constant fields are returned unchanged and flagged.
inline PointwiseDescriptor normalize_descriptor(const PointwiseDescriptor& d)
{
    PointwiseDescriptor out = d;
    const double lo = d.values.minCoeff();
    const double hi = d.values.maxCoeff();
    if (hi - lo <= kConstantFieldTolerance) {
        out.constant = true;
        return out;
    }
    out.values = (d.values.array() - lo) / (hi - lo);
    out.normalized = true;
    return out;
}

///
/// Normalises a corresponding pair with one shared affine map computed from the union of
/// both fields, so that equal values on the two shapes stay equal.
///
inline std::pair<PointwiseDescriptor, PointwiseDescriptor> normalize_pair(const PointwiseDescriptor& on_x,
                                                                          const PointwiseDescriptor& on_y)
{
    const double lo = std::min(on_x.values.minCoeff(), on_y.values.minCoeff());
    const double hi = std::max(on_x.values.maxCoeff(), on_y.values.maxCoeff());
    PointwiseDescriptor a = on_x, b = on_y;
    if (hi - lo <= kConstantFieldTolerance) {
        a.constant = b.constant = true;
        return {a, b};
    }
    a.values = (on_x.values.array() - lo) / (hi - lo);
    b.values = (on_y.values.array() - lo) / (hi - lo);
    a.normalized = b.normalized = true;
    return {a, b};
}

/// One float per vertex line.
inline PointwiseDescriptor load_external_descriptor(const std::filesystem::path& path, Index n_vertices)
{
    PointwiseDescriptor d;
    d.values = load_scalar_field(path);
    d.kind = DescriptorKind::External;
    if (d.values.size() != n_vertices) {
        throw DimensionError("descriptor file '" + path.string() + "' has " + std::to_string(d.values.size()) +
                             " values, mesh has " + std::to_string(n_vertices) + " vertices");
    }
    if (!d.values.allFinite()) throw ValidationError("descriptor file '" + path.string() + "' has non-finite values");
    return d;
}

} // namespace bifmap
