// Matches a synthetic body against a bent, relabelled copy of itself and prints the
// error for each method at a few descriptor counts.
//
//   self_correspondence [rings segments]

#include "bifmap/bifmap.hpp"

#include <cstdio>
#include <cstdlib>

using namespace bifmap;

int main(int argc, char** argv)
{
    const int rings = argc > 1 ? std::atoi(argv[1]) : 24;
    const int segments = argc > 2 ? std::atoi(argv[2]) : 24;

    const TriangleMesh x = primitives::bumpy_body(rings, segments);
    const auto perm = primitives::random_permutation(x.n_vertices(), 7);
    const TriangleMesh y = permuted(primitives::bent(x, 2.5), perm);
    CorrespondenceMap truth;
    truth.target = perm;

    ExperimentConfig cfg;
    cfg.solver.k = 40;
    cfg.counts = {2, 4, 6};
    std::printf("n = %ld vertices, k = %ld\n", static_cast<long>(x.n_vertices()), static_cast<long>(cfg.solver.k));

    try {
        const PreparedPair pair = prepare_pair(x, y, truth, cfg, cfg.counts.back());
        std::printf("%-12s %6s %12s %12s\n", "method", "count", "mean", "median");
        for (const SweepCell& cell : sweep_prepared(pair, cfg)) {
            std::printf("%-12s %6ld %12.5f %12.5f %s\n", to_string(cell.method).c_str(), static_cast<long>(cell.count),
                        cell.mean_error, cell.median_error, cell.message.c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
