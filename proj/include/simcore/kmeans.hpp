#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simcore/embedding.hpp"

namespace simcore {

// Spherical: assignment by maximum dot product, centroid update re-normalized
// to the unit sphere, inertia = sum(1 - dot). Euclidean: plain Lloyd on the
// raw vectors; final centroids are re-normalized so downstream similarity
// algebra always sees unit rows.
enum class KmeansGeometry { spherical, euclidean };

struct KmeansParams {
    std::size_t max_iter = 100;
    double tol = 1e-4;  // relative inertia change
    KmeansGeometry geometry = KmeansGeometry::spherical;
};

struct CentroidSet {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<float> centroids;  // k x dim row-major, unit-norm rows
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    double tol = 0.0;
    KmeansGeometry geometry = KmeansGeometry::spherical;
    std::vector<double> inertia_history;  // one entry per Lloyd iteration

    std::span<const float> centroid(std::size_t i) const {
        return {centroids.data() + i * dim, dim};
    }
};

struct Assignment {
    std::vector<std::uint32_t> labels;  // cluster id per source row
    std::vector<std::size_t> counts;    // rows per cluster
};

// Distance-weighted (k-means++) seeding over squared Euclidean distance on
// the unit sphere. Requires at least k bitwise-distinct rows. Deterministic
// given seed.
CentroidSet init_centroids(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed);

CentroidSet kmeans_fit(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                       const KmeansParams& params = {});

// Each row to its argmax-dot-product centroid; ties go to the lowest
// centroid index.
Assignment assign(const EmbeddingMatrix& m, const CentroidSet& c);

// Exact mode: every row becomes its own centroid (k = count, inertia 0).
CentroidSet centroids_from_rows(const EmbeddingMatrix& m);

// EMB1 file plus a JSON sidecar at path + ".json" holding k, seed, inertia,
// iterations, tol, geometry.
void save_centroids(const CentroidSet& c, const std::string& path);
CentroidSet load_centroids(const std::string& path);

const char* to_string(KmeansGeometry g);
KmeansGeometry kmeans_geometry_from_string(const std::string& s);

}  // namespace simcore
