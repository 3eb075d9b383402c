#include "simcore/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "simcore/detail/dot.hpp"
#include "simcore/rng.hpp"

namespace simcore {

namespace {

std::size_t distinct_row_count(const EmbeddingMatrix& m) {
    const std::size_t row_bytes = m.dim() * sizeof(float);
    const char* base = reinterpret_cast<const char*>(m.data().data());
    std::unordered_set<std::string_view> seen;
    seen.reserve(m.count());
    for (std::size_t i = 0; i < m.count(); ++i) {
        seen.emplace(base + i * row_bytes, row_bytes);
    }
    return seen.size();
}

bool rows_equal(const EmbeddingMatrix& m, std::size_t a, std::span<const float> b) {
    return std::memcmp(m.row(a).data(), b.data(), m.dim() * sizeof(float)) == 0;
}

void check_fit_preconditions(const EmbeddingMatrix& m, std::size_t k) {
    if (!m.normalized()) {
        throw std::invalid_argument("k-means requires a normalized matrix; call l2_normalize");
    }
    if (k < 1 || k > m.count()) {
        throw std::invalid_argument("k must be in [1, count]; got k=" + std::to_string(k) +
                                    ", count=" + std::to_string(m.count()));
    }
    const std::size_t distinct = distinct_row_count(m);
    if (k > distinct) {
        throw std::invalid_argument("k=" + std::to_string(k) + " exceeds the " +
                                    std::to_string(distinct) + " distinct rows");
    }
}

// Row cost against one centroid under the configured geometry.
double row_cost(std::span<const float> row, const float* centroid, std::size_t dim,
                KmeansGeometry geometry) {
    if (geometry == KmeansGeometry::spherical) {
        return 1.0 - detail::dot_f32(row.data(), centroid, dim);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double d = static_cast<double>(row[j]) - static_cast<double>(centroid[j]);
        acc += d * d;
    }
    return acc;
}

struct AssignResult {
    std::vector<std::uint32_t> labels;
    std::vector<std::size_t> counts;
    double inertia = 0.0;
};

AssignResult assign_rows(const EmbeddingMatrix& m, const std::vector<float>& centroids,
                         std::size_t k, KmeansGeometry geometry) {
    AssignResult res;
    res.labels.resize(m.count());
    res.counts.assign(k, 0);
    const std::size_t dim = m.dim();

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long ri = 0; ri < static_cast<long long>(m.count()); ++ri) {
        const auto i = static_cast<std::size_t>(ri);
        const auto row = m.row(i);
        std::size_t best = 0;
        double best_cost = row_cost(row, centroids.data(), dim, geometry);
        for (std::size_t c = 1; c < k; ++c) {
            const double cost = row_cost(row, centroids.data() + c * dim, dim, geometry);
            if (cost < best_cost) {  // ties keep the lowest centroid index
                best_cost = cost;
                best = c;
            }
        }
        res.labels[i] = static_cast<std::uint32_t>(best);
    }
    // Sequential reduction keeps the inertia sum order fixed.
    for (std::size_t i = 0; i < m.count(); ++i) {
        res.counts[res.labels[i]]++;
        res.inertia += row_cost(m.row(i), centroids.data() + res.labels[i] * dim, dim, geometry);
    }
    return res;
}

// Re-seed an emptied (or degenerate) centroid to the row farthest from its
// current position; lowest row index wins ties.
std::size_t farthest_row(const EmbeddingMatrix& m, const float* centroid,
                         KmeansGeometry geometry) {
    std::size_t best = 0;
    double best_cost = row_cost(m.row(0), centroid, m.dim(), geometry);
    for (std::size_t i = 1; i < m.count(); ++i) {
        const double cost = row_cost(m.row(i), centroid, m.dim(), geometry);
        if (cost > best_cost) {
            best_cost = cost;
            best = i;
        }
    }
    return best;
}

void update_centroids(const EmbeddingMatrix& m, const AssignResult& a,
                      std::vector<float>& centroids, std::size_t k,
                      KmeansGeometry geometry) {
    const std::size_t dim = m.dim();
    std::vector<double> sums(k * dim, 0.0);
    for (std::size_t i = 0; i < m.count(); ++i) {
        const auto row = m.row(i);
        double* dst = sums.data() + a.labels[i] * dim;
        for (std::size_t j = 0; j < dim; ++j) dst[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        float* dst = centroids.data() + c * dim;
        if (a.counts[c] == 0) {
            const std::size_t r = farthest_row(m, dst, geometry);
            std::memcpy(dst, m.row(r).data(), dim * sizeof(float));
            continue;
        }
        const double inv_n = 1.0 / static_cast<double>(a.counts[c]);
        if (geometry == KmeansGeometry::euclidean) {
            for (std::size_t j = 0; j < dim; ++j) {
                dst[j] = static_cast<float>(sums[c * dim + j] * inv_n);
            }
            continue;
        }
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double v = sums[c * dim + j] * inv_n;
            sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm <= 1e-12) {  // members cancelled out; treat like an empty cluster
            const std::size_t r = farthest_row(m, dst, geometry);
            std::memcpy(dst, m.row(r).data(), dim * sizeof(float));
            continue;
        }
        const double inv = inv_n / norm;
        for (std::size_t j = 0; j < dim; ++j) {
            dst[j] = static_cast<float>(sums[c * dim + j] * inv);
        }
    }
}

}  // namespace

CentroidSet init_centroids(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed) {
    check_fit_preconditions(m, k);
    const std::size_t n = m.count();
    const std::size_t dim = m.dim();
    auto gen = rng::engine(seed);

    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    chosen.push_back(static_cast<std::size_t>(rng::below(gen, n)));

    // Squared Euclidean distance to the nearest chosen centroid; on unit
    // vectors d^2 = 2 - 2*dot. Rows bitwise-equal to a chosen centroid get
    // weight exactly 0 so they can never be re-picked.
    std::vector<double> weight(n);
    auto refresh_against = [&](std::size_t centroid_row) {
        const auto c = m.row(centroid_row);
        const bool first = chosen.size() == 1;
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 =
                rows_equal(m, i, c)
                    ? 0.0
                    : std::max(0.0, 2.0 - 2.0 * detail::dot_f32(m.row(i).data(), c.data(), dim));
            if (first || d2 < weight[i]) weight[i] = d2;
        }
    };
    refresh_against(chosen.back());

    while (chosen.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += weight[i];
        std::size_t pick = n;
        if (total > 1e-30) {
            const double target = rng::unit(gen) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += weight[i];
                if (target < acc) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = n - 1;  // target landed on the rounding edge
        } else {
            // All remaining mass is on already-chosen points; fall back to the
            // first bitwise-distinct row.
            for (std::size_t i = 0; i < n && pick == n; ++i) {
                bool dup = false;
                for (const auto c : chosen) {
                    if (rows_equal(m, i, m.row(c))) {
                        dup = true;
                        break;
                    }
                }
                if (!dup) pick = i;
            }
            if (pick == n) {
                throw std::invalid_argument("fewer distinct rows than requested centroids");
            }
        }
        chosen.push_back(pick);
        refresh_against(pick);
    }

    CentroidSet cs;
    cs.k = k;
    cs.dim = dim;
    cs.seed = seed;
    cs.centroids.resize(k * dim);
    for (std::size_t c = 0; c < k; ++c) {
        std::memcpy(cs.centroids.data() + c * dim, m.row(chosen[c]).data(),
                    dim * sizeof(float));
    }
    cs.iterations = 0;
    cs.inertia = assign_rows(m, cs.centroids, k, KmeansGeometry::spherical).inertia;
    return cs;
}

CentroidSet kmeans_fit(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                       const KmeansParams& params) {
    CentroidSet cs = init_centroids(m, k, seed);
    cs.tol = params.tol;
    cs.geometry = params.geometry;

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 1; iter <= params.max_iter; ++iter) {
        const AssignResult a = assign_rows(m, cs.centroids, k, params.geometry);
        cs.inertia = a.inertia;
        cs.inertia_history.push_back(a.inertia);
        cs.iterations = iter;
        if (a.inertia <= 1e-30) break;
        if (std::isfinite(prev) && (prev - a.inertia) / std::max(prev, 1e-30) < params.tol) {
            break;
        }
        if (iter == params.max_iter) break;
        update_centroids(m, a, cs.centroids, k, params.geometry);
        prev = a.inertia;
    }

    if (params.geometry == KmeansGeometry::euclidean) {
        // Downstream similarity algebra expects unit rows.
        for (std::size_t c = 0; c < k; ++c) {
            float* dst = cs.centroids.data() + c * m.dim();
            double sq = 0.0;
            for (std::size_t j = 0; j < m.dim(); ++j) {
                sq += static_cast<double>(dst[j]) * static_cast<double>(dst[j]);
            }
            const double norm = std::sqrt(sq);
            if (norm <= 1e-12) {
                const std::size_t r = farthest_row(m, dst, params.geometry);
                std::memcpy(dst, m.row(r).data(), m.dim() * sizeof(float));
                continue;
            }
            for (std::size_t j = 0; j < m.dim(); ++j) {
                dst[j] = static_cast<float>(dst[j] / norm);
            }
        }
    }
    return cs;
}

Assignment assign(const EmbeddingMatrix& m, const CentroidSet& c) {
    if (m.dim() != c.dim) {
        throw std::invalid_argument("dimension mismatch: matrix dim " + std::to_string(m.dim()) +
                                    " vs centroid dim " + std::to_string(c.dim));
    }
    AssignResult r = assign_rows(m, c.centroids, c.k, KmeansGeometry::spherical);
    return Assignment{std::move(r.labels), std::move(r.counts)};
}

CentroidSet centroids_from_rows(const EmbeddingMatrix& m) {
    if (!m.normalized()) {
        throw std::invalid_argument("exact-mode centroids require a normalized matrix");
    }
    CentroidSet cs;
    cs.k = m.count();
    cs.dim = m.dim();
    cs.centroids = m.data();
    cs.inertia = 0.0;
    cs.iterations = 0;
    return cs;
}

const char* to_string(KmeansGeometry g) {
    return g == KmeansGeometry::spherical ? "spherical" : "euclidean";
}

KmeansGeometry kmeans_geometry_from_string(const std::string& s) {
    if (s == "spherical") return KmeansGeometry::spherical;
    if (s == "euclidean") return KmeansGeometry::euclidean;
    throw std::invalid_argument("unknown k-means geometry: " + s);
}

void save_centroids(const CentroidSet& c, const std::string& path) {
    EmbeddingMatrix m(c.k, c.dim, c.centroids, true);
    save_embeddings(m, path, EmbFormat::binary);
    nlohmann::json meta{
        {"k", c.k},
        {"dim", c.dim},
        {"seed", c.seed},
        {"inertia", c.inertia},
        {"iterations", c.iterations},
        {"tol", c.tol},
        {"geometry", to_string(c.geometry)},
    };
    std::ofstream out(path + ".json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file: " + path + ".json");
    out << meta.dump(2) << '\n';
}

CentroidSet load_centroids(const std::string& path) {
    EmbeddingMatrix m = load_embeddings(path, EmbFormat::binary);
    std::ifstream in(path + ".json");
    if (!in) throw std::runtime_error("missing centroid metadata sidecar: " + path + ".json");
    nlohmann::json meta = nlohmann::json::parse(in);

    CentroidSet c;
    c.k = meta.at("k").get<std::size_t>();
    c.dim = meta.at("dim").get<std::size_t>();
    if (c.k != m.count() || c.dim != m.dim()) {
        throw std::runtime_error(path + ": sidecar shape disagrees with EMB1 header");
    }
    c.centroids = m.data();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.inertia = meta.at("inertia").get<double>();
    c.iterations = meta.at("iterations").get<std::size_t>();
    c.tol = meta.at("tol").get<double>();
    c.geometry = kmeans_geometry_from_string(meta.at("geometry").get<std::string>());
    return c;
}

}  // namespace simcore
