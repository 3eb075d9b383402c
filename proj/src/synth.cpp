#include "simcore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "simcore/detail/dot.hpp"
#include "simcore/rng.hpp"
#include "simcore/scoring.hpp"

namespace simcore {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double parse_double(const std::string& tok, const std::string& origin, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(origin + ": line " + std::to_string(line) +
                                 ": cannot parse number '" + tok + "'");
    }
}

std::uint64_t parse_u64(const std::string& tok, const std::string& origin, std::size_t line) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(origin + ": line " + std::to_string(line) +
                                 ": cannot parse integer '" + tok + "'");
    }
}

}  // namespace

WorldSpec parse_world_spec_text(const std::string& text, const std::string& origin) {
    WorldSpec spec;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool saw_dim = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        const auto expect = [&](std::size_t n) {
            if (tok.size() != n + 1) {
                throw std::runtime_error(origin + ": line " + std::to_string(lineno) + ": '" +
                                         tok[0] + "' takes " + std::to_string(n) + " values");
            }
        };
        if (tok[0] == "dim") {
            expect(1);
            spec.dim = static_cast<std::size_t>(parse_u64(tok[1], origin, lineno));
            saw_dim = true;
        } else if (tok[0] == "seed") {
            expect(1);
            spec.seed = parse_u64(tok[1], origin, lineno);
        } else if (tok[0] == "min_separation_deg") {
            expect(1);
            spec.min_separation_deg = parse_double(tok[1], origin, lineno);
        } else if (tok[0] == "target") {
            expect(3);
            spec.target_clusters.push_back(
                {parse_u64(tok[1], origin, lineno),
                 static_cast<std::size_t>(parse_u64(tok[2], origin, lineno)),
                 parse_double(tok[3], origin, lineno)});
        } else if (tok[0] == "relevant") {
            expect(3);
            spec.relevant_open_clusters.push_back(
                {static_cast<std::size_t>(parse_u64(tok[1], origin, lineno)),
                 static_cast<std::size_t>(parse_u64(tok[2], origin, lineno)),
                 parse_double(tok[3], origin, lineno)});
        } else if (tok[0] == "distractor") {
            expect(3);
            spec.distractor_open_clusters.push_back(
                {parse_u64(tok[1], origin, lineno),
                 static_cast<std::size_t>(parse_u64(tok[2], origin, lineno)),
                 parse_double(tok[3], origin, lineno)});
        } else {
            throw std::runtime_error(origin + ": line " + std::to_string(lineno) +
                                     ": unknown key '" + tok[0] + "'");
        }
    }
    if (!saw_dim) throw std::runtime_error(origin + ": missing 'dim'");
    if (spec.target_clusters.empty()) {
        throw std::runtime_error(origin + ": at least one 'target' cluster required");
    }
    return spec;
}

WorldSpec parse_world_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_world_spec_text(ss.str(), path);
}

namespace {

void validate_spec(const WorldSpec& spec) {
    if (spec.dim < 2) throw std::invalid_argument("world dim must be >= 2");
    if (spec.target_clusters.empty()) {
        throw std::invalid_argument("world needs at least one target cluster");
    }
    double max_spread = 0.0;
    const auto check_cluster = [&](std::size_t points, double spread) {
        if (points < 1) throw std::invalid_argument("every cluster needs points >= 1");
        if (spread < 0.0) throw std::invalid_argument("spread must be >= 0");
        max_spread = std::max(max_spread, spread);
    };
    for (const auto& c : spec.target_clusters) check_cluster(c.points, c.spread_deg);
    for (const auto& c : spec.relevant_open_clusters) {
        check_cluster(c.points, c.spread_deg);
        if (c.target_index >= spec.target_clusters.size()) {
            throw std::invalid_argument("relevant cluster references target index " +
                                        std::to_string(c.target_index) + " but only " +
                                        std::to_string(spec.target_clusters.size()) +
                                        " target clusters exist");
        }
    }
    for (const auto& c : spec.distractor_open_clusters) check_cluster(c.points, c.spread_deg);
    if (!(spec.min_separation_deg > 2.0 * max_spread)) {
        throw std::invalid_argument(
            "min_separation_deg must exceed twice the maximum spread (" +
            std::to_string(spec.min_separation_deg) + " vs 2 x " +
            std::to_string(max_spread) + "); nearest-neighbor purity is not guaranteed");
    }
}

std::vector<float> sample_direction(std::uint64_t stream_seed, std::size_t dim) {
    auto gen = rng::engine(stream_seed);
    rng::Gaussian gauss;
    std::vector<double> v(dim);
    while (true) {
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            v[j] = gauss(gen);
            sq += v[j] * v[j];
        }
        const double norm = std::sqrt(sq);
        if (norm <= 1e-12) continue;
        std::vector<float> out(dim);
        for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(v[j] / norm);
        return out;
    }
}

// Unit-norm perturbation of the direction with the angle capped at spread.
void fill_cluster(const float* dir, std::size_t dim, std::size_t points, double spread_deg,
                  std::uint64_t stream_seed, float* out) {
    if (spread_deg == 0.0) {
        for (std::size_t p = 0; p < points; ++p) {
            std::memcpy(out + p * dim, dir, dim * sizeof(float));
        }
        return;
    }
    const double spread_rad = spread_deg * kDegToRad;
    const double cos_min = std::cos(spread_rad);
    const double sigma = std::tan(spread_rad / 2.0) / std::sqrt(static_cast<double>(dim));
    auto gen = rng::engine(stream_seed);
    rng::Gaussian gauss;
    std::vector<double> v(dim);
    for (std::size_t p = 0; p < points; ++p) {
        while (true) {
            double sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                v[j] = static_cast<double>(dir[j]) + sigma * gauss(gen);
                sq += v[j] * v[j];
            }
            const double norm = std::sqrt(sq);
            if (norm <= 1e-12) continue;
            double cosang = 0.0;
            for (std::size_t j = 0; j < dim; ++j) cosang += (v[j] / norm) * dir[j];
            if (cosang < cos_min) continue;  // outside the spread cap, resample
            float* row = out + p * dim;
            for (std::size_t j = 0; j < dim; ++j) row[j] = static_cast<float>(v[j] / norm);
            break;
        }
    }
}

struct GenTask {
    const float* dir;
    std::size_t points;
    double spread_deg;
    std::uint64_t stream_seed;
    float* out;
};

void run_tasks(std::vector<GenTask>& tasks, std::size_t dim) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long long i = 0; i < static_cast<long long>(tasks.size()); ++i) {
        const auto& t = tasks[static_cast<std::size_t>(i)];
        fill_cluster(t.dir, dim, t.points, t.spread_deg, t.stream_seed, t.out);
    }
}

}  // namespace

SyntheticWorld generate_world(const WorldSpec& spec) {
    validate_spec(spec);
    const std::size_t dim = spec.dim;
    const std::size_t n_target_dirs = spec.target_clusters.size();
    const std::size_t n_dirs = n_target_dirs + spec.distractor_open_clusters.size();

    std::vector<float> dirs(n_dirs * dim);
    for (std::size_t i = 0; i < n_target_dirs; ++i) {
        const auto d = sample_direction(
            rng::mix(spec.seed, rng::mix(0xD1, spec.target_clusters[i].direction_seed)), dim);
        std::memcpy(dirs.data() + i * dim, d.data(), dim * sizeof(float));
    }
    for (std::size_t i = 0; i < spec.distractor_open_clusters.size(); ++i) {
        const auto d = sample_direction(
            rng::mix(spec.seed,
                     rng::mix(0xD2, spec.distractor_open_clusters[i].direction_seed)),
            dim);
        std::memcpy(dirs.data() + (n_target_dirs + i) * dim, d.data(), dim * sizeof(float));
    }

    const double min_sep_cos = std::cos(spec.min_separation_deg * kDegToRad);
    for (std::size_t a = 0; a < n_dirs; ++a) {
        for (std::size_t b = a + 1; b < n_dirs; ++b) {
            const double d = detail::dot_f32(dirs.data() + a * dim, dirs.data() + b * dim, dim);
            if (d > min_sep_cos) {
                throw std::runtime_error(
                    "cluster directions " + std::to_string(a) + " and " + std::to_string(b) +
                    " are only " + std::to_string(std::acos(std::clamp(d, -1.0, 1.0)) / kDegToRad) +
                    " degrees apart; raise the direction seeds or lower min_separation_deg");
            }
        }
    }

    std::size_t target_count = 0;
    for (const auto& c : spec.target_clusters) target_count += c.points;
    std::size_t open_count = 0;
    for (const auto& c : spec.relevant_open_clusters) open_count += c.points;
    for (const auto& c : spec.distractor_open_clusters) open_count += c.points;
    if (open_count == 0) throw std::invalid_argument("world has no open-set clusters");

    std::vector<float> target_data(target_count * dim);
    std::vector<float> open_data(open_count * dim);
    std::vector<std::int64_t> target_ids(target_count);
    std::vector<std::int64_t> open_ids(open_count);
    std::vector<std::int64_t> relevance(open_count);

    std::vector<GenTask> tasks;
    std::size_t off = 0;
    for (std::size_t i = 0; i < spec.target_clusters.size(); ++i) {
        const auto& c = spec.target_clusters[i];
        tasks.push_back({dirs.data() + i * dim, c.points, c.spread_deg,
                         rng::mix(spec.seed, rng::mix(1, i)), target_data.data() + off * dim});
        std::fill_n(target_ids.begin() + off, c.points, static_cast<std::int64_t>(i));
        off += c.points;
    }
    off = 0;
    std::vector<std::size_t> open_dir_row(open_count);
    for (std::size_t i = 0; i < spec.relevant_open_clusters.size(); ++i) {
        const auto& c = spec.relevant_open_clusters[i];
        tasks.push_back({dirs.data() + c.target_index * dim, c.points, c.spread_deg,
                         rng::mix(spec.seed, rng::mix(2, i)), open_data.data() + off * dim});
        std::fill_n(open_ids.begin() + off, c.points,
                    static_cast<std::int64_t>(c.target_index));
        std::fill_n(relevance.begin() + off, c.points, std::int64_t{1});
        std::fill_n(open_dir_row.begin() + off, c.points, c.target_index);
        off += c.points;
    }
    for (std::size_t i = 0; i < spec.distractor_open_clusters.size(); ++i) {
        const auto& c = spec.distractor_open_clusters[i];
        const std::size_t dir_row = n_target_dirs + i;
        tasks.push_back({dirs.data() + dir_row * dim, c.points, c.spread_deg,
                         rng::mix(spec.seed, rng::mix(3, i)), open_data.data() + off * dim});
        std::fill_n(open_ids.begin() + off, c.points, static_cast<std::int64_t>(dir_row));
        std::fill_n(open_dir_row.begin() + off, c.points, dir_row);
        off += c.points;
    }
    run_tasks(tasks, dim);

    // Purity: every open row must be closest to its own cluster's direction.
    bool pure = true;
    std::size_t bad_row = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long rr = 0; rr < static_cast<long long>(open_count); ++rr) {
        const auto r = static_cast<std::size_t>(rr);
        if (!pure) continue;
        const float* row = open_data.data() + r * dim;
        std::size_t best = 0;
        double best_sim = -std::numeric_limits<double>::infinity();
        for (std::size_t d = 0; d < n_dirs; ++d) {
            const double s = detail::dot_f32(row, dirs.data() + d * dim, dim);
            if (s > best_sim) {
                best_sim = s;
                best = d;
            }
        }
        if (best != open_dir_row[r]) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                pure = false;
                bad_row = r;
            }
        }
    }
    if (!pure) {
        throw std::runtime_error("generated world violates nearest-direction purity at open row " +
                                 std::to_string(bad_row));
    }

    SyntheticWorld world{
        EmbeddingMatrix(target_count, dim, std::move(target_data), true),
        EmbeddingMatrix(open_count, dim, std::move(open_data), true),
        LabelVector{std::move(relevance)},
        std::move(open_ids),
        std::move(target_ids),
        EmbeddingMatrix(n_dirs, dim, std::move(dirs), true),
        n_target_dirs,
    };
    return world;
}

EvalMetrics precision_recall(std::span<const std::size_t> selected,
                             const LabelVector& relevance) {
    EvalMetrics m;
    std::set<std::size_t> unique(selected.begin(), selected.end());
    for (const auto idx : unique) {
        if (idx >= relevance.count()) {
            throw std::out_of_range("selected index " + std::to_string(idx) +
                                    " outside the labeled open-set");
        }
    }
    std::size_t relevant_total = 0;
    for (const auto v : relevance.labels) relevant_total += (v == 1);
    std::size_t hit = 0;
    for (const auto idx : unique) hit += (relevance.labels[idx] == 1);

    m.selected_count = unique.size();
    m.relevant_pool_size = relevant_total;
    m.baseline_precision =
        relevance.count() == 0
            ? 0.0
            : static_cast<double>(relevant_total) / static_cast<double>(relevance.count());
    if (!unique.empty()) {
        m.precision = static_cast<double>(hit) / static_cast<double>(unique.size());
    }
    m.recall = relevant_total == 0
                   ? 0.0
                   : static_cast<double>(hit) / static_cast<double>(relevant_total);
    return m;
}

OracleResult brute_force_round_oracle(const CentroidSet& c, const EmbeddingMatrix& candidates) {
    if (candidates.count() > 20 || c.k > 5) {
        throw std::invalid_argument("instance too large for exhaustive enumeration (|candidates| <= 20, k <= 5)");
    }
    if (c.dim != candidates.dim()) {
        throw std::invalid_argument("oracle: dimension mismatch");
    }
    const std::size_t n = candidates.count();
    const std::size_t k = c.k;

    std::vector<double> sims(k * n);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            sims[i * n + j] = similarity(c.centroid(i), candidates.row(j));
        }
    }

    double fmax = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) best = std::max(best, sims[i * n + j]);
        fmax += best;
    }

    const auto subset_value = [&](std::span<const std::size_t> combo) {
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto j : combo) best = std::max(best, sims[i * n + j]);
            total += best;
        }
        return total;
    };

    // Sizes ascending, combinations lexicographic: the first hit is the
    // minimum-cardinality maximizer with lexicographically smallest indices.
    for (std::size_t s = 1; s <= std::min(k, n); ++s) {
        std::vector<std::size_t> combo(s);
        for (std::size_t i = 0; i < s; ++i) combo[i] = i;
        while (true) {
            if (subset_value(combo) == fmax) {
                return OracleResult{fmax, combo};
            }
            // next lexicographic combination
            std::size_t i = s;
            while (i > 0 && combo[i - 1] == n - s + i - 1) --i;
            if (i == 0) break;
            ++combo[i - 1];
            for (std::size_t j = i; j < s; ++j) combo[j] = combo[j - 1] + 1;
        }
    }
    throw std::logic_error("oracle enumeration failed to reach the maximum");
}

std::vector<SweepRow> sweep(const EmbeddingMatrix& target, const EmbeddingMatrix& open,
                            const SamplerConfig& base, SweepParam param,
                            std::span<const double> values, const LabelVector* relevance) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    if (relevance != nullptr && relevance->count() != open.count()) {
        throw std::invalid_argument("relevance label count " +
                                    std::to_string(relevance->count()) +
                                    " does not match open-set size " +
                                    std::to_string(open.count()));
    }
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (const double v : values) {
        SamplerConfig cfg = base;
        if (param == SweepParam::tau) {
            cfg.tau = v;
        } else {
            const auto k = static_cast<long long>(std::llround(v));
            if (k < 1) throw std::invalid_argument("swept k must be >= 1");
            cfg.k = static_cast<std::size_t>(k);
        }
        const SelectionReport rep = simcore_select(target, open, cfg);
        SweepRow row;
        row.param_value = v;
        row.coreset_size = rep.coreset.size();
        row.sampling_ratio = rep.sampling_ratio;
        row.rounds = rep.rounds.size();
        row.stop_reason = rep.stop_reason;
        if (relevance != nullptr) {
            const EvalMetrics m = precision_recall(rep.coreset, *relevance);
            row.precision = m.precision;
            row.recall = m.recall;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace simcore
