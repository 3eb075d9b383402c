#include "simcore/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "simcore/rng.hpp"

namespace simcore {

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::threshold: return "threshold";
        case StopReason::budget: return "budget";
        case StopReason::exhausted: return "exhausted";
    }
    return "unknown";
}

bool stopping_check(double round_value, double first_value, double tau) {
    if (!(first_value > 0.0)) {
        throw std::domain_error(
            "stopping criterion undefined: first-round objective is not positive");
    }
    return round_value < tau * first_value;
}

namespace {

void check_select_preconditions(const EmbeddingMatrix& target, const EmbeddingMatrix& open,
                                const SamplerConfig& cfg) {
    if (target.dim() != open.dim()) {
        throw std::invalid_argument("target and open-set dimensions differ (" +
                                    std::to_string(target.dim()) + " vs " +
                                    std::to_string(open.dim()) + ")");
    }
    if (!target.normalized() || !open.normalized()) {
        throw std::invalid_argument("simcore_select requires normalized matrices");
    }
    if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) {
        throw std::invalid_argument("tau must be in (0,1]");
    }
    if (cfg.k < 1) throw std::invalid_argument("k must be >= 1");
}

}  // namespace

SelectionReport simcore_select(const EmbeddingMatrix& target, const EmbeddingMatrix& open,
                               const SamplerConfig& config, const RoundLogger& log) {
    const auto t0 = std::chrono::steady_clock::now();
    check_select_preconditions(target, open, config);

    SelectionReport report;
    report.config = config;
    report.config.budget =
        config.budget > 0 ? config.budget : kDefaultBudgetFactor * target.count();
    report.target_count = target.count();
    report.open_count = open.count();
    const std::size_t budget = report.config.budget;

    const bool exact = config.exact_target || config.k == target.count();
    if (exact) report.config.k = target.count();
    const CentroidSet centroids =
        exact ? centroids_from_rows(target)
              : kmeans_fit(target, config.k, config.seed, config.kmeans);
    report.kmeans_inertia = centroids.inertia;
    report.kmeans_iterations = centroids.iterations;

    CandidateIndex index(centroids, open, config.top_m, config.block_bytes);

    std::vector<std::size_t> coreset;
    // Winner similarities of the most recent round drive strict-budget
    // truncation.
    std::vector<Candidate> last_winners;
    double first_value = 0.0;
    bool stopped_by_threshold = false;

    while (coreset.size() < budget) {
        std::vector<Candidate> winners = index.nearest_per_centroid();
        if (winners.empty()) {
            report.stop_reason = StopReason::exhausted;
            break;
        }

        RoundResult round;
        round.t = report.rounds.size() + 1;
        round.members.reserve(winners.size());
        for (const auto& w : winners) round.members.push_back(w.index);
        last_winners = winners;
        round.value = facility_value(centroids, round.members, open);
        if (round.t == 1) {
            if (!(round.value > 0.0)) {
                throw std::domain_error(
                    "open-set entirely dissimilar to target: first-round objective " +
                    std::to_string(round.value) + " is not positive");
            }
            first_value = round.value;
        }
        round.ratio = round.value / first_value;

        index.consume(round.members);
        coreset.insert(coreset.end(), round.members.begin(), round.members.end());
        report.rounds.push_back(round);
        if (log) log(report.rounds.back());

        if (stopping_check(round.value, first_value, config.tau)) {
            report.stop_reason = StopReason::threshold;
            stopped_by_threshold = true;
            break;
        }
        if (coreset.size() >= budget) {
            report.stop_reason = StopReason::budget;
            break;
        }
    }
    if (report.rounds.empty()) {
        throw std::domain_error("open-set exhausted before the first round");
    }

    // The update-then-check order above matches the sampling loop contract;
    // dropping the failing round is the documented opt-out.
    if (stopped_by_threshold && !config.include_final_round) {
        const auto& last = report.rounds.back().members;
        coreset.resize(coreset.size() - last.size());
    }

    if (config.strict_budget && coreset.size() > budget) {
        // Overshoot lives entirely in the final round; drop its lowest-
        // similarity members, ties dropped from the higher index down.
        const std::size_t overshoot = coreset.size() - budget;
        std::vector<Candidate> tail = last_winners;
        std::sort(tail.begin(), tail.end(), [](const Candidate& a, const Candidate& b) {
            if (a.sim != b.sim) return a.sim < b.sim;
            return a.index > b.index;
        });
        std::unordered_set<std::size_t> dropped;
        for (std::size_t i = 0; i < overshoot; ++i) dropped.insert(tail[i].index);
        std::vector<std::size_t> trimmed;
        trimmed.reserve(budget);
        for (const auto idx : coreset) {
            if (!dropped.count(idx)) trimmed.push_back(idx);
        }
        coreset = std::move(trimmed);
    }

    std::sort(coreset.begin(), coreset.end());
    report.coreset = std::move(coreset);
    report.sampling_ratio =
        static_cast<double>(report.coreset.size()) / static_cast<double>(open.count());
    report.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    return report;
}

std::vector<std::size_t> random_select(std::size_t open_count, std::size_t budget,
                                       std::uint64_t seed) {
    if (budget > open_count) {
        throw std::invalid_argument("budget " + std::to_string(budget) +
                                    " exceeds open-set size " + std::to_string(open_count));
    }
    std::vector<std::size_t> pool(open_count);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    auto gen = rng::engine(seed);
    for (std::size_t i = 0; i < budget; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng::below(gen, open_count - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(budget);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<std::size_t> label_oracle_select(const LabelVector& labels,
                                             std::span<const std::int64_t> classes) {
    std::unordered_set<std::int64_t> wanted(classes.begin(), classes.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.count(); ++i) {
        if (wanted.count(labels.labels[i])) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> baseline_select(const BaselineSpec& spec, std::size_t open_count,
                                         const LabelVector* labels, std::uint64_t seed) {
    switch (spec.kind) {
        case BaselineSpec::Kind::random_fraction: {
            if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) {
                throw std::invalid_argument("fraction must be in (0,1]");
            }
            const auto budget = static_cast<std::size_t>(
                std::llround(spec.fraction * static_cast<double>(open_count)));
            return random_select(open_count, std::min(budget, open_count), seed);
        }
        case BaselineSpec::Kind::label_oracle: {
            if (labels == nullptr) {
                throw std::invalid_argument("label-oracle baseline requires labels");
            }
            if (labels->count() != open_count) {
                throw std::invalid_argument("label count does not match open-set size");
            }
            return label_oracle_select(*labels, spec.classes);
        }
    }
    throw std::invalid_argument("unknown baseline kind");
}

}  // namespace simcore
