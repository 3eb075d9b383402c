#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "simcore/embedding.hpp"
#include "simcore/kmeans.hpp"
#include "simcore/scoring.hpp"

namespace simcore {

struct SamplerConfig {
    std::size_t k = 100;
    double tau = 0.95;       // stopping threshold, in (0, 1]
    std::size_t budget = 0;  // 0 resolves to 50 x target count
    std::uint64_t seed = 0;
    bool strict_budget = false;
    bool include_final_round = true;
    bool exact_target = false;  // use every target row as a centroid
    KmeansParams kmeans{};
    std::size_t top_m = CandidateIndex::kDefaultTopM;
    std::size_t block_bytes = CandidateIndex::kDefaultBlockBytes;
};

inline constexpr std::size_t kDefaultBudgetFactor = 50;

struct RoundResult {
    std::size_t t = 0;                 // 1-based round number
    std::vector<std::size_t> members;  // ascending open-set indices
    double value = 0.0;                // objective of this round's set
    double ratio = 0.0;                // value / round-1 value
};

enum class StopReason { threshold, budget, exhausted };
const char* to_string(StopReason r);

struct SelectionReport {
    std::vector<std::size_t> coreset;  // ascending; union of selected rounds
    std::vector<RoundResult> rounds;
    StopReason stop_reason = StopReason::exhausted;
    double sampling_ratio = 0.0;  // |coreset| / |open|
    std::size_t target_count = 0;
    std::size_t open_count = 0;
    SamplerConfig config;  // echo with the resolved budget
    double kmeans_inertia = 0.0;
    std::size_t kmeans_iterations = 0;
    double elapsed_ms = 0.0;
};

using RoundLogger = std::function<void(const RoundResult&)>;

// Iterative per-round selection: cluster the target to k centroids (skipped
// in exact mode), then repeatedly take the per-centroid nearest unconsumed
// open-set candidates until the budget fills, the round objective drops below
// tau times the first round's, or candidates run out. The below-threshold
// round is part of the coreset unless include_final_round is false.
SelectionReport simcore_select(const EmbeddingMatrix& target, const EmbeddingMatrix& open,
                               const SamplerConfig& config, const RoundLogger& log = {});

// True when sampling must stop: round_value < tau * first_value (strict).
bool stopping_check(double round_value, double first_value, double tau);

// Uniform sample without replacement, ascending, deterministic per seed.
std::vector<std::size_t> random_select(std::size_t open_count, std::size_t budget,
                                       std::uint64_t seed);

// All indices whose label belongs to the class set, ascending.
std::vector<std::size_t> label_oracle_select(const LabelVector& labels,
                                             std::span<const std::int64_t> classes);

struct BaselineSpec {
    enum class Kind { random_fraction, label_oracle };
    Kind kind = Kind::random_fraction;
    double fraction = 0.0;  // in (0, 1] for random_fraction
    std::vector<std::int64_t> classes;
};

std::vector<std::size_t> baseline_select(const BaselineSpec& spec, std::size_t open_count,
                                         const LabelVector* labels, std::uint64_t seed);

}  // namespace simcore
