#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simcore/embedding.hpp"
#include "simcore/kmeans.hpp"
#include "simcore/sampler.hpp"

namespace simcore {

struct ClusterSpec {
    std::uint64_t direction_seed = 0;
    std::size_t points = 0;
    double spread_deg = 0.0;  // hard cap on the angle between a member and its direction
};

// An open-set cluster sampled around an existing target cluster's direction.
struct RelevantClusterSpec {
    std::size_t target_index = 0;
    std::size_t points = 0;
    double spread_deg = 0.0;
};

struct WorldSpec {
    std::size_t dim = 0;
    double min_separation_deg = 0.0;  // minimum pairwise angle between directions
    std::uint64_t seed = 0;
    std::vector<ClusterSpec> target_clusters;
    std::vector<RelevantClusterSpec> relevant_open_clusters;
    std::vector<ClusterSpec> distractor_open_clusters;
};

// Text schema, one record per line, '#' comments:
//   dim <n>
//   seed <n>
//   min_separation_deg <x>
//   target <direction_seed> <points> <spread_deg>
//   relevant <target_index> <points> <spread_deg>
//   distractor <direction_seed> <points> <spread_deg>
WorldSpec parse_world_spec(const std::string& path);
WorldSpec parse_world_spec_text(const std::string& text, const std::string& origin = "<text>");

struct SyntheticWorld {
    EmbeddingMatrix target;
    EmbeddingMatrix open;
    LabelVector relevance;  // over open rows: 1 relevant, 0 distractor
    std::vector<std::int64_t> open_cluster_ids;
    std::vector<std::int64_t> target_cluster_ids;
    // All cluster directions: target directions first, then distractors.
    EmbeddingMatrix directions;
    std::size_t target_direction_count = 0;
};

// Deterministic per spec. Verifies at generation that every open row is most
// similar to its own cluster's direction, which the separation constraint
// (min_separation > 2 x max spread) guarantees.
SyntheticWorld generate_world(const WorldSpec& spec);

struct EvalMetrics {
    std::optional<double> precision;  // null for empty selections
    double recall = 0.0;
    std::size_t selected_count = 0;
    std::size_t relevant_pool_size = 0;
    double baseline_precision = 0.0;  // relevant fraction of the open-set
};

EvalMetrics precision_recall(std::span<const std::size_t> selected,
                             const LabelVector& relevance);

struct OracleResult {
    double value = 0.0;
    std::vector<std::size_t> members;  // a minimum-cardinality maximizer
};

// Exhaustive enumeration of all non-empty candidate subsets up to size k.
// Returns the maximum objective and the lexicographically first maximizer of
// minimum cardinality. Capped at |candidates| <= 20 and k <= 5.
OracleResult brute_force_round_oracle(const CentroidSet& c, const EmbeddingMatrix& candidates);

enum class SweepParam { tau, k };

struct SweepRow {
    double param_value = 0.0;
    std::size_t coreset_size = 0;
    double sampling_ratio = 0.0;
    std::size_t rounds = 0;
    StopReason stop_reason = StopReason::exhausted;
    std::optional<double> precision;
    std::optional<double> recall;
};

// One selection run per value, everything else held constant.
std::vector<SweepRow> sweep(const EmbeddingMatrix& target, const EmbeddingMatrix& open,
                            const SamplerConfig& base, SweepParam param,
                            std::span<const double> values,
                            const LabelVector* relevance = nullptr);

}  // namespace simcore
