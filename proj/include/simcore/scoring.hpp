#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "simcore/embedding.hpp"
#include "simcore/kmeans.hpp"

namespace simcore {

// Dot product of two unit vectors; the similarity w(x, u). Accumulation order
// is fixed (sequential over the dimension) so every code path that computes a
// similarity produces bit-identical values.
double similarity(std::span<const float> x, std::span<const float> u);

struct SimilarityBlock {
    std::size_t centroid_count = 0;
    std::size_t candidate_begin = 0;
    std::size_t candidate_end = 0;
    std::vector<double> values;  // centroid_count x (candidate_end - candidate_begin)

    std::size_t width() const { return candidate_end - candidate_begin; }
    // candidate is an absolute open-set row index within the block range.
    double at(std::size_t centroid, std::size_t candidate) const {
        return values[centroid * width() + (candidate - candidate_begin)];
    }
};

// values[i][j] = similarity(centroid i, open row j) for j in [begin, end).
SimilarityBlock similarity_block(const CentroidSet& c, const EmbeddingMatrix& open,
                                 std::size_t candidate_begin, std::size_t candidate_end);

// Facility-location objective: sum over centroids of the maximum similarity
// to any subset member. Undefined (domain error) on the empty subset.
double facility_value(const CentroidSet& c, std::span<const std::size_t> subset,
                      const EmbeddingMatrix& open);

struct Candidate {
    std::size_t index;
    double sim;
};

// Ranking: higher similarity first, then lower open-set row index.
inline bool candidate_better(const Candidate& a, const Candidate& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.index < b.index;
}

// Per-centroid ranked candidate lists over the open-set. Each list holds the
// top_m best unconsumed candidates at the time it was (re)built; consumption
// is tracked globally and consumed entries are skipped lazily. When a list
// drains, a rescan over the unconsumed open-set restores it; a centroid is
// exhausted only when no unconsumed candidate remains anywhere. Keeps
// references to the centroid set and the open matrix; both must outlive the
// index.
class CandidateIndex {
public:
    static constexpr std::size_t kDefaultTopM = 64;
    static constexpr std::size_t kDefaultBlockBytes = std::size_t{64} << 20;

    CandidateIndex(const CentroidSet& c, const EmbeddingMatrix& open,
                   std::size_t top_m = kDefaultTopM,
                   std::size_t block_bytes = kDefaultBlockBytes);

    // Highest-similarity unconsumed candidate of every non-exhausted
    // centroid, de-duplicated (the max winning similarity is kept), sorted by
    // ascending index. Empty result signals exhaustion. Does not consume.
    std::vector<Candidate> nearest_per_centroid();

    void consume(std::span<const std::size_t> indices);

    bool is_consumed(std::size_t open_index) const {
        return consumed_[open_index] != 0;
    }
    std::size_t remaining() const { return open_->count() - consumed_count_; }
    bool exhausted(std::size_t centroid) const { return exhausted_[centroid] != 0; }
    std::size_t top_m() const { return top_m_; }
    std::size_t rescans() const { return rescans_; }

    // Unconsumed entries of one list, best-first (diagnostics and tests).
    std::vector<Candidate> current_list(std::size_t centroid) const;

private:
    // One blocked pass over the unconsumed open-set rebuilding the listed
    // centroids' top-m lists.
    void scan_topm(std::span<const std::size_t> centroid_ids);
    void advance_head(std::size_t centroid);

    const CentroidSet* centroids_;
    const EmbeddingMatrix* open_;
    std::size_t top_m_;
    std::size_t block_bytes_;
    std::vector<std::vector<Candidate>> lists_;
    std::vector<std::size_t> heads_;
    std::vector<char> consumed_;
    std::vector<char> exhausted_;
    std::size_t consumed_count_ = 0;
    std::size_t rescans_ = 0;
};

CandidateIndex build_candidate_index(const CentroidSet& c, const EmbeddingMatrix& open,
                                     std::size_t top_m = CandidateIndex::kDefaultTopM,
                                     std::size_t block_bytes = CandidateIndex::kDefaultBlockBytes);

}  // namespace simcore
