#include "simcore/scoring.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "simcore/detail/dot.hpp"

namespace simcore {

double similarity(std::span<const float> x, std::span<const float> u) {
    if (x.size() != u.size()) {
        throw std::invalid_argument("similarity: dimension mismatch (" +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(u.size()) + ")");
    }
    return detail::dot_f32(x.data(), u.data(), x.size());
}

SimilarityBlock similarity_block(const CentroidSet& c, const EmbeddingMatrix& open,
                                 std::size_t candidate_begin, std::size_t candidate_end) {
    if (c.dim != open.dim()) {
        throw std::invalid_argument("similarity_block: dimension mismatch");
    }
    if (candidate_begin > candidate_end || candidate_end > open.count()) {
        throw std::out_of_range("similarity_block: candidate range out of bounds");
    }
    SimilarityBlock block;
    block.centroid_count = c.k;
    block.candidate_begin = candidate_begin;
    block.candidate_end = candidate_end;
    const std::size_t width = block.width();
    block.values.resize(c.k * width);
    const std::size_t dim = c.dim;

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long jj = 0; jj < static_cast<long long>(width); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        const float* row = open.row(candidate_begin + j).data();
        for (std::size_t i = 0; i < c.k; ++i) {
            block.values[i * width + j] = detail::dot_f32(c.centroids.data() + i * dim, row, dim);
        }
    }
    return block;
}

double facility_value(const CentroidSet& c, std::span<const std::size_t> subset,
                      const EmbeddingMatrix& open) {
    if (subset.empty()) {
        throw std::domain_error("facility value is undefined on the empty subset");
    }
    if (c.dim != open.dim()) {
        throw std::invalid_argument("facility_value: dimension mismatch");
    }
    for (const auto idx : subset) {
        if (idx >= open.count()) {
            throw std::out_of_range("facility_value: open-set index " + std::to_string(idx) +
                                    " out of range");
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < c.k; ++i) {
        const float* centroid = c.centroids.data() + i * c.dim;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto idx : subset) {
            const double sim = detail::dot_f32(centroid, open.row(idx).data(), c.dim);
            if (sim > best) best = sim;
        }
        total += best;
    }
    return total;
}

namespace {

// Bounded worst-at-front heap holding the best top_m candidates seen so far.
void push_bounded(std::vector<Candidate>& heap, std::size_t top_m, const Candidate& cand) {
    if (heap.size() < top_m) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), candidate_better);
        return;
    }
    if (candidate_better(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), candidate_better);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), candidate_better);
    }
}

}  // namespace

CandidateIndex::CandidateIndex(const CentroidSet& c, const EmbeddingMatrix& open,
                               std::size_t top_m, std::size_t block_bytes)
    : centroids_(&c),
      open_(&open),
      top_m_(top_m),
      block_bytes_(block_bytes),
      lists_(c.k),
      heads_(c.k, 0),
      consumed_(open.count(), 0),
      exhausted_(c.k, 0) {
    if (c.dim != open.dim()) {
        throw std::invalid_argument("candidate index: dimension mismatch");
    }
    if (!open.normalized()) {
        throw std::invalid_argument("candidate index requires a normalized open-set");
    }
    if (top_m_ < 1) {
        throw std::invalid_argument("top_m must be >= 1");
    }
    std::vector<std::size_t> all(c.k);
    for (std::size_t i = 0; i < c.k; ++i) all[i] = i;
    scan_topm(all);
}

void CandidateIndex::scan_topm(std::span<const std::size_t> centroid_ids) {
    const std::size_t batch = centroid_ids.size();
    if (batch == 0) return;
    const std::size_t dim = centroids_->dim;
    const std::size_t n = open_->count();
    const std::size_t width =
        std::max<std::size_t>(1, block_bytes_ / (batch * sizeof(double)));

    std::vector<std::vector<Candidate>> heaps(batch);
    for (auto& h : heaps) h.reserve(top_m_ + 1);
    std::vector<double> sims(batch * std::min(width, n));

    for (std::size_t begin = 0; begin < n; begin += width) {
        const std::size_t end = std::min(n, begin + width);
        const std::size_t w = end - begin;

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long long jj = 0; jj < static_cast<long long>(w); ++jj) {
            const auto j = static_cast<std::size_t>(jj);
            const float* row = open_->row(begin + j).data();
            for (std::size_t b = 0; b < batch; ++b) {
                const float* centroid = centroids_->centroids.data() + centroid_ids[b] * dim;
                sims[b * w + j] = detail::dot_f32(centroid, row, dim);
            }
        }

        // Candidates feed each heap in ascending index order; the top-m set
        // is unique under the total order, so the merge is deterministic.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (long long bb = 0; bb < static_cast<long long>(batch); ++bb) {
            const auto b = static_cast<std::size_t>(bb);
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t idx = begin + j;
                if (consumed_[idx]) continue;
                push_bounded(heaps[b], top_m_, Candidate{idx, sims[b * w + j]});
            }
        }
    }

    for (std::size_t b = 0; b < batch; ++b) {
        auto& list = lists_[centroid_ids[b]];
        list = std::move(heaps[b]);
        std::sort(list.begin(), list.end(), candidate_better);
        heads_[centroid_ids[b]] = 0;
        if (list.empty()) exhausted_[centroid_ids[b]] = 1;
    }
}

void CandidateIndex::advance_head(std::size_t centroid) {
    const auto& list = lists_[centroid];
    std::size_t& head = heads_[centroid];
    while (head < list.size() && consumed_[list[head].index]) ++head;
}

std::vector<Candidate> CandidateIndex::nearest_per_centroid() {
    const std::size_t k = centroids_->k;

    // One shared pass refills every list at or below the low-water mark;
    // drained lists always qualify.
    const std::size_t low_water = std::max<std::size_t>(1, top_m_ / 8);
    std::vector<std::size_t> need;
    if (remaining() > 0) {
        for (std::size_t i = 0; i < k; ++i) {
            if (exhausted_[i]) continue;  // a rescan already found nothing; permanent
            advance_head(i);
            if (lists_[i].size() - heads_[i] < low_water) need.push_back(i);
        }
        if (!need.empty()) {
            scan_topm(need);
            ++rescans_;
        }
    }

    std::vector<Candidate> winners;
    winners.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (exhausted_[i]) continue;
        advance_head(i);
        if (heads_[i] >= lists_[i].size()) {
            // Drained since the shared refill could not restore it.
            exhausted_[i] = 1;
            continue;
        }
        winners.push_back(lists_[i][heads_[i]]);
    }
    if (winners.empty()) return winners;

    std::sort(winners.begin(), winners.end(),
              [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
    std::vector<Candidate> dedup;
    dedup.reserve(winners.size());
    for (const auto& w : winners) {
        if (!dedup.empty() && dedup.back().index == w.index) {
            dedup.back().sim = std::max(dedup.back().sim, w.sim);
        } else {
            dedup.push_back(w);
        }
    }
    return dedup;
}

void CandidateIndex::consume(std::span<const std::size_t> indices) {
    for (const auto idx : indices) {
        if (idx >= open_->count()) {
            throw std::out_of_range("consume: open-set index " + std::to_string(idx) +
                                    " out of range");
        }
        if (!consumed_[idx]) {
            consumed_[idx] = 1;
            ++consumed_count_;
        }
    }
}

std::vector<Candidate> CandidateIndex::current_list(std::size_t centroid) const {
    std::vector<Candidate> out;
    const auto& list = lists_[centroid];
    for (std::size_t p = heads_[centroid]; p < list.size(); ++p) {
        if (!consumed_[list[p].index]) out.push_back(list[p]);
    }
    return out;
}

CandidateIndex build_candidate_index(const CentroidSet& c, const EmbeddingMatrix& open,
                                     std::size_t top_m, std::size_t block_bytes) {
    return CandidateIndex(c, open, top_m, block_bytes);
}

}  // namespace simcore
