#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace simcore {

enum class EmbFormat { binary, csv };

// Dense row-major matrix of f32 feature vectors with stable 0-based row
// indices. Immutable after construction; safe to share across threads.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(std::size_t count, std::size_t dim, std::vector<float> data,
                    bool normalized = false);

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    bool normalized() const noexcept { return normalized_; }
    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    const std::vector<float>& data() const noexcept { return data_; }

private:
    std::size_t count_;
    std::size_t dim_;
    std::vector<float> data_;
    bool normalized_;
};

// Integer class id per row; -1 means unlabeled.
struct LabelVector {
    std::vector<std::int64_t> labels;
    std::size_t count() const noexcept { return labels.size(); }
};

struct ValidationReport {
    std::size_t count = 0;
    std::size_t dim = 0;
    double min_norm = 0.0;
    double max_norm = 0.0;
    bool all_finite = true;
    std::size_t nonfinite_row = 0;  // valid only when !all_finite
    std::size_t nonfinite_col = 0;
    bool normalized_flag = false;
};

// EMB1 binary format (little-endian):
//   magic "EMB1", version u8 = 1, dtype u8 = 0 (f32), reserved u16 = 0,
//   count u64, dim u32, count*dim f32 payload row-major.
// Optional trailing label block: magic "LBL1", count u64, count i64 labels.
// CSV: one row per line, comma-separated decimal floats, no header.
EmbeddingMatrix load_embeddings(const std::string& path, EmbFormat format);
void save_embeddings(const EmbeddingMatrix& m, const std::string& path,
                     EmbFormat format = EmbFormat::binary);
void save_embeddings(const EmbeddingMatrix& m, const LabelVector& labels,
                     const std::string& path);

// Label block of an EMB1 file, if present.
std::optional<LabelVector> load_embedded_labels(const std::string& path);
// Labels from an EMB1 file (LBL1 block required) or a text file of one
// decimal integer per line.
LabelVector load_labels(const std::string& path);
void save_labels(const LabelVector& labels, const std::string& path);

// (count, dim) from an EMB1 header without reading the payload.
std::pair<std::uint64_t, std::uint32_t> read_emb_header(const std::string& path);

// Sniff EMB1 magic; anything else is treated as CSV.
EmbFormat detect_format(const std::string& path);

// Scale every row to unit Euclidean norm. Rows with norm <= 1e-12 are an
// error naming the row index. Direction is preserved.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

ValidationReport validate(const EmbeddingMatrix& m);

// Bitwise-identical row pairs (left row index, right row index), both sides
// ascending. Used to check that two files are disjoint.
std::vector<std::pair<std::size_t, std::size_t>> find_exact_duplicates(
    const EmbeddingMatrix& left, const EmbeddingMatrix& right);

}  // namespace simcore
